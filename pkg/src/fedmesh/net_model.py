"""Network description: silos, links and the physical parameters of the timing model.

Units are fixed throughout the package: time in milliseconds, capacity in
megabits per millisecond (numerically equal to Gbps) and model size in
megabits, so ``M / A`` is directly a time in milliseconds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class NetworkError(ValueError):
    """A network file or spec that violates the schema or an invariant."""


@dataclass(frozen=True)
class SiloParams:
    id: int
    compute_ms: float
    up_gbps: float
    down_gbps: float


@dataclass(frozen=True)
class LinkParams:
    src: int
    dst: int
    latency_ms: float


def edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class NetworkSpec:
    silos: tuple[SiloParams, ...]
    links: dict[tuple[int, int], LinkParams]
    model_size_mbit: float
    local_updates: int
    name: str = ""

    def __post_init__(self):
        validate_network(self)

    @property
    def n(self) -> int:
        return len(self.silos)

    def latency(self, i: int, j: int) -> float:
        try:
            return self.links[edge_key(i, j)].latency_ms
        except KeyError:
            raise NetworkError(f"no link between silo {i} and silo {j}") from None

    def has_link(self, i: int, j: int) -> bool:
        return edge_key(i, j) in self.links

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.links:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.links if i in (a, b))

    def is_complete(self) -> bool:
        return len(self.links) == self.n * (self.n - 1) // 2

    def with_capacities(self, caps: dict[int, tuple[float, float]]) -> "NetworkSpec":
        """Copy with (up, down) capacities replaced for the given silo ids."""
        silos = tuple(
            SiloParams(s.id, s.compute_ms, *caps[s.id]) if s.id in caps else s
            for s in self.silos
        )
        return NetworkSpec(silos, dict(self.links), self.model_size_mbit,
                           self.local_updates, self.name)


def _connected_components(n: int, pairs) -> list[set[int]]:
    adj: dict[int, list[int]] = {v: [] for v in range(n)}
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    seen: set[int] = set()
    comps = []
    for root in range(n):
        if root in seen:
            continue
        comp = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        comps.append(comp)
    return comps


def validate_network(spec: NetworkSpec) -> None:
    if not spec.silos:
        raise NetworkError("network has no silos")
    ids = [s.id for s in spec.silos]
    if ids != list(range(len(ids))):
        raise NetworkError("silo ids must be dense 0..N-1, unique and in order")
    for s in spec.silos:
        for attr in ("compute_ms", "up_gbps", "down_gbps"):
            v = getattr(s, attr)
            if not (np.isfinite(v) and v > 0):
                raise NetworkError(f"silo {s.id}: {_FIELD_NAMES[attr]} must be > 0")
    if not (np.isfinite(spec.model_size_mbit) and spec.model_size_mbit > 0):
        raise NetworkError("model_size_mbit must be > 0")
    if isinstance(spec.local_updates, bool) or not isinstance(spec.local_updates, int) \
            or spec.local_updates < 1:
        raise NetworkError("local_updates must be an integer >= 1")
    n = len(ids)
    for key, link in spec.links.items():
        if link.src == link.dst:
            raise NetworkError(f"self-loop on silo {link.src}")
        if not (0 <= link.src < n and 0 <= link.dst < n):
            raise NetworkError(f"link ({link.src}, {link.dst}) references unknown silo")
        if key != edge_key(link.src, link.dst):
            raise NetworkError(f"link keyed {key} does not match ({link.src}, {link.dst})")
        if not (np.isfinite(link.latency_ms) and link.latency_ms >= 0):
            raise NetworkError(f"link ({link.src}, {link.dst}): latency_ms must be >= 0")
    comps = _connected_components(n, spec.links)
    if len(comps) > 1:
        main = max(comps, key=lambda c: (len(c), -min(c)))
        stray = min(v for c in comps if c is not main for v in c)
        raise NetworkError(f"disconnected: silo {stray} unreachable")


# Schema: external field name per attribute.
_FIELD_NAMES = {"compute_ms": "compute_ms", "up_gbps": "up_capacity",
                "down_gbps": "down_capacity"}
_TOP_FIELDS = {"name", "model_size_mbit", "local_updates", "silos", "links"}
_SILO_FIELDS = {"id", "compute_ms", "up_gbps", "down_gbps"}
_LINK_FIELDS = {"src", "dst", "latency_ms"}


def _check_fields(obj, allowed: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise NetworkError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise NetworkError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = allowed - set(obj) - {"name"}
    if missing:
        raise NetworkError(f"{where}: missing field(s) {sorted(missing)}")


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NetworkError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _integer(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise NetworkError(f"{where}: expected an integer, got {v!r}")
    return v


def network_from_dict(doc: dict) -> NetworkSpec:
    _check_fields(doc, _TOP_FIELDS, "network")
    silos = []
    for k, s in enumerate(doc["silos"]):
        _check_fields(s, _SILO_FIELDS, f"silos[{k}]")
        silo = SiloParams(
            _integer(s["id"], f"silos[{k}].id"),
            _number(s["compute_ms"], f"silos[{k}].compute_ms"),
            _number(s["up_gbps"], f"silos[{k}].up_gbps"),
            _number(s["down_gbps"], f"silos[{k}].down_gbps"),
        )
        silos.append(silo)
    silos.sort(key=lambda s: s.id)
    links: dict[tuple[int, int], LinkParams] = {}
    for k, entry in enumerate(doc["links"]):
        _check_fields(entry, _LINK_FIELDS, f"links[{k}]")
        src = _integer(entry["src"], f"links[{k}].src")
        dst = _integer(entry["dst"], f"links[{k}].dst")
        lat = _number(entry["latency_ms"], f"links[{k}].latency_ms")
        if src == dst:
            raise NetworkError(f"links[{k}]: self-loop on silo {src}")
        key = edge_key(src, dst)
        if key in links:
            if links[key].latency_ms != lat:
                raise NetworkError(
                    f"links[{k}]: asymmetric latency between silo {src} and silo {dst} "
                    f"({links[key].latency_ms} vs {lat})"
                )
            continue
        links[key] = LinkParams(key[0], key[1], lat)
    return NetworkSpec(
        silos=tuple(silos),
        links=dict(sorted(links.items())),
        model_size_mbit=_number(doc["model_size_mbit"], "model_size_mbit"),
        local_updates=_integer(doc["local_updates"], "local_updates"),
        name=str(doc.get("name", "")),
    )


def network_to_dict(spec: NetworkSpec) -> dict:
    return {
        "name": spec.name,
        "model_size_mbit": spec.model_size_mbit,
        "local_updates": spec.local_updates,
        "silos": [
            {"id": s.id, "compute_ms": s.compute_ms, "up_gbps": s.up_gbps,
             "down_gbps": s.down_gbps}
            for s in spec.silos
        ],
        "links": [
            {"src": a, "dst": b, "latency_ms": link.latency_ms}
            for (a, b), link in sorted(spec.links.items())
        ],
    }


def load_network(path) -> NetworkSpec:
    path = Path(path)
    if not path.exists():
        raise NetworkError(f"{path}: file not found")
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno <= len(text.splitlines()) else ""
        raise NetworkError(
            f"{path}:{exc.lineno}:{exc.colno}: parse error: {exc.msg}\n    {line.strip()}"
        ) from None
    try:
        return network_from_dict(doc)
    except NetworkError as exc:
        raise NetworkError(f"{path}: {exc}") from None


def save_network(spec: NetworkSpec, path) -> None:
    Path(path).write_text(dumps_network(spec), encoding="utf-8")


def dumps_network(spec: NetworkSpec) -> str:
    return json.dumps(network_to_dict(spec), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph over ``n`` nodes; ``inf`` marks a missing edge."""

    weights: np.ndarray
    directed: np.ndarray | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def has_edge(self, i: int, j: int) -> bool:
        return i != j and np.isfinite(self.weights[i, j])

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)
                if np.isfinite(self.weights[i, j])]

    def is_complete(self) -> bool:
        off = ~np.eye(self.n, dtype=bool)
        return bool(np.all(np.isfinite(self.weights[off])))

    def is_connected(self) -> bool:
        return len(_connected_components(self.n, self.edges())) == 1

    @classmethod
    def from_matrix(cls, w) -> "WeightedGraph":
        w = np.array(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.array_equal(w, w.T):
            raise ValueError("weight matrix must be symmetric")
        np.fill_diagonal(w, 0.0)
        return cls(w)


def connectivity_graph(spec: NetworkSpec) -> WeightedGraph:
    """Connectivity graph weighted by static delay under full-connectivity degrees.

    ``directed[i, j]`` is the delay for ``j`` to receive ``i``'s model; the
    undirected weight of a pair is the slower of its two directions.
    """
    from .timing import static_delay

    n = spec.n
    directed = np.full((n, n), np.inf)
    np.fill_diagonal(directed, 0.0)
    deg = [spec.degree(i) for i in range(n)]
    for a, b in spec.links:
        directed[a, b] = static_delay(spec, a, b, deg[a], deg[b])
        directed[b, a] = static_delay(spec, b, a, deg[b], deg[a])
    weights = np.maximum(directed, directed.T)
    return WeightedGraph(weights, directed)
