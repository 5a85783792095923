"""Delay model: static edge delay, access-link sharing, per-round delay recursion, cycle time.

Delays are keyed by directed edge ``(i, j)``: the time for silo ``j`` to
receive the model sent by silo ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .net_model import NetworkSpec


class TimingError(RuntimeError):
    pass


def traffic_capacity(spec: NetworkSpec, i: int, j: int, out_degree_i: int,
                     in_degree_j: int) -> float:
    """Share of the access links available to the transfer ``i -> j``.

    The sender splits its upload over its out-neighbours and the receiver
    splits its download over its own in-neighbours.
    """
    if out_degree_i < 1 or in_degree_j < 1:
        raise TimingError(
            f"degrees must be >= 1 (out_degree({i})={out_degree_i}, in_degree({j})={in_degree_j})"
        )
    return min(spec.silos[i].up_gbps / out_degree_i, spec.silos[j].down_gbps / in_degree_j)


def static_delay(spec: NetworkSpec, i: int, j: int, out_degree_i: int,
                 in_degree_j: int) -> float:
    """``u * T_c(i) + l(i, j) + M / A(i, j)`` in milliseconds."""
    latency = spec.latency(i, j)
    cap = traffic_capacity(spec, i, j, out_degree_i, in_degree_j)
    return spec.local_updates * spec.silos[i].compute_ms + latency + spec.model_size_mbit / cap


def overlay_delays(spec: NetworkSpec, edges) -> dict[tuple[int, int], float]:
    """Static delays of both directions of every undirected edge, using the edges' own degrees."""
    deg: dict[int, int] = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    out = {}
    for a, b in sorted(edges):
        out[(a, b)] = static_delay(spec, a, b, deg[a], deg[b])
        out[(b, a)] = static_delay(spec, b, a, deg[b], deg[a])
    return out


def undirected_delays(directed: dict[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    """Collapse directed delays to one value per pair: the slower direction."""
    out: dict[tuple[int, int], float] = {}
    for (a, b), d in directed.items():
        key = (a, b) if a < b else (b, a)
        out[key] = max(out.get(key, d), d)
    return dict(sorted(out.items()))


class DelayLedger:
    """Per-round delay state for every directed overlay edge.

    Single writer: call :meth:`advance` once per communication round.
    """

    def __init__(self, spec: NetworkSpec, static: dict[tuple[int, int], float]):
        if not static:
            raise TimingError("ledger needs at least one edge")
        for e, d in static.items():
            if not d > 0:
                raise TimingError(f"static delay of edge {e} must be > 0, got {d}")
        self.spec = spec
        self.static = dict(static)
        self.current: dict[tuple[int, int], float] = {}
        self.prev_strong: dict[tuple[int, int], bool] = {}
        # Cycle time of the previous round; before round 0 it is the all-strong max.
        self.prev_tau = max(self.static.values())
        self.k = 0
        self.cycle_times: list[float] = []

    @classmethod
    def for_edges(cls, spec: NetworkSpec, edges) -> "DelayLedger":
        return cls(spec, overlay_delays(spec, edges))

    @property
    def initialized(self) -> bool:
        return self.k > 0

    def advance(self, labels) -> float:
        """Update every edge for the current round and return its cycle time.

        ``labels`` maps each undirected edge ``(min, max)`` to True when it is
        strongly connected this round (a :class:`GraphState`'s labels).
        """
        k = self.k
        labels = getattr(labels, "labels", labels)
        strong = {e: bool(labels[_undirected(e)]) for e in self.static}
        self.current = {e: update_delay(self, e, strong[e], k) for e in self.static}
        self.prev_strong = strong
        tau = round_cycle_time(labels, self)
        self.prev_tau = tau
        self.cycle_times.append(tau)
        self.k += 1
        return tau


def _undirected(e):
    return e if e[0] < e[1] else (e[1], e[0])


def update_delay(ledger: DelayLedger, edge: tuple[int, int], strong: bool, k: int) -> float:
    """New delay of ``edge`` at round ``k`` given this round's label.

    Branches, with ``tau`` the previous round's realized cycle time:
      k == 0 or strong after strong -> static delay
      strong after weak             -> max(u * T_c(j), static - d_prev)
      weak after weak               -> tau + d_prev
      weak after strong             -> tau
    """
    static = ledger.static[edge]
    if k == 0:
        return static
    if edge not in ledger.current:
        raise TimingError(f"ledger not initialized for edge {edge} at round {k}")
    d_prev = ledger.current[edge]
    prev_strong = ledger.prev_strong[edge]
    if strong and prev_strong:
        return static
    if strong:
        j = edge[1]
        floor = ledger.spec.local_updates * ledger.spec.silos[j].compute_ms
        return max(floor, static - d_prev)
    if not prev_strong:
        return ledger.prev_tau + d_prev
    return ledger.prev_tau


def round_cycle_time(labels, ledger: DelayLedger) -> float:
    """Max current delay over strong directed edges; a round with none costs local compute only."""
    labels = getattr(labels, "labels", labels)
    strong = [d for e, d in ledger.current.items() if labels[_undirected(e)]]
    if strong:
        return max(strong)
    u = ledger.spec.local_updates
    return max(u * s.compute_ms for s in ledger.spec.silos)


@dataclass(frozen=True)
class CycleStats:
    per_round: tuple[float, ...]
    mean: float
    total: float


def mean_cycle_time(cycle_times) -> CycleStats:
    values = tuple(float(x) for x in cycle_times)
    if not values:
        raise TimingError("mean cycle time of an empty run")
    total = 0.0
    for v in values:
        total += v
    return CycleStats(values, total / len(values), total)
