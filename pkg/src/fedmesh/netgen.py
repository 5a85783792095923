"""Synthetic network generator shaped after well-known WAN topologies (silo and link counts only)."""
from __future__ import annotations

import numpy as np

from .net_model import LinkParams, NetworkError, NetworkSpec, SiloParams

# name -> (silos, links)
PRESETS = {
    "gaia-like": (11, 55),
    "amazon-like": (22, 231),
    "geant-like": (40, 61),
    "exodus-like": (79, 147),
    "ebone-like": (87, 161),
}


def _positions(n: int, rng: np.random.Generator, clusters: int, spread: float) -> np.ndarray:
    if clusters <= 1:
        return rng.random((n, 2))
    centres = rng.random((clusters, 2))
    labels = np.arange(n) % clusters
    return np.clip(centres[labels] + spread * rng.normal(size=(n, 2)), 0.0, 1.0)


def _pick_links(dist: np.ndarray, n_links: int) -> list[tuple[int, int]]:
    """Euclidean spanning tree for connectivity, then the shortest remaining pairs."""
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].copy()
    parent = np.zeros(n, dtype=int)
    chosen = set()
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        p = int(parent[v])
        chosen.add((min(v, p), max(v, p)))
        in_tree[v] = True
        closer = dist[v] < best
        best = np.where(closer, dist[v], best)
        parent = np.where(closer, v, parent)
    rest = sorted((dist[a, b], a, b) for a in range(n) for b in range(a + 1, n)
                  if (a, b) not in chosen)
    for _, a, b in rest[: n_links - len(chosen)]:
        chosen.add((a, b))
    return sorted(chosen)


def _shortest_paths(n: int, links: dict) -> np.ndarray:
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for (a, b), lat in links.items():
        d[a, b] = d[b, a] = lat
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def generate_network(
    n: int,
    n_links: int | None = None,
    density: float = 1.0,
    latency_range: tuple[float, float] = (1.0, 20.0),
    compute_range: tuple[float, float] = (1.0, 2.0),
    capacity: float = 1.0,
    orchestrator: tuple[int, float] | None = None,
    model_size_mbit: float = 4.62,
    local_updates: int = 1,
    clusters: int = 1,
    spread: float = 0.05,
    full_mesh: bool = False,
    seed: int = 0,
    name: str = "synthetic",
) -> NetworkSpec:
    """Random geometric network; latency grows affinely with distance so latencies stay metric.

    ``full_mesh`` keeps the sampled link set as the physical layer and emits
    every silo pair with its shortest-path latency.
    """
    if n < 3:
        raise NetworkError("generated networks need N >= 3")
    max_links = n * (n - 1) // 2
    if n_links is None:
        if not 0.0 < density <= 1.0:
            raise NetworkError("link density must be in (0, 1]")
        n_links = max(n - 1, int(round(density * max_links)))
    if not n - 1 <= n_links <= max_links:
        raise NetworkError(
            f"cannot build a connected {n}-silo network with {n_links} links "
            f"(need between {n - 1} and {max_links})"
        )
    lo, hi = latency_range
    if not 0 <= lo <= hi:
        raise NetworkError("latency range must satisfy 0 <= low <= high")
    rng = np.random.default_rng([seed, n])
    pos = _positions(n, rng, clusters, spread)
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    latency = lo + (hi - lo) * dist / np.sqrt(2.0)
    pairs = _pick_links(dist, n_links)
    lat = {(a, b): round(float(latency[a, b]), 3) for a, b in pairs}
    if full_mesh:
        sp = _shortest_paths(n, lat)
        lat = {(a, b): round(float(sp[a, b]), 3) for a in range(n) for b in range(a + 1, n)}
    compute = rng.uniform(*compute_range, size=n)
    silos = []
    for i in range(n):
        c_up = c_dn = capacity
        if orchestrator is not None and orchestrator[0] == i:
            c_up = c_dn = orchestrator[1]
        silos.append(SiloParams(i, round(float(compute[i]), 3), c_up, c_dn))
    links = {e: LinkParams(e[0], e[1], v) for e, v in sorted(lat.items())}
    return NetworkSpec(tuple(silos), links, model_size_mbit, local_updates, name)


def generate_preset(preset: str, seed: int = 0, full_mesh: bool = False, **kwargs) -> NetworkSpec:
    try:
        n, m = PRESETS[preset]
    except KeyError:
        raise NetworkError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}") from None
    return generate_network(n, n_links=m, seed=seed, full_mesh=full_mesh, name=preset, **kwargs)
