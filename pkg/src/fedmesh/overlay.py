"""Overlay construction: Christofides ring, minimax STAR and Prim MST."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .net_model import WeightedGraph, _connected_components, edge_key

KINDS = ("ring", "star", "mst", "custom")

# Largest odd-vertex set matched exactly; above this a greedy + 2-opt matching is used.
EXACT_MATCHING_LIMIT = 12


class OverlayError(ValueError):
    pass


@dataclass(frozen=True)
class OverlayGraph:
    n: int
    edges: frozenset
    kind: str = "custom"
    tour: tuple[int, ...] | None = None
    hub: int | None = None
    metric_violation: bool = field(default=False, compare=False)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    def neighbors(self, v: int) -> list[int]:
        return sorted(b if a == v else a for a, b in self.edges if v in (a, b))

    def weight(self, conn: WeightedGraph) -> float:
        return float(sum(conn.weights[a, b] for a, b in self.sorted_edges()))

    @classmethod
    def from_edges(cls, n: int, edges, kind: str = "custom") -> "OverlayGraph":
        return cls(n, frozenset(edge_key(a, b) for a, b in edges), kind)


def validate_overlay(ov: OverlayGraph, conn: WeightedGraph | None = None) -> None:
    """Raise :class:`OverlayError` if ``ov`` breaks a structural invariant of its kind."""
    if ov.kind not in KINDS:
        raise OverlayError(f"unknown overlay kind {ov.kind!r}")
    for a, b in ov.edges:
        if a == b:
            raise OverlayError(f"self-loop at {a}")
        if not (0 <= a < b < ov.n):
            raise OverlayError(f"edge {(a, b)} is not a normalized pair over 0..{ov.n - 1}")
        if conn is not None and not conn.has_edge(a, b):
            raise OverlayError(f"edge {(a, b)} is not a connectivity edge")
    if ov.n > 1 and len(_connected_components(ov.n, ov.edges)) != 1:
        raise OverlayError("overlay is not connected")
    degs = [ov.degree(v) for v in range(ov.n)]
    if ov.kind == "ring":
        if any(d != 2 for d in degs) or len(ov.edges) != ov.n:
            raise OverlayError("ring overlay must be a single Hamiltonian cycle")
    elif ov.kind == "star":
        hubs = [v for v in range(ov.n) if degs[v] == ov.n - 1]
        leaves = [v for v in range(ov.n) if degs[v] == 1]
        if len(ov.edges) != ov.n - 1 or not hubs or len(leaves) < ov.n - 1:
            raise OverlayError("star overlay must have one hub of degree N-1")
    elif ov.kind == "mst":
        if len(ov.edges) != ov.n - 1:
            raise OverlayError("spanning tree must have N-1 edges")


def prim_mst(conn: WeightedGraph, root: int = 0) -> list[tuple[int, int]]:
    """Prim's algorithm; ties go to the lexicographically smaller (min-id, max-id) edge."""
    n = conn.n
    w = conn.weights
    in_tree = [False] * n
    in_tree[root] = True
    heap: list[tuple[float, int, int, int]] = []

    def push_from(v):
        for u in range(n):
            if not in_tree[u] and u != v and np.isfinite(w[v, u]):
                a, b = edge_key(v, u)
                heapq.heappush(heap, (float(w[v, u]), a, b, u))

    push_from(root)
    edges = []
    while heap and len(edges) < n - 1:
        _, a, b, u = heapq.heappop(heap)
        if in_tree[u]:
            continue
        in_tree[u] = True
        edges.append((a, b))
        push_from(u)
    if len(edges) != n - 1:
        raise OverlayError("connectivity graph is disconnected; no spanning tree exists")
    return edges


def build_mst(conn: WeightedGraph) -> OverlayGraph:
    return OverlayGraph(conn.n, frozenset(prim_mst(conn)), "mst")


def build_star(conn: WeightedGraph) -> OverlayGraph:
    """STAR overlay centred on the minimax node (smallest worst-case delay to any other node)."""
    n = conn.n
    if n < 2:
        raise OverlayError("star overlay needs at least 2 nodes")
    w = conn.weights.copy()
    np.fill_diagonal(w, -np.inf)
    ecc = w.max(axis=1)
    hub = int(np.argmin(ecc))
    if not np.isfinite(ecc[hub]):
        raise OverlayError("no node is connected to every other node; STAR impossible")
    edges = frozenset(edge_key(hub, v) for v in range(n) if v != hub)
    return OverlayGraph(n, edges, "star", hub=hub)


def is_metric(w: np.ndarray, rtol: float = 1e-9) -> bool:
    """Triangle inequality over every ordered triple."""
    scale = float(np.max(w[np.isfinite(w)])) if np.isfinite(w).any() else 1.0
    via = w[:, :, None] + w[None, :, :]  # via[i, j, k] = w[i, j] + w[j, k]
    direct = w[:, None, :]
    return bool(np.all(direct <= via + rtol * scale))


def _exact_matching(nodes: list[int], w: np.ndarray) -> list[tuple[int, int]]:
    m = len(nodes)
    full = (1 << m) - 1

    @lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple[tuple[int, int], ...]]:
        if mask == full:
            return 0.0, ()
        i = 0
        while mask >> i & 1:
            i += 1
        out = (np.inf, ())
        for j in range(i + 1, m):
            if mask >> j & 1:
                continue
            cost, pairs = best(mask | 1 << i | 1 << j)
            cost += w[nodes[i], nodes[j]]
            if cost < out[0]:
                out = (cost, ((nodes[i], nodes[j]),) + pairs)
        return out

    return list(best(0)[1])


def _greedy_matching(nodes: list[int], w: np.ndarray) -> list[tuple[int, int]]:
    cand = sorted((w[a, b], a, b) for k, a in enumerate(nodes) for b in nodes[k + 1:])
    used: set[int] = set()
    pairs = []
    for _, a, b in cand:
        if a not in used and b not in used:
            pairs.append((a, b))
            used |= {a, b}
    improved = True
    while improved:
        improved = False
        for p in range(len(pairs)):
            for q in range(p + 1, len(pairs)):
                (a, b), (c, d) = pairs[p], pairs[q]
                cur = w[a, b] + w[c, d]
                for x, y in (((a, c), (b, d)), ((a, d), (b, c))):
                    if w[x] + w[y] < cur - 1e-12:
                        pairs[p], pairs[q] = edge_key(*x), edge_key(*y)
                        improved = True
                        break
                if improved:
                    break
            if improved:
                break
    return pairs


def min_weight_matching(nodes: list[int], w: np.ndarray) -> list[tuple[int, int]]:
    nodes = sorted(nodes)
    if len(nodes) % 2:
        raise OverlayError("perfect matching needs an even vertex count")
    if len(nodes) <= EXACT_MATCHING_LIMIT:
        return _exact_matching(nodes, w)
    return _greedy_matching(nodes, w)


def euler_circuit(n: int, edges: list[tuple[int, int]], start: int = 0) -> list[int]:
    """Hierholzer's algorithm on a multigraph; always takes the smallest-id unused edge."""
    adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(n)}
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k))
        adj[b].append((a, k))
    for v in adj:
        adj[v].sort(reverse=True)  # pop() yields the smallest neighbour first
    used = [False] * len(edges)
    stack = [start]
    circuit = []
    while stack:
        v = stack[-1]
        while adj[v] and used[adj[v][-1][1]]:
            adj[v].pop()
        if adj[v]:
            u, k = adj[v].pop()
            used[k] = True
            stack.append(u)
        else:
            circuit.append(stack.pop())
    return circuit[::-1]


def christofides_tour(conn: WeightedGraph) -> list[int]:
    n = conn.n
    if n < 3:
        raise OverlayError("a ring needs at least 3 nodes")
    if not conn.is_complete():
        raise OverlayError("Christofides requires complete metric graph")
    w = conn.weights
    tree = prim_mst(conn)
    deg = [0] * n
    for a, b in tree:
        deg[a] += 1
        deg[b] += 1
    odd = [v for v in range(n) if deg[v] % 2]
    multi = tree + min_weight_matching(odd, w)
    seen: set[int] = set()
    tour = []
    for v in euler_circuit(n, multi, start=0):
        if v not in seen:
            seen.add(v)
            tour.append(v)
    return tour


def tour_cost(tour, w: np.ndarray) -> float:
    return float(sum(w[tour[k], tour[(k + 1) % len(tour)]] for k in range(len(tour))))


def build_ring(conn: WeightedGraph) -> OverlayGraph:
    tour = christofides_tour(conn)
    edges = frozenset(edge_key(tour[k], tour[(k + 1) % len(tour)]) for k in range(len(tour)))
    return OverlayGraph(conn.n, edges, "ring", tour=tuple(tour),
                        metric_violation=not is_metric(conn.weights))


BUILDERS = {"ring": build_ring, "star": build_star, "mst": build_mst}


def build_overlay(conn: WeightedGraph, kind: str) -> OverlayGraph:
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise OverlayError(f"unknown overlay kind {kind!r}; expected one of {sorted(BUILDERS)}") from None
    return builder(conn)
