"""Brute-force reference computations, independent of the package's algorithms."""
import itertools

import numpy as np


def exact_tsp_cost(w: np.ndarray) -> float:
    n = w.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(1, n)):
        tour = (0,) + perm
        cost = sum(w[tour[k], tour[(k + 1) % n]] for k in range(n))
        best = min(best, cost)
    return float(best)


def _is_spanning_tree(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def exact_mst_weight(w: np.ndarray) -> float:
    n = w.shape[0]
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if np.isfinite(w[a, b])]
    best = np.inf
    for subset in itertools.combinations(edges, n - 1):
        if _is_spanning_tree(n, subset):
            best = min(best, sum(w[a, b] for a, b in subset))
    return float(best)


def exact_matching_cost(nodes, w) -> float:
    nodes = list(nodes)
    if not nodes:
        return 0.0
    first, rest = nodes[0], nodes[1:]
    return min(w[first, x] + exact_matching_cost([y for y in rest if y != x], w) for x in rest)


def random_metric(n: int, rng: np.random.Generator) -> np.ndarray:
    pts = rng.random((n, 2))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
