import numpy as np
import pytest

from fedmesh.net_model import WeightedGraph
from fedmesh.overlay import (
    OverlayError,
    OverlayGraph,
    build_mst,
    build_overlay,
    build_ring,
    build_star,
    euler_circuit,
    is_metric,
    min_weight_matching,
    tour_cost,
    validate_overlay,
)

from oracles import exact_matching_cost, exact_mst_weight, exact_tsp_cost, random_metric


def _graph(w):
    return WeightedGraph.from_matrix(w)


def test_unit_square_ring_is_perimeter():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    w = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    ring = build_ring(_graph(w))
    validate_overlay(ring)
    assert ring.edges == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert ring.weight(_graph(w)) == pytest.approx(4.0)
    assert exact_tsp_cost(w) == pytest.approx(4.0)


def test_three_node_ring_is_triangle():
    w = np.array([[0, 1, 2], [1, 0, 2.5], [2, 2.5, 0]])
    ring = build_ring(_graph(w))
    assert ring.edges == {(0, 1), (0, 2), (1, 2)}
    assert ring.weight(_graph(w)) == pytest.approx(5.5)


@pytest.mark.parametrize("seed", range(25))
def test_ring_within_christofides_bound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    w = random_metric(n, rng)
    ring = build_ring(_graph(w))
    validate_overlay(ring, _graph(w))
    assert not ring.metric_violation
    assert tour_cost(ring.tour, w) <= 1.5 * exact_tsp_cost(w) + 1e-12


def test_ring_deterministic():
    w = random_metric(9, np.random.default_rng(4))
    assert build_ring(_graph(w)) == build_ring(_graph(w.copy()))


def test_ring_requires_complete_graph():
    w = np.array([[0, 1, np.inf], [1, 0, 1], [np.inf, 1, 0]])
    with pytest.raises(OverlayError, match="Christofides requires complete metric graph"):
        build_ring(_graph(w))


def test_ring_flags_non_metric_input():
    w = np.array([[0, 1, 10, 1], [1, 0, 1, 1], [10, 1, 0, 1], [1, 1, 1, 0]], dtype=float)
    ring = build_ring(_graph(w))
    validate_overlay(ring)
    assert ring.metric_violation


def test_star_minimax_hub():
    w = np.array([[0, 1, 1], [1, 0, 5], [1, 5, 0]], dtype=float)
    star = build_star(_graph(w))
    assert star.hub == 0
    validate_overlay(star)


def test_star_uniform_tie_goes_to_lowest_id():
    star = build_star(_graph(np.ones((5, 5))))
    assert star.hub == 0
    assert star.edges == {(0, v) for v in range(1, 5)}


def test_star_two_nodes():
    star = build_star(_graph([[0, 3], [3, 0]]))
    assert star.hub == 0 and star.edges == {(0, 1)}


def test_star_hub_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(20):
        w = random_metric(int(rng.integers(2, 9)), rng)
        n = w.shape[0]
        ecc = [max(w[v, u] for u in range(n) if u != v) for v in range(n)]
        assert build_star(_graph(w)).hub == ecc.index(min(ecc))


def test_mst_triangle():
    w = np.array([[0, 1, 3], [1, 0, 2], [3, 2, 0]], dtype=float)
    mst = build_mst(_graph(w))
    assert mst.edges == {(0, 1), (1, 2)}
    assert mst.weight(_graph(w)) == 3


def test_mst_of_tree_is_itself():
    w = np.full((4, 4), np.inf)
    for a, b, d in [(0, 1, 2.0), (1, 2, 7.0), (2, 3, 1.0)]:
        w[a, b] = w[b, a] = d
    mst = build_mst(_graph(w))
    assert mst.edges == {(0, 1), (1, 2), (2, 3)}


@pytest.mark.parametrize("seed", range(20))
def test_mst_matches_exhaustive_minimum(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 8))
    w = rng.integers(1, 6, size=(n, n)).astype(float)  # small integers force ties
    w = np.triu(w, 1)
    w = w + w.T
    drop = np.triu(rng.random((n, n)) < 0.3, 1)
    for a in range(n - 1):
        drop[a, a + 1] = False
    w[drop | drop.T] = np.inf
    np.fill_diagonal(w, 0)
    mst = build_mst(_graph(w))
    validate_overlay(mst, _graph(w))
    assert mst.weight(_graph(w)) == pytest.approx(exact_mst_weight(w))


def test_mst_disconnected_raises():
    w = np.full((4, 4), np.inf)
    w[0, 1] = w[1, 0] = 1
    w[2, 3] = w[3, 2] = 1
    np.fill_diagonal(w, 0)
    with pytest.raises(OverlayError, match="disconnected"):
        build_mst(_graph(w))


@pytest.mark.parametrize("m", [2, 4, 6, 8])
def test_exact_matching_optimal(m):
    rng = np.random.default_rng(m)
    w = random_metric(m + 3, rng)
    nodes = sorted(rng.choice(m + 3, size=m, replace=False).tolist())
    pairs = min_weight_matching(nodes, w)
    assert sorted(v for p in pairs for v in p) == nodes
    assert sum(w[a, b] for a, b in pairs) == pytest.approx(exact_matching_cost(nodes, w))


def test_large_matching_is_perfect():
    w = random_metric(20, np.random.default_rng(0))
    pairs = min_weight_matching(list(range(16)), w)
    assert sorted(v for p in pairs for v in p) == list(range(16))


def test_large_ring_valid():
    w = random_metric(40, np.random.default_rng(3))
    validate_overlay(build_ring(_graph(w)))


def test_euler_circuit_uses_every_edge_once():
    edges = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]
    circuit = euler_circuit(5, edges)
    assert circuit[0] == circuit[-1] == 0
    walked = sorted(tuple(sorted(p)) for p in zip(circuit, circuit[1:]))
    assert walked == sorted(tuple(sorted(e)) for e in edges)


def test_is_metric():
    assert is_metric(random_metric(6, np.random.default_rng(1)))
    assert not is_metric(np.array([[0, 1, 3], [1, 0, 1], [3, 1, 0]], dtype=float))


@pytest.mark.parametrize("kind", ["ring", "star", "mst"])
def test_builders_satisfy_invariants(kind):
    w = random_metric(7, np.random.default_rng(9))
    ov = build_overlay(_graph(w), kind)
    assert ov.kind == kind
    validate_overlay(ov, _graph(w))


def test_validate_rejects_broken_ring():
    ov = OverlayGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)], kind="ring")
    with pytest.raises(OverlayError, match="Hamiltonian"):
        validate_overlay(ov)


def test_validate_rejects_edge_outside_connectivity():
    w = np.array([[0, 1, np.inf], [1, 0, 1], [np.inf, 1, 0]])
    ov = OverlayGraph.from_edges(3, [(0, 1), (0, 2)])
    with pytest.raises(OverlayError, match="not a connectivity edge"):
        validate_overlay(ov, _graph(w))


def test_unknown_kind():
    with pytest.raises(OverlayError, match="unknown overlay kind"):
        build_overlay(_graph(np.ones((3, 3))), "hypercube")
