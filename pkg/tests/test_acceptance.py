"""Exit criteria. Each test records one PASS/FAIL line shown in the terminal summary."""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from fedmesh import learner as L
from fedmesh.multigraph import Multigraph, all_weak_state, parse_states
from fedmesh.net_model import WeightedGraph, load_network
from fedmesh.overlay import build_ring, tour_cost, validate_overlay
from fedmesh.sim import ExperimentConfig, build_topology, run_experiment, write_run
from fedmesh.timing import undirected_delays

from conftest import ACCEPTANCE_LINES, FIXTURES
from oracles import exact_tsp_cost, random_metric

GAIA = str(FIXTURES / "gaia11.json")
HETERO11 = str(FIXTURES / "hetero11.json")
HETERO10 = str(FIXTURES / "hetero10.json")

TASK = L.TaskParams(dim=20, n_per_silo=200, skew=0.5, loss="least-squares", batch_size=16,
                    lr0=0.05, lr_decay=0.01)


@contextmanager
def criterion(number, title, budget_s):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.2f}s, budget {budget_s}s"
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"[FAIL] {number}. {title}: {exc}")
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    ACCEPTANCE_LINES.append(f"[PASS] {number}. {title} ({elapsed:.2f}s{', ' + extra if extra else ''})")


def test_1_all_strong_multigraph_equals_ring():
    with criterion(1, "t=1 multigraph == RING/DPASGD, 50 rounds, bitwise", 10) as info:
        cfg = ExperimentConfig(GAIA, "multigraph", t=1, rounds=50, task=TASK, seed=11)
        mg = run_experiment(cfg, keep_trajectory=True)
        ring = run_experiment(ExperimentConfig(GAIA, "ring", t=1, rounds=50, task=TASK, seed=11),
                              keep_trajectory=True)
        assert mg.network.n == 11
        assert len(mg.trajectory) == len(ring.trajectory) == 50 * (mg.network.local_updates + 1) + 1
        for a, b in zip(mg.trajectory, ring.trajectory):
            assert np.array_equal(a, b)
        assert [r.cycle_ms for r in mg.records] == [r.cycle_ms for r in ring.records]
        info["cycle_ms"] = round(mg.stats.mean, 4)


def test_2_all_weak_schedule_is_local_sgd():
    with criterion(2, "all-weak schedule == standalone local SGD, exact", 5) as info:
        net = load_network(GAIA)
        topo = build_topology(net, "ring")
        task = L.make_task(net.n, TASK, seed=5)
        u = net.local_updates
        state = all_weak_state(topo.overlay)
        models = np.zeros((net.n, task.dim))
        cache = L.ModelCache(topo.overlay, models)
        iterations = 50 * (u + 1)
        for k in range(iterations):
            models = L.dpasgd_pp_round(models, cache, state, task, k, u)
        # Oracle: plain minibatch SGD per silo, written out directly.
        for i in range(net.n):
            w = np.zeros(task.dim)
            for k in range(iterations):
                idx = task.batch_indices(i, k)
                X, y = task.X[i][idx], task.y[i][idx]
                w = w - task.lr(k) * (X.T @ (X @ w - y) / X.shape[0])
            assert np.array_equal(models[i], w), f"silo {i} diverged from local SGD"
        info["iterations"] = iterations


def test_3_schedule_invariants():
    with criterion(3, "schedule invariants on 200 random multiplicity sets", 5) as info:
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(3, 12))
            edges = [(i, (i + 1) % n) for i in range(n)]
            edges = [(min(a, b), max(a, b)) for a, b in edges]
            t = int(rng.integers(1, 6))
            mult = {e: int(rng.integers(1, t + 1)) for e in edges}
            sched = parse_states(Multigraph(n, mult, t))
            assert sched.s_max == math.lcm(*mult.values())
            assert all(sched.states[0].labels.values())
            for e, m in mult.items():
                assert sum(s.labels[e] for s in sched.states) == sched.s_max // m
        info["sets"] = 200


def test_4_christofides_bound():
    with criterion(4, "Christofides tour <= 1.5 x exact TSP, 100 instances N<=8", 30) as info:
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(3, 9))
            w = random_metric(n, rng)
            ring = build_ring(WeightedGraph.from_matrix(w))
            validate_overlay(ring)
            ratio = tour_cost(ring.tour, w) / exact_tsp_cost(w)
            assert ratio <= 1.5
            worst = max(worst, ratio)
        info["worst_ratio"] = round(worst, 4)


def _cycle_means(out_dir=None):
    net = load_network(HETERO11)
    topo = build_topology(net, "ring")
    d = undirected_delays(topo.static_delays)
    ratio = max(d.values()) / min(d.values())
    means = {}
    for kind, t in [("ring", 1), ("multigraph", 1), ("multigraph", 3), ("multigraph", 5)]:
        run = run_experiment(ExperimentConfig(HETERO11, kind, t=t, rounds=600, task=TASK, seed=1))
        means[(kind, t)] = run.stats.mean
        if out_dir is not None:
            write_run(run, out_dir)
    return net, ratio, means


def test_5_cycle_time_direction():
    with criterion(5, "multigraph(t=5) < RING and t=5 <= t=3 <= t=1, 600 rounds", 60) as info:
        net, ratio, means = _cycle_means()
        assert net.n == 11
        assert ratio >= 5
        assert means[("multigraph", 5)] < means[("ring", 1)]
        assert means[("multigraph", 5)] <= means[("multigraph", 3)] <= means[("multigraph", 1)]
        info["delay_ratio"] = round(ratio, 2)
        info["ring_ms"] = round(means[("ring", 1)], 3)
        info["t3_ms"] = round(means[("multigraph", 3)], 3)
        info["t5_ms"] = round(means[("multigraph", 5)], 3)


def test_6_convergence_preserved():
    with criterion(6, "DPASGD++ t=5 reaches optimum within 1e-3, matches RING within 1e-3", 60) as info:
        cfg = ExperimentConfig(HETERO10, "multigraph", t=5, rounds=1000, task=TASK, seed=3)
        mg = run_experiment(cfg)
        ring = run_experiment(ExperimentConfig(HETERO10, "ring", t=5, rounds=1000, task=TASK, seed=3))
        assert mg.network.n == 10 and TASK.dim == 20 and TASK.skew == 0.5
        assert any(s.isolated for s in mg.topology.schedule.states)
        gap = mg.final_loss - mg.optimum_loss
        assert 0 <= gap < 1e-3
        assert abs(mg.final_loss - ring.final_loss) < 1e-3
        info["gap"] = f"{gap:.2e}"
        info["vs_ring"] = f"{abs(mg.final_loss - ring.final_loss):.2e}"


@pytest.mark.parametrize("kind", L.LOSS_KINDS)
def test_7_gradient_finite_differences(kind):
    with criterion(7, f"analytic gradient == central differences ({kind}), 100 draws", 5) as info:
        rng = np.random.default_rng(7)
        task = L.make_task(4, L.TaskParams(dim=20, n_per_silo=64, loss=kind, batch_size=16), seed=7)
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            w = rng.normal(size=20)
            silo = int(rng.integers(4))
            idx = task.batch_indices(silo, int(rng.integers(10_000)))
            X, y = task.X[silo][idx], task.y[silo][idx]
            g = L.loss_gradient(w, X, y, kind)
            fd = np.empty(20)
            for m in range(20):
                e = np.zeros(20)
                e[m] = h
                fd[m] = (L.sample_losses(w + e, X, y, kind).mean()
                         - L.sample_losses(w - e, X, y, kind).mean()) / (2 * h)
            rel = np.linalg.norm(g - fd) / np.linalg.norm(g)
            assert rel <= 1e-6
            worst = max(worst, rel)
        info["worst_rel"] = f"{worst:.1e}"


def test_8_replay_determinism(tmp_path):
    with criterion(8, "criterion-5 runs replay to byte-identical result files", 120) as info:
        _cycle_means(tmp_path / "a")
        _cycle_means(tmp_path / "b")
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b and files_a
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
        info["files"] = len(files_a)
