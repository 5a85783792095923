"""Decentralized periodic-averaging SGD and its multigraph-aware variant on a synthetic task.

Models are held as an ``(N, d)`` float array, one row per silo. Iteration
``k`` aggregates when ``k % (u + 1) == 0`` and takes one local minibatch
step otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .multigraph import GraphState
from .overlay import OverlayGraph

LOSS_KINDS = ("least-squares", "logistic")


class LearnerError(RuntimeError):
    pass


@dataclass(frozen=True)
class LearningRate:
    """``lr0 / (1 + decay * k) ** power``."""

    lr0: float = 0.05
    decay: float = 0.0
    power: float = 1.0

    def __call__(self, k: int) -> float:
        return self.lr0 / (1.0 + self.decay * k) ** self.power


@dataclass(frozen=True)
class TaskParams:
    dim: int = 20
    n_per_silo: int = 200
    skew: float = 0.5
    loss: str = "least-squares"
    batch_size: int = 16
    lr0: float = 0.05
    lr_decay: float = 0.0
    lr_power: float = 1.0
    noise: float = 0.1


@dataclass
class SyntheticTask:
    X: list[np.ndarray]
    y: list[np.ndarray]
    loss: str = "least-squares"
    batch_size: int = 1
    lr: LearningRate = field(default_factory=LearningRate)
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise LearnerError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")
        if len(self.X) != len(self.y) or not self.X:
            raise LearnerError("need one (X, y) pair per silo")
        for i, (X, y) in enumerate(zip(self.X, self.y)):
            if X.ndim != 2 or y.shape != (X.shape[0],):
                raise LearnerError(f"silo {i}: X must be (n, d) and y (n,)")
            if not 1 <= self.batch_size <= X.shape[0]:
                raise LearnerError(f"silo {i}: need n_i >= batch_size >= 1")
        sizes = np.array([X.shape[0] for X in self.X], dtype=float)
        self.p = sizes / sizes.sum()

    @property
    def n_silos(self) -> int:
        return len(self.X)

    @property
    def dim(self) -> int:
        return self.X[0].shape[1]

    def batch_indices(self, silo: int, k: int) -> np.ndarray:
        n = self.X[silo].shape[0]
        if self.batch_size == n:
            return np.arange(n)
        rng = np.random.default_rng([self.seed, silo, k])
        return np.sort(rng.choice(n, size=self.batch_size, replace=False))

    def optimum(self) -> np.ndarray:
        """Minimizer of the ``p``-weighted objective; closed form for least squares only."""
        if self.loss != "least-squares":
            raise LearnerError("closed-form optimum exists only for least squares")
        X = np.vstack(self.X)
        y = np.concatenate(self.y)
        return np.linalg.solve(X.T @ X, X.T @ y)


def sample_losses(w, X, y, kind: str) -> np.ndarray:
    z = X @ w
    if kind == "least-squares":
        return 0.5 * (z - y) ** 2
    return np.logaddexp(0.0, z) - y * z


def loss_gradient(w, X, y, kind: str) -> np.ndarray:
    """Gradient of the mean per-sample loss over the rows of ``X``."""
    z = X @ w
    if kind == "least-squares":
        r = z - y
    else:
        r = 0.5 * (1.0 + np.tanh(0.5 * z)) - y
    return X.T @ r / X.shape[0]


def make_task(n_silos: int, params: TaskParams = TaskParams(), seed: int = 0) -> SyntheticTask:
    """Non-IID regression/classification data.

    Each silo's ground-truth vector is a shared vector plus a perturbation
    scaled by ``skew``; its features are shifted by a ``skew``-scaled mean.
    """
    rng = np.random.default_rng([seed, 0x5EED])
    d = params.dim
    w_global = rng.normal(size=d) / np.sqrt(d)
    X, y = [], []
    for _ in range(n_silos):
        w_i = w_global + params.skew * rng.normal(size=d) / np.sqrt(d)
        shift = params.skew * rng.normal(size=d)
        Xi = rng.normal(size=(params.n_per_silo, d)) + shift
        z = Xi @ w_i
        if params.loss == "least-squares":
            yi = z + params.noise * rng.normal(size=params.n_per_silo)
        else:
            yi = (rng.random(params.n_per_silo) < 1.0 / (1.0 + np.exp(-z))).astype(float)
        X.append(Xi)
        y.append(yi)
    lr = LearningRate(params.lr0, params.lr_decay, params.lr_power)
    return SyntheticTask(X, y, params.loss, params.batch_size, lr, seed)


def local_sgd_step(w: np.ndarray, task: SyntheticTask, silo: int, k: int) -> np.ndarray:
    idx = task.batch_indices(silo, k)
    g = loss_gradient(w, task.X[silo][idx], task.y[silo][idx], task.loss)
    if not np.all(np.isfinite(g)):
        raise LearnerError(f"non-finite gradient at silo {silo}, iteration {k}")
    return w - task.lr(k) * g


def average(vectors) -> np.ndarray:
    """Uniform average, summed in the given order so results are bit-reproducible."""
    acc = np.array(vectors[0], dtype=float, copy=True)
    for v in vectors[1:]:
        acc += v
    return acc / len(vectors)


def is_aggregation(k: int, u: int) -> bool:
    return k % (u + 1) == 0


def dpasgd_round(models: np.ndarray, overlay: OverlayGraph, task: SyntheticTask, k: int,
                 u: int) -> np.ndarray:
    """One DPASGD iteration over all silos."""
    out = np.empty_like(models)
    if is_aggregation(k, u):
        for i in range(len(models)):
            members = sorted(overlay.neighbors(i) + [i])
            out[i] = average([models[j] for j in members])
    else:
        for i in range(len(models)):
            out[i] = local_sgd_step(models[i], task, i, k)
    return out


class ModelCache:
    """Last model of ``j`` received by ``i`` over a strong connection, per directed edge ``(j, i)``."""

    def __init__(self, overlay: OverlayGraph, models: np.ndarray, round_index: int = 0):
        self.entries: dict[tuple[int, int], tuple[np.ndarray, int]] = {}
        for a, b in overlay.sorted_edges():
            self.entries[(a, b)] = (models[a].copy(), round_index)
            self.entries[(b, a)] = (models[b].copy(), round_index)

    def refresh(self, state: GraphState, models: np.ndarray, round_index: int) -> None:
        for (j, i) in self.entries:
            if state[(j, i)]:
                self.entries[(j, i)] = (models[j].copy(), round_index)

    def get(self, j: int, i: int) -> np.ndarray:
        try:
            return self.entries[(j, i)][0]
        except KeyError:
            raise LearnerError(f"model cache miss for edge {j} -> {i}") from None

    def staleness(self, j: int, i: int, round_index: int) -> int:
        """Rounds since ``j``'s model last reached ``i`` over a strong edge."""
        return round_index - self.entries[(j, i)][1]


def dpasgd_pp_round(models: np.ndarray, cache: ModelCache, state: GraphState,
                    task: SyntheticTask, k: int, u: int) -> np.ndarray:
    """One DPASGD++ iteration.

    On aggregation iterations a silo with at least one strong in-neighbour
    averages itself with those neighbours' models; an isolated silo takes a
    local step instead of waiting. Weak edges leave cache entries stale.
    """
    out = np.empty_like(models)
    if not is_aggregation(k, u):
        for i in range(len(models)):
            out[i] = local_sgd_step(models[i], task, i, k)
        return out
    cache.refresh(state, models, k // (u + 1))
    for i in range(len(models)):
        strong = state.strong_neighbors(i)
        if not strong:
            out[i] = local_sgd_step(models[i], task, i, k)
            continue
        members = sorted(strong + [i])
        out[i] = average([models[i] if j == i else cache.get(j, i) for j in members])
    return out


def consensus_weights(state: GraphState) -> np.ndarray:
    """Row-stochastic mixing matrix of a state: uniform over self and strong in-neighbours."""
    A = np.zeros((state.n, state.n))
    for i in range(state.n):
        members = state.strong_neighbors(i) + [i]
        A[i, members] = 1.0 / len(members)
    return A


def silo_losses(models: np.ndarray, task: SyntheticTask) -> np.ndarray:
    return np.array([
        sample_losses(models[i], task.X[i], task.y[i], task.loss).mean()
        for i in range(task.n_silos)
    ])


def global_loss(models: np.ndarray, task: SyntheticTask) -> float:
    """``sum_i p_i * mean loss of w_i on silo i``."""
    return float(task.p @ silo_losses(models, task))


def consensus_loss(models: np.ndarray, task: SyntheticTask) -> float:
    """Global objective evaluated at the average model."""
    w_bar = models.mean(axis=0)
    return global_loss(np.tile(w_bar, (task.n_silos, 1)), task)


def objective(w: np.ndarray, task: SyntheticTask) -> float:
    return global_loss(np.tile(w, (task.n_silos, 1)), task)
