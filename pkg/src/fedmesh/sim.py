"""Experiment runs: bind a network, an overlay or multigraph schedule, the delay ledger and a learner."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import learner as L
from .multigraph import Multigraph, StateSchedule, construct_multigraph, parse_states, static_schedule
from .net_model import NetworkSpec, connectivity_graph, load_network
from .overlay import OverlayGraph, build_overlay
from .timing import CycleStats, DelayLedger, mean_cycle_time, overlay_delays, undirected_delays

TOPOLOGIES = ("star", "mst", "ring", "multigraph")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    network: str
    topology: str = "multigraph"
    t: int = 5
    rounds: int = 100
    task: L.TaskParams = field(default_factory=L.TaskParams)
    seed: int = 0
    capacity_scenario: str = "as-file"
    local_updates: int | None = None

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ValueError("rounds must be an integer >= 1")
        if not isinstance(self.t, int) or self.t < 1:
            raise ValueError("t must be an integer >= 1")
        if self.local_updates is not None and self.local_updates < 1:
            raise ValueError("local_updates must be >= 1")
        parse_capacity_scenario(self.capacity_scenario)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        doc = dict(doc)
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config field(s) {sorted(unknown)}")
        task = doc.pop("task", {}) or {}
        bad = set(task) - set(L.TaskParams.__dataclass_fields__)
        if bad:
            raise ValueError(f"unknown task field(s) {sorted(bad)}")
        if base_dir is not None and "network" in doc and not Path(doc["network"]).is_absolute():
            doc["network"] = str(Path(base_dir) / doc["network"])
        return cls(task=L.TaskParams(**task), **doc)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return ExperimentConfig.from_dict(doc, base_dir=path.parent)


def parse_capacity_scenario(text: str):
    """``as-file`` | ``homogeneous:<c>`` | ``orchestrator:<hub>:<c>`` -> tuple."""
    parts = text.split(":")
    try:
        if parts == ["as-file"]:
            return ("as-file",)
        if parts[0] == "homogeneous" and len(parts) == 2:
            c = float(parts[1])
            if c > 0:
                return ("homogeneous", c)
        if parts[0] == "orchestrator" and len(parts) == 3:
            hub, c = int(parts[1]), float(parts[2])
            if hub >= 0 and c > 0:
                return ("orchestrator", hub, c)
    except ValueError:
        pass
    raise ValueError(
        f"bad capacity scenario {text!r}; expected as-file, homogeneous:<c> or orchestrator:<hub>:<c>"
    )


def apply_capacity_scenario(spec: NetworkSpec, scenario: str) -> NetworkSpec:
    kind = parse_capacity_scenario(scenario)
    if kind[0] == "homogeneous":
        return spec.with_capacities({s.id: (kind[1], kind[1]) for s in spec.silos})
    if kind[0] == "orchestrator":
        hub, c = kind[1], kind[2]
        if hub >= spec.n:
            raise ValueError(f"orchestrator hub {hub} is not a silo of {spec.name or 'the network'}")
        return spec.with_capacities({hub: (c, c)})
    return spec


@dataclass(frozen=True)
class Topology:
    overlay: OverlayGraph
    schedule: StateSchedule
    multigraph: Multigraph | None
    static_delays: dict


def build_topology(spec: NetworkSpec, kind: str, t: int = 1) -> Topology:
    """Overlay and state schedule for a topology kind; ``multigraph`` seeds from the ring."""
    conn = connectivity_graph(spec)
    overlay = build_overlay(conn, "ring" if kind == "multigraph" else kind)
    delays = overlay_delays(spec, overlay.edges)
    if kind == "multigraph":
        mg = construct_multigraph(overlay, undirected_delays(delays), t)
        return Topology(overlay, parse_states(mg), mg, delays)
    return Topology(overlay, static_schedule(overlay), None, delays)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    state_index: int
    n_isolated: int
    cycle_ms: float
    global_loss: float
    consensus_loss: float
    loss_min: float
    loss_median: float
    loss_max: float


@dataclass
class TrainRun:
    config: ExperimentConfig
    network: NetworkSpec
    topology: Topology
    records: list[RoundRecord]
    stats: CycleStats
    final_models: np.ndarray
    optimum_loss: float | None = None
    trajectory: list[np.ndarray] | None = None

    @property
    def total_ms(self) -> float:
        return self.stats.total

    @property
    def mean_cycle_ms(self) -> float:
        return self.stats.mean

    @property
    def final_loss(self) -> float:
        return self.records[-1].consensus_loss

    @property
    def models_digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.final_models).tobytes()).hexdigest()

    def summary(self) -> dict:
        return {
            "topology": self.config.topology,
            "t": self.config.t,
            "rounds": len(self.records),
            "s_max": self.topology.schedule.s_max,
            "mean_cycle_ms": self.stats.mean,
            "total_ms": self.stats.total,
            "final_global_loss": self.records[-1].global_loss,
            "final_consensus_loss": self.records[-1].consensus_loss,
            "optimum_loss": self.optimum_loss,
            "models_sha256": self.models_digest,
        }


def run_experiment(config: ExperimentConfig, network: NetworkSpec | None = None,
                   keep_trajectory: bool = False) -> TrainRun:
    """Execute ``config.rounds`` communication rounds, cycling schedule states in order.

    Each communication round is ``u + 1`` learner iterations: one aggregation
    iteration using that round's state, then ``u`` local steps.
    """
    spec = network if network is not None else load_network(config.network)
    if config.local_updates is not None:
        spec = replace(spec, local_updates=config.local_updates)
    spec = apply_capacity_scenario(spec, config.capacity_scenario)
    u = spec.local_updates
    topo = build_topology(spec, config.topology, config.t)
    task = L.make_task(spec.n, config.task, seed=config.seed)
    ledger = DelayLedger(spec, topo.static_delays)
    models = np.zeros((spec.n, task.dim))
    cache = L.ModelCache(topo.overlay, models) if config.topology == "multigraph" else None
    records = []
    trajectory = [models.copy()] if keep_trajectory else None
    for c in range(config.rounds):
        state_index = c % topo.schedule.s_max
        state = topo.schedule.states[state_index]
        try:
            cycle = ledger.advance(state)
            for k in range(c * (u + 1), (c + 1) * (u + 1)):
                if cache is None:
                    models = L.dpasgd_round(models, topo.overlay, task, k, u)
                else:
                    models = L.dpasgd_pp_round(models, cache, state, task, k, u)
                if trajectory is not None:
                    trajectory.append(models.copy())
        except (L.LearnerError, ValueError, RuntimeError) as exc:
            raise SimulationError(f"round {c}: {exc}") from exc
        per_silo = L.silo_losses(models, task)
        records.append(RoundRecord(
            round=c,
            state_index=state_index,
            n_isolated=len(state.isolated),
            cycle_ms=cycle,
            global_loss=float(task.p @ per_silo),
            consensus_loss=L.consensus_loss(models, task),
            loss_min=float(per_silo.min()),
            loss_median=float(np.median(per_silo)),
            loss_max=float(per_silo.max()),
        ))
    optimum = None
    if task.loss == "least-squares":
        optimum = L.objective(task.optimum(), task)
    return TrainRun(config, spec, topo, records, mean_cycle_time(ledger.cycle_times),
                    models, optimum, trajectory)


ROUND_FIELDS = [f for f in RoundRecord.__dataclass_fields__]


def rounds_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROUND_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in ROUND_FIELDS])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def run_dir_name(config: ExperimentConfig) -> str:
    return f"{config.topology}-t{config.t}-{config.digest()}"


def write_run(run: TrainRun, out_dir) -> Path:
    """Write config echo, per-round CSV, summary and schedule into a per-config directory."""
    d = Path(out_dir) / run_dir_name(run.config)
    d.mkdir(parents=True, exist_ok=True)
    _dump_json(d / "config.json", run.config.to_dict())
    (d / "rounds.csv").write_text(rounds_csv(run.records), encoding="utf-8")
    _dump_json(d / "summary.json", run.summary())
    _dump_json(d / "schedule.json", schedule_doc(run.topology))
    return d


def schedule_doc(topo: Topology) -> dict:
    doc = {
        "overlay": {"kind": topo.overlay.kind, "edges": [list(e) for e in topo.overlay.sorted_edges()]},
        "multiplicity": None,
    }
    if topo.multigraph is not None:
        doc["multiplicity"] = [[a, b, m] for (a, b), m in sorted(topo.multigraph.multiplicity.items())]
        doc["t"] = topo.multigraph.t_max
    doc.update(topo.schedule.to_dict())
    return doc


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ComparisonRow:
    topology: str
    t: int
    mean_cycle_ms: float
    total_ms: float
    final_loss: float
    reduction_vs_ring: float


def _same_setup(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    return (Path(a.network).resolve() == Path(b.network).resolve() and a.task == b.task
            and a.seed == b.seed and a.rounds == b.rounds
            and a.capacity_scenario == b.capacity_scenario and a.local_updates == b.local_updates)


def compare_topologies(configs, network: NetworkSpec | None = None):
    """Run each config; report cycle time, total time, final loss and ring/this cycle ratio."""
    configs = list(configs)
    if len(configs) < 2:
        raise SimulationError("comparison needs at least two configs")
    for c in configs[1:]:
        if not _same_setup(configs[0], c):
            raise SimulationError("configs in a comparison must share network, task, seed and rounds")
    runs = [run_experiment(c, network) for c in configs]
    ring = next((r for r in runs if r.config.topology == "ring"), None)
    if ring is None:
        ring = run_experiment(replace(configs[0], topology="ring"), network)
    rows = [
        ComparisonRow(r.config.topology, r.config.t, r.stats.mean, r.stats.total, r.final_loss,
                      ring.stats.mean / r.stats.mean)
        for r in runs
    ]
    return rows, runs


def sweep_t(base: ExperimentConfig, t_values, network: NetworkSpec | None = None):
    """One multigraph run per ``t`` with a shared seed."""
    rows, runs = [], []
    for t in t_values:
        run = run_experiment(replace(base, topology="multigraph", t=int(t)), network)
        runs.append(run)
        rows.append({"t": int(t), "s_max": run.topology.schedule.s_max,
                     "mean_cycle_ms": run.stats.mean, "total_ms": run.stats.total,
                     "final_loss": run.final_loss})
    return rows, runs


def table_csv(rows) -> str:
    rows = [asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r) for r in rows]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()
