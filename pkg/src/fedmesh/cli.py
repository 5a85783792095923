"""Command-line front end: ``fedmesh {inspect,run,compare,sweep,gen-network}``.

Exit codes: 0 success, 1 runtime or simulation failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import sim
from .net_model import NetworkError, dumps_network, load_network
from .netgen import PRESETS, generate_network, generate_preset
from .overlay import OverlayError

log = logging.getLogger("fedmesh")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW,HIGH, got {text!r}") from None
    return lo, hi


def _add_common(p: argparse.ArgumentParser, topology_default=None) -> None:
    p.add_argument("--config", help="experiment config file (JSON); flags below override it")
    p.add_argument("--network", help="network file (JSON)")
    p.add_argument("--topology", choices=sim.TOPOLOGIES, default=topology_default,
                   help="overlay kind; multigraph seeds from the ring")
    p.add_argument("--t", type=int, help="maximum parallel edges per silo pair (default 5)")
    p.add_argument("--rounds", type=int, help="communication rounds K (default 100)")
    p.add_argument("--seed", type=int, help="seed (fallback: $FEDMESH_SEED, then 0)")
    p.add_argument("--capacity-scenario",
                   help="as-file | homogeneous:<gbps> | orchestrator:<hub>:<gbps>")
    p.add_argument("--out", default="fedmesh-out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedmesh",
        description="Multigraph topology design and simulation for cross-silo federated learning.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print overlay, multiplicities and per-state isolated silos")
    _add_common(p, topology_default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("run", help="simulate one topology and write its result files")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several topologies on one network and tabulate them")
    _add_common(p)
    p.add_argument("--topologies", default="star,mst,ring,multigraph",
                   help="comma-separated topology kinds")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="run the multigraph for several values of t")
    _add_common(p)
    p.add_argument("--t-values", type=_int_list, default=[1, 2, 3, 4, 5],
                   help="comma-separated t values (default 1,2,3,4,5)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-network", help="write a synthetic network file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="silo/link counts of a known WAN")
    p.add_argument("--n", type=int, help="number of silos (ignored with --preset)")
    p.add_argument("--density", type=float, default=1.0, help="fraction of silo pairs linked")
    p.add_argument("--latency-range", type=_float_pair, default=(1.0, 20.0), metavar="LOW,HIGH")
    p.add_argument("--compute-range", type=_float_pair, default=(1.0, 2.0), metavar="LOW,HIGH")
    p.add_argument("--capacity-scenario", default="homogeneous:1",
                   help="homogeneous:<gbps> | orchestrator:<hub>:<gbps> (others at 1 Gbps)")
    p.add_argument("--model-size", type=float, default=4.62, help="model size in Mbit")
    p.add_argument("--local-updates", type=int, default=1)
    p.add_argument("--clusters", type=int, default=1, help="geographic clusters of silos")
    p.add_argument("--full-mesh", action="store_true",
                   help="emit every pair with its shortest-path latency over the sampled links")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output network file")
    p.set_defaults(func=cmd_gen_network)
    return parser


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FEDMESH_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise InputError(f"FEDMESH_SEED must be an integer, got {env!r}") from None


def resolve_config(args) -> sim.ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"{path}: file not found")
        try:
            cfg = sim.load_config(path)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: parse error: {exc.msg}") from None
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: {exc}") from None
    elif args.network:
        cfg = sim.ExperimentConfig(network=args.network)
    else:
        raise InputError("either --config or --network is required")
    overrides = {}
    if args.network:
        overrides["network"] = args.network
    if getattr(args, "topology", None):
        overrides["topology"] = args.topology
    for key in ("t", "rounds"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if args.capacity_scenario:
        overrides["capacity_scenario"] = args.capacity_scenario
    seed = _seed(args)
    if seed is not None:
        overrides["seed"] = seed
    try:
        return replace(cfg, **overrides)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(cfg: sim.ExperimentConfig):
    net = load_network(cfg.network)
    return sim.apply_capacity_scenario(net, cfg.capacity_scenario)


def cmd_inspect(args) -> int:
    cfg = resolve_config(args)
    kind = args.topology or "multigraph"
    net = _load(cfg)
    topo = sim.build_topology(net, kind, cfg.t)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"network: {net.name or cfg.network}  silos={net.n}  links={len(net.links)}")
    print(f"overlay ({topo.overlay.kind}): "
          + " ".join(f"{a}-{b}" for a, b in topo.overlay.sorted_edges()))
    if topo.overlay.metric_violation:
        print("warning: connectivity delays violate the triangle inequality")
    for (a, b), d in sorted(topo.static_delays.items()):
        log.info("delay %d->%d: %.4f ms", a, b, d)
    if topo.multigraph is not None:
        mult = topo.multigraph.multiplicity
        print(f"multiplicities (t={cfg.t}): "
              + " ".join(f"{a}-{b}:{m}" for (a, b), m in sorted(mult.items())))
    schedule = topo.schedule
    isolated_any = any(st.isolated for st in schedule.states)
    print(f"s_max={schedule.s_max}" + ("" if isolated_any else ", no isolated nodes"))
    for k, st in enumerate(schedule.states):
        iso = ",".join(map(str, sorted(st.isolated))) or "-"
        print(f"  state {k}: {st.label_string()}  isolated: {iso}")
    path = out / f"schedule-{kind}-t{cfg.t}.json"
    path.write_text(json.dumps(sim.schedule_doc(topo), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    print(f"schedule written to {path}")
    return EXIT_OK


def _summary_line(run: sim.TrainRun) -> str:
    return (f"{run.config.topology:<10} t={run.config.t:<3} mean_cycle_ms={run.stats.mean:.4f} "
            f"total_ms={run.stats.total:.2f} final_loss={run.final_loss:.6g}")


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    net = load_network(cfg.network)
    run = sim.run_experiment(cfg, net)
    d = sim.write_run(run, args.out)
    print(_summary_line(run))
    try:
        ring = run if cfg.topology == "ring" else sim.run_experiment(replace(cfg, topology="ring"), net)
        print(f"reduction_vs_ring={ring.stats.mean / run.stats.mean:.2f}")
    except OverlayError as exc:
        print(f"reduction_vs_ring=n/a ({exc})")
    if run.optimum_loss is not None:
        print(f"optimum_loss={run.optimum_loss:.6g}")
    print(f"results written to {d}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = resolve_config(args)
    kinds = [k.strip() for k in args.topologies.split(",") if k.strip()]
    try:
        configs = [replace(base, topology=k) for k in kinds]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    net = load_network(base.network)
    rows, runs = sim.compare_topologies(configs, net)
    out = Path(args.out)
    for run in runs:
        sim.write_run(run, out)
    table = sim.table_csv(rows)
    (out / f"comparison-{base.digest()}.csv").write_text(table, encoding="utf-8")
    print(f"{'topology':<10} {'t':>3} {'mean_cycle_ms':>14} {'total_ms':>12} {'final_loss':>12} {'vs_ring':>8}")
    for r in rows:
        print(f"{r.topology:<10} {r.t:>3} {r.mean_cycle_ms:>14.4f} {r.total_ms:>12.2f} "
              f"{r.final_loss:>12.6g} {r.reduction_vs_ring:>8.2f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    if any(t < 1 for t in args.t_values) or not args.t_values:
        raise InputError("t values must be integers >= 1")
    net = load_network(base.network)
    rows, runs = sim.sweep_t(base, args.t_values, net)
    out = Path(args.out)
    for run in runs:
        sim.write_run(run, out)
    (out / f"sweep-{base.digest()}.csv").write_text(sim.table_csv(rows), encoding="utf-8")
    print(f"{'t':>3} {'s_max':>6} {'mean_cycle_ms':>14} {'total_ms':>12} {'final_loss':>12}")
    for r in rows:
        print(f"{r['t']:>3} {r['s_max']:>6} {r['mean_cycle_ms']:>14.4f} {r['total_ms']:>12.2f} "
              f"{r['final_loss']:>12.6g}")
    return EXIT_OK


def cmd_gen_network(args) -> int:
    scenario = sim.parse_capacity_scenario(args.capacity_scenario)
    kwargs = dict(latency_range=args.latency_range, compute_range=args.compute_range,
                  model_size_mbit=args.model_size, local_updates=args.local_updates,
                  clusters=args.clusters, full_mesh=args.full_mesh, seed=_seed(args) or 0)
    if scenario[0] == "homogeneous":
        kwargs["capacity"] = scenario[1]
    elif scenario[0] == "orchestrator":
        kwargs["orchestrator"] = (scenario[1], scenario[2])
    if args.preset:
        net = generate_preset(args.preset, **kwargs)
    elif args.n is not None:
        net = generate_network(args.n, density=args.density, **kwargs)
    else:
        raise InputError("either --preset or --n is required")
    if scenario[0] == "orchestrator" and scenario[1] >= net.n:
        raise InputError(f"orchestrator hub {scenario[1]} is not a silo")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps_network(net), encoding="utf-8")
    print(f"wrote {out}: {net.name} silos={net.n} links={len(net.links)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except sim.SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
