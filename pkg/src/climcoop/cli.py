"""Command-line entry point.

Subcommands: ``run`` (one episode under a scripted or stored policy),
``train`` (policy search), ``exp1``/``exp2`` (the experiment harness),
``report`` (comparison tables / plot data from stored results), ``bench``
(episode timing). Exit codes: 0 success, 1 validation error, 2
runtime/numeric error. ``--verbose`` streams one structured record per
step to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .config_io import load_config, load_region_config, save_config
from .engine import EpisodeLog, run_episode
from .errors import ClimcoopError, ConfigError, InvalidStateError
from .cem import train_cem
from .experiments import run_experiment1, run_experiment2
from .params import TrainBudget, default_config, config_hash
from .policy import (
    FixedPolicy,
    LinearPolicy,
    RandomPolicy,
    ZeroPolicy,
    load_policy,
    save_policy,
)
from .reports import emit_episode_csv, emit_tables, read_report, write_report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="climcoop", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML config (default: packaged 27 regions)")
        p.add_argument("--regions", help="region table CSV overriding the config")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--nego", choices=["on", "off"], help="override config flag")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("run", help="play one episode")
    add_common(p)
    p.add_argument(
        "--policy",
        default="zero",
        help="zero | random | fixed | path to a stored policy record",
    )
    p.add_argument("--savings", type=float, default=0.0, help="fixed policy savings")
    p.add_argument("--mitigation", type=float, default=0.0, help="fixed policy mu")
    p.add_argument("--export-cap", type=float, default=0.0)
    p.add_argument("--bid", type=float, default=0.0)
    p.add_argument("--tariff", type=float, default=0.0)
    p.add_argument("--verbose", action="store_true", help="stream per-step records")
    p.add_argument("--nego-trace", action="store_true", help="log negotiation state")

    p = sub.add_parser("train", help="cross-entropy policy search")
    add_common(p)
    p.add_argument("--iters", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--elite", type=float)

    for name in ("exp1", "exp2"):
        p = sub.add_parser(name, help=f"run experiment {name[-1]}")
        add_common(p)
        p.add_argument("--seeds", help="comma-separated, e.g. 1,2,3,4,5")
        p.add_argument("--iters", type=int)
        p.add_argument("--pop", type=int)
        p.add_argument("--elite", type=float)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("report", help="emit tables or plot data")
    p.add_argument("--result", help="stored experiment result (json or csv)")
    p.add_argument("--episode", help="stored episode log (json)")
    p.add_argument("--outdir", default="tables")
    p.add_argument("--out", help="output path for --episode data")

    p = sub.add_parser("bench", help="episode wall-time benchmark")
    p.add_argument("--regions-list", default="27,200")
    p.add_argument("--repeat", type=int, default=30)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("init-config", help="write the default config to a file")
    p.add_argument("--out", required=True)
    return parser


def _load_cfg(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config, region_table=getattr(args, "regions", None))
    elif getattr(args, "regions", None):
        from .params import GlobalEconParams, ClimateParams, SimConfig
        from .params import uniform_foreign_preferences

        regions = tuple(load_region_config(args.regions))
        dom, forw = uniform_foreign_preferences(len(regions))
        cfg = SimConfig(
            econ=GlobalEconParams(dom_pref=dom, for_pref=forw),
            climate=ClimateParams(),
            regions=regions,
        )
    else:
        cfg = default_config()
    if getattr(args, "nego", None):
        cfg = cfg.with_negotiation(args.nego == "on")
    cfg.validate()
    return cfg


def _budget(args, cfg):
    b = cfg.budget
    return TrainBudget(
        iterations=args.iters if args.iters is not None else b.iterations,
        population=args.pop if args.pop is not None else b.population,
        elite_fraction=args.elite if args.elite is not None else b.elite_fraction,
    )


def _make_policy(args, cfg):
    n = cfg.n_regions
    name = args.policy
    if name == "zero":
        return ZeroPolicy(n)
    if name == "random":
        return RandomPolicy(n)
    if name == "fixed":
        return FixedPolicy(
            n,
            savings=args.savings,
            mitigation=args.mitigation,
            export_cap=args.export_cap,
            bid=args.bid,
            tariff=args.tariff,
        )
    policy = load_policy(name)
    if policy.n_regions != n:
        raise ConfigError(
            f"stored policy is for {policy.n_regions} regions, config has {n}"
        )
    return policy


def _cmd_run(args):
    cfg = _load_cfg(args)
    policy = _make_policy(args, cfg)

    callback = None
    if args.verbose:
        def callback(t, state, acts, rewards, floors):
            record = {
                "step": t,
                "temp_atmosphere": state.climate.temp_atmosphere,
                "emissions": state.last_emissions,
                "rewards": [float(r) for r in rewards],
                "mitigation": acts.mitigation.tolist(),
                "savings": acts.savings.tolist(),
                "floors": floors.tolist(),
            }
            sys.stdout.write(json.dumps(record) + "\n")

    log = run_episode(
        cfg,
        policy,
        args.seed,
        collect_nego=args.nego_trace,
        step_callback=callback,
    )
    out = args.out or "episode_log.json"
    log.to_json(out)
    print(
        f"episode complete: u={log.u:.3f} "
        f"temperature_increase={log.temperature_increase:.3f} -> {out}"
    )
    return 0


def _cmd_train(args):
    cfg = _load_cfg(args)
    budget = _budget(args, cfg)
    result = train_cem(
        cfg,
        LinearPolicy(cfg.n_regions),
        iterations=budget.iterations,
        population=budget.population,
        elite_fraction=budget.elite_fraction,
        seed=args.seed,
    )
    out = args.out or "policy.json"
    save_policy(result.policy, out)
    print(
        f"trained {budget.iterations}x{budget.population}: "
        f"best mean regional reward {result.best_fitness:.4f} -> {out}"
    )
    return 0


def _cmd_experiment(args, which):
    cfg = _load_cfg(args)
    budget = _budget(args, cfg)
    seeds = (
        tuple(int(s) for s in args.seeds.split(",")) if args.seeds else cfg.seeds
    )
    runner = run_experiment1 if which == 1 else run_experiment2
    result = runner(cfg, seeds=seeds, budget=budget, workers=args.workers)
    out = args.out or f"experiment{which}.{args.format}"
    write_report(result, args.format, out)
    print(
        f"experiment {which}: {len(result.cells)} cells, "
        f"{result.episode_count} episodes, "
        f"{result.wall_time_seconds:.1f}s -> {out}"
    )
    return 0


def _cmd_report(args):
    if args.result:
        result = read_report(args.result)
        paths = emit_tables(result, args.outdir)
        print("\n".join(paths))
        return 0
    if args.episode:
        log = EpisodeLog.from_json(args.episode)
        out = args.out or "episode_data.csv"
        emit_episode_csv(log, out)
        print(out)
        return 0
    raise ConfigError("report needs --result or --episode")


def _bench_config(n):
    from .config_io import synthetic_config

    if n <= 27:
        return default_config(n_regions=n)
    return synthetic_config(n)


def bench_measurements(sizes=(27, 200), repeat=30, seed=1):
    """Episode wall times (ms) per region count and negotiation mode.

    Full episodes including log assembly, scripted trading policy,
    single-threaded; one warm-up run per configuration.
    """
    results = {}
    for n in sizes:
        cfg = _bench_config(n)
        policy = FixedPolicy(
            cfg.n_regions, savings=0.1, mitigation=0.1, export_cap=1.0,
            bid=0.01, tariff=0.05,
        )
        for nego in (False, True):
            run_episode(cfg, policy, seed, nego_on=nego)  # warm-up
            times = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                run_episode(cfg, policy, seed, nego_on=nego)
                times.append(time.perf_counter() - t0)
            times = np.array(times)
            key = f"{n}_regions_{'nego' if nego else 'no_nego'}"
            results[key] = {
                "n_regions": n,
                "negotiation_on": nego,
                "repeats": repeat,
                "min_ms": float(times.min() * 1e3),
                "median_ms": float(np.median(times) * 1e3),
                "mean_ms": float(times.mean() * 1e3),
            }
    return results


def _cmd_bench(args):
    sizes = [int(s) for s in args.regions_list.split(",")]
    results = bench_measurements(sizes=sizes, repeat=args.repeat, seed=args.seed)
    for key, row in results.items():
        print(
            f"{key}: min {row['min_ms']:.3f} ms, "
            f"median {row['median_ms']:.3f} ms over {row['repeats']} runs"
        )
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump({"schema": "bench/1", "results": results}, fh, indent=2)
    return 0


def _cmd_init_config(args):
    cfg = default_config()
    save_config(cfg, args.out)
    print(f"{args.out} (config hash {config_hash(cfg)})")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "exp1":
            return _cmd_experiment(args, 1)
        if args.command == "exp2":
            return _cmd_experiment(args, 2)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "init-config":
            return _cmd_init_config(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidStateError, ClimcoopError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
