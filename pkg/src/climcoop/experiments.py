"""Experiment harness: negotiation on/off and the perturbation grid.

Experiment 1 trains one policy per (mode, seed) from scratch and compares
negotiation on vs off: warming, collective reward, per-region rewards,
ranks, gains, and the five action means. Experiment 2 repeats the
comparison across a 3x3 grid of labor/technology-growth perturbations
applied either to every region or to a single high-, mid-, or low-ranked
region — 8 tests of 9 subtests each. Every (test, subtest) cell carries
its own config hash, seeds, and per-seed records so any aggregate is
traceable to its inputs; assembly is keyed, so worker scheduling cannot
change results.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .cem import train_cem
from .engine import run_episode
from .errors import ConfigError
from .params import config_hash
from .policy import LinearPolicy

RESULT_SCHEMA = "experiment_result/1"

# Perturbation grid applied to long-term population and technology growth.
LTC_DELTAS = (-0.10, 0.0, 0.10)
LTC_GRID = tuple(itertools.product(LTC_DELTAS, LTC_DELTAS))

# Single-region targets: a high-, mid-, and low-ranked region.
EXP2_TARGETS = (("a", None), ("h", 15), ("m", 19), ("l", 6))

ACTION_FIELDS = ("savings", "mitigation", "export_cap", "import_bids", "tariffs")


@dataclass(frozen=True)
class LTC:
    """One labor/technology configuration: relative changes of l_a and g_a."""

    labor_delta: float
    tech_delta: float

    def __post_init__(self):
        if (self.labor_delta, self.tech_delta) not in LTC_GRID:
            raise ConfigError(
                f"LTC {(self.labor_delta, self.tech_delta)} outside the declared grid"
            )

    @property
    def key(self):
        return f"ltc({self.labor_delta:+.2f},{self.tech_delta:+.2f})"


def apply_ltc(region_params, ltc):
    """Scale long-term population and technology growth, leave the rest."""
    return replace(
        region_params,
        l_a=region_params.l_a * (1.0 + ltc.labor_delta),
        g_a=region_params.g_a * (1.0 + ltc.tech_delta),
    )


def apply_ltc_config(config, ltc, target_region=None):
    """Config with the LTC applied to one region (or all when None)."""
    regions = tuple(
        apply_ltc(r, ltc) if target_region is None or r.region_id == target_region
        else r
        for r in config.regions
    )
    return replace(config, regions=regions)


def rank_regions(u_i):
    """Descending ranks (0 = highest reward), ties to the lower region id."""
    u = np.asarray(u_i, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise ConfigError("cannot rank non-finite rewards")
    n = u.shape[0]
    order = np.lexsort((np.arange(n), -u))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    return ranks


def gain_ratio(u_nego, u_no_nego):
    """Reward ratio negotiation/no-negotiation; None when undefined."""
    if u_no_nego == 0:
        return None
    return u_nego / u_no_nego


def format_gain(ratio):
    """Two-decimal table formatting of a gain (truncated toward zero).

    The reference tables truncate rather than round: 2.8/3.6 prints as
    0.77. ``None`` (undefined ratio) prints as ``n/a``.
    """
    if ratio is None:
        return "n/a"
    return f"{math.trunc(ratio * 100) / 100:.2f}"


def format_percent_diff(value, baseline):
    """Signed whole-percent difference column, e.g. ``-14%``."""
    if baseline == 0:
        return "n/a"
    return f"{round(100.0 * (value - baseline) / baseline):+d}%"


def aggregate_stats(samples):
    """Mean and population standard deviation (divisor n)."""
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.size == 0:
        raise ConfigError("cannot aggregate an empty sample")
    return float(arr.mean()), float(arr.std())


def spearman_rank_correlation(ranks_a, ranks_b):
    """Spearman rho between two rank permutations."""
    a = np.asarray(ranks_a, dtype=np.float64)
    b = np.asarray(ranks_b, dtype=np.float64)
    n = a.shape[0]
    if n < 2:
        return 1.0
    d2 = float(((a - b) ** 2).sum())
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0))


@dataclass
class SeedRecord:
    """One trained-and-evaluated run."""

    seed: int
    temperature_increase: float
    collective_reward: float
    u_i: list
    ranks: list
    action_means: list  # savings, mitigation, export_cap, bids, tariffs
    best_fitness: float
    train_episodes: int

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class CellResult:
    """One (test, subtest) cell with its per-seed records and aggregates."""

    test_id: str
    subtest_id: str
    nego_on: bool
    ltc: tuple  # (labor_delta, tech_delta) or ()
    target_region: object  # region id or None
    config_hash: str
    seed_records: list
    stats: dict  # metric -> [mean, std] (lists for vector metrics)
    ranks_of_mean: list

    def to_dict(self):
        d = dict(self.__dict__)
        d["seed_records"] = [r.to_dict() for r in self.seed_records]
        d["ltc"] = list(self.ltc)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["seed_records"] = [SeedRecord.from_dict(r) for r in d["seed_records"]]
        d["ltc"] = tuple(d["ltc"])
        return cls(**d)


@dataclass
class ExperimentResult:
    """Full output of one experiment run (lossless, serializable)."""

    schema: str
    kind: str
    seeds: list
    budget: dict
    build_id: str
    base_config_hash: str
    wall_time_seconds: float
    episode_count: int
    cells: list
    extras: dict = field(default_factory=dict)

    def cell(self, test_id, subtest_id=None):
        for c in self.cells:
            if c.test_id == test_id and (
                subtest_id is None or c.subtest_id == subtest_id
            ):
                return c
        raise KeyError((test_id, subtest_id))

    def to_dict(self):
        d = dict(self.__dict__)
        d["cells"] = [c.to_dict() for c in self.cells]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("schema") != RESULT_SCHEMA:
            raise ConfigError(f"unsupported result schema {d.get('schema')!r}")
        d["cells"] = [CellResult.from_dict(c) for c in d["cells"]]
        return cls(**d)


def _train_and_eval(config, nego_on, seed, budget):
    """Train from scratch for one seed, then evaluate the best policy."""
    template = LinearPolicy(config.n_regions)
    result = train_cem(
        config,
        template,
        iterations=budget.iterations,
        population=budget.population,
        elite_fraction=budget.elite_fraction,
        seed=seed,
        nego_on=nego_on,
    )
    summary = run_episode(
        config, result.policy, seed, nego_on=nego_on, collect_log=False
    )
    u_i = summary.u_i
    return SeedRecord(
        seed=int(seed),
        temperature_increase=float(summary.temperature_increase),
        collective_reward=float(summary.u),
        u_i=[float(v) for v in u_i],
        ranks=[int(r) for r in rank_regions(u_i)],
        action_means=[float(v) for v in summary.action_means],
        best_fitness=float(result.best_fitness)
        if np.isfinite(result.best_fitness)
        else float("nan"),
        train_episodes=result.episodes_run,
    )


def _aggregate_cell(test_id, subtest_id, nego_on, ltc, target, cfg_hash, records):
    n = len(records[0].u_i)
    u_matrix = np.array([r.u_i for r in records])          # (seeds, N)
    rank_matrix = np.array([r.ranks for r in records])     # (seeds, N)
    act_matrix = np.array([r.action_means for r in records])
    temp = np.array([r.temperature_increase for r in records])
    coll = np.array([r.collective_reward for r in records])
    stats = {
        "temperature_increase": [float(temp.mean()), float(temp.std())],
        "collective_reward": [float(coll.mean()), float(coll.std())],
        "u_i": [u_matrix.mean(axis=0).tolist(), u_matrix.std(axis=0).tolist()],
        "rank": [
            rank_matrix.mean(axis=0).tolist(),
            rank_matrix.std(axis=0).tolist(),
        ],
        "action_means": [
            act_matrix.mean(axis=0).tolist(),
            act_matrix.std(axis=0).tolist(),
        ],
    }
    return CellResult(
        test_id=test_id,
        subtest_id=subtest_id,
        nego_on=nego_on,
        ltc=ltc,
        target_region=target,
        config_hash=cfg_hash,
        seed_records=list(records),
        stats=stats,
        ranks_of_mean=[int(r) for r in rank_regions(u_matrix.mean(axis=0))],
    )


def _run_cells(cell_specs, seeds, budget, workers):
    """Evaluate all (cell, seed) tasks; assembly is keyed, order-free."""
    tasks = [
        (idx, seed, cfg, nego)
        for idx, (_, _, nego, _, _, cfg) in enumerate(cell_specs)
        for seed in seeds
    ]

    def run_task(task):
        idx, seed, cfg, nego = task
        return (idx, seed), _train_and_eval(cfg, nego, seed, budget)

    results = {}
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, rec in pool.map(run_task, tasks):
                results[key] = rec
    else:
        for task in tasks:
            key, rec = run_task(task)
            results[key] = rec

    cells = []
    for idx, (test_id, subtest_id, nego, ltc, target, cfg) in enumerate(cell_specs):
        records = [results[(idx, seed)] for seed in seeds]
        cells.append(
            _aggregate_cell(
                test_id, subtest_id, nego, ltc, target, config_hash(cfg), records
            )
        )
    return cells


def run_experiment1(config, seeds=None, budget=None, workers=1):
    """Negotiation off vs on under the base configuration."""
    seeds = tuple(seeds if seeds is not None else config.seeds)
    budget = budget if budget is not None else config.budget
    if not seeds:
        raise ConfigError("at least one seed required")
    started = time.perf_counter()

    cell_specs = [
        ("test-1-no-nego", "base", False, (), None, config.with_negotiation(False)),
        ("test-1-nego", "base", True, (), None, config.with_negotiation(True)),
    ]
    cells = _run_cells(cell_specs, seeds, budget, workers)
    no_nego, nego = cells

    mean_u_no = np.array(no_nego.stats["u_i"][0])
    mean_u_ne = np.array(nego.stats["u_i"][0])
    gains = [gain_ratio(mean_u_ne[i], mean_u_no[i]) for i in range(len(mean_u_no))]
    extras = {
        "gains": [g if g is not None else None for g in gains],
        "gains_formatted": [format_gain(g) for g in gains],
        "rank_no_nego": no_nego.ranks_of_mean,
        "rank_nego": nego.ranks_of_mean,
        "rank_delta": [
            nego.ranks_of_mean[i] - no_nego.ranks_of_mean[i]
            for i in range(len(mean_u_no))
        ],
        "spearman_rank_correlation": spearman_rank_correlation(
            no_nego.ranks_of_mean, nego.ranks_of_mean
        ),
        "action_fields": list(ACTION_FIELDS),
    }
    episode_count = sum(
        r.train_episodes + 1 for c in cells for r in c.seed_records
    )
    return ExperimentResult(
        schema=RESULT_SCHEMA,
        kind="experiment1",
        seeds=list(seeds),
        budget={
            "iterations": budget.iterations,
            "population": budget.population,
            "elite_fraction": budget.elite_fraction,
        },
        build_id=f"climcoop-{__version__}",
        base_config_hash=config_hash(config.with_negotiation(False)),
        wall_time_seconds=time.perf_counter() - started,
        episode_count=episode_count,
        cells=cells,
        extras=extras,
    )


def exp2_cell_config(config, target_region, ltc, nego_on):
    """The exact config a single experiment-2 cell runs."""
    return apply_ltc_config(
        config.with_negotiation(nego_on), ltc, target_region=target_region
    )


def run_experiment2(config, seeds=None, budget=None, workers=1, targets=None):
    """The 8-test x 9-subtest perturbation grid.

    ``targets`` overrides the (letter, region) map for small test worlds;
    the default targets the full grid of the 27-region configuration.
    """
    seeds = tuple(seeds if seeds is not None else config.seeds)
    budget = budget if budget is not None else config.budget
    targets = tuple(targets if targets is not None else EXP2_TARGETS)
    for _, region in targets:
        if region is not None and region >= config.n_regions:
            raise ConfigError(f"target region {region} outside the region table")
    started = time.perf_counter()

    cell_specs = []
    for nego in (False, True):
        mode = "nego" if nego else "no-nego"
        for letter, region in targets:
            test_id = f"test-2-{letter}-{mode}"
            for labor_delta, tech_delta in LTC_GRID:
                ltc = LTC(labor_delta, tech_delta)
                cfg = exp2_cell_config(config, region, ltc, nego)
                cell_specs.append(
                    (test_id, ltc.key, nego, (labor_delta, tech_delta), region, cfg)
                )

    cells = _run_cells(cell_specs, seeds, budget, workers)

    expected = 2 * len(targets) * len(LTC_GRID)
    if len(cells) != expected:
        raise ConfigError(
            f"experiment-2 grid incomplete: {len(cells)} cells, expected {expected}"
        )

    extras = {"tests": sorted({c.test_id for c in cells}), "regional_summary": {}}
    # Per-target summary in the style of the published deltas table:
    # ("all" rows report the regional average) — both the per-LTC values
    # and the pool over the nine LTCs are labeled explicitly.
    for letter, region in targets:
        no_cells = [c for c in cells if c.test_id == f"test-2-{letter}-no-nego"]
        ne_cells = [c for c in cells if c.test_id == f"test-2-{letter}-nego"]

        def cell_value(c):
            mean_u = c.stats["u_i"][0]
            if region is None:
                return float(np.mean(mean_u))
            return float(mean_u[region])

        pooled_no = float(np.mean([cell_value(c) for c in no_cells]))
        pooled_ne = float(np.mean([cell_value(c) for c in ne_cells]))
        extras["regional_summary"][letter] = {
            "region": region if region is not None else "all",
            "pooled": {
                "u_no_nego": pooled_no,
                "u_nego": pooled_ne,
                "difference": format_percent_diff(pooled_ne, pooled_no),
            },
            "per_ltc": {
                c.subtest_id: {
                    "u_no_nego": cell_value(c),
                    "u_nego": cell_value(n),
                    "difference": format_percent_diff(cell_value(n), cell_value(c)),
                }
                for c, n in zip(no_cells, ne_cells)
            },
        }

    episode_count = sum(
        r.train_episodes + 1 for c in cells for r in c.seed_records
    )
    return ExperimentResult(
        schema=RESULT_SCHEMA,
        kind="experiment2",
        seeds=list(seeds),
        budget={
            "iterations": budget.iterations,
            "population": budget.population,
            "elite_fraction": budget.elite_fraction,
        },
        build_id=f"climcoop-{__version__}",
        base_config_hash=config_hash(config.with_negotiation(False)),
        wall_time_seconds=time.perf_counter() - started,
        episode_count=episode_count,
        cells=cells,
        extras=extras,
    )
