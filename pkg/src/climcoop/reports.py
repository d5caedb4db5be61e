"""Result persistence and table emission.

Two interchangeable persistence formats: ``json`` (the structured record,
one document) and ``csv`` (delimited text: one row per leaf value, path
and value JSON-encoded). Both round-trip every field losslessly.
:func:`emit_tables` renders the familiar comparison tables — headline
numbers, per-region rewards/ranks/gains, action means, and the regional
deltas of the perturbation grid — as small CSVs for side-by-side reading;
those views are derived, not meant to round-trip.
"""

from __future__ import annotations

import csv
import json
import os

from .engine import EpisodeLog, LOG_REGION_FIELDS
from .errors import ConfigError
from .experiments import ACTION_FIELDS, ExperimentResult


def _flatten(value, prefix):
    if isinstance(value, dict):
        if not value:
            yield prefix + ["{}"], None
            return
        for k, v in value.items():
            yield from _flatten(v, prefix + [str(k)])
    elif isinstance(value, list):
        if not value:
            yield prefix + ["[]"], None
            return
        for i, v in enumerate(value):
            yield from _flatten(v, prefix + [i])
    else:
        yield prefix, value


def _unflatten(rows):
    root = None

    def ensure(container, seg, next_seg):
        if isinstance(seg, int):
            while len(container) <= seg:
                container.append(None)
            if container[seg] is None:
                container[seg] = [] if isinstance(next_seg, int) else {}
            return container[seg]
        if seg not in container or container[seg] is None:
            container[seg] = [] if isinstance(next_seg, int) else {}
        return container[seg]

    for path, value in rows:
        if path and path[-1] == "{}":
            path, value = path[:-1], {}
        elif path and path[-1] == "[]":
            path, value = path[:-1], []
        if root is None:
            root = [] if (path and isinstance(path[0], int)) else {}
        node = root
        for i, seg in enumerate(path[:-1]):
            node = ensure(node, seg, path[i + 1])
        last = path[-1]
        if isinstance(last, int):
            while len(node) <= last:
                node.append(None)
            node[last] = value
        else:
            node[last] = value
    return root if root is not None else {}


def write_report(result, fmt, path):
    """Persist an ExperimentResult as ``json`` or ``csv`` (lossless)."""
    if not result.cells:
        raise ConfigError("refusing to write an empty result")
    d = result.to_dict()
    if fmt == "json":
        with open(path, "w", encoding="ascii") as fh:
            json.dump(d, fh, sort_keys=True, indent=1)
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "value"])
            for segs, value in _flatten(d, []):
                writer.writerow([json.dumps(segs), json.dumps(value)])
    else:
        raise ConfigError(f"unknown report format {fmt!r} (json or csv)")


def read_report(path, fmt=None):
    """Load a persisted result; format inferred from the extension."""
    if fmt is None:
        fmt = "csv" if str(path).endswith(".csv") else "json"
    try:
        if fmt == "json":
            with open(path, encoding="ascii") as fh:
                d = json.load(fh)
        else:
            rows = []
            with open(path, newline="", encoding="ascii") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header != ["path", "value"]:
                    raise ConfigError(f"{path}: not a result csv")
                for segs, value in reader:
                    rows.append((json.loads(segs), json.loads(value)))
            d = _unflatten(rows)
    except OSError as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from exc
    return ExperimentResult.from_dict(d)


def _fmt(x, nd=1):
    return f"{x:.{nd}f}"


def emit_tables(result, outdir):
    """Write the comparison-table views for one result; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    if result.kind == "experiment1":
        written += _emit_experiment1_tables(result, outdir)
    elif result.kind == "experiment2":
        written += _emit_experiment2_tables(result, outdir)
    else:
        raise ConfigError(f"unknown result kind {result.kind!r}")
    return written


def _emit_experiment1_tables(result, outdir):
    no = result.cell("test-1-no-nego")
    ne = result.cell("test-1-nego")
    paths = []

    p = os.path.join(outdir, "table1_headline.csv")
    with open(p, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "test",
                "global_temperature_increase_mean",
                "global_temperature_increase_std",
                "collective_episode_reward_mean",
                "collective_episode_reward_std",
                "config_hash",
            ]
        )
        for cell in (no, ne):
            w.writerow(
                [
                    cell.test_id,
                    _fmt(cell.stats["temperature_increase"][0]),
                    _fmt(cell.stats["temperature_increase"][1]),
                    _fmt(cell.stats["collective_reward"][0]),
                    _fmt(cell.stats["collective_reward"][1]),
                    cell.config_hash,
                ]
            )
    paths.append(p)

    p = os.path.join(outdir, "table2_regional.csv")
    n = len(no.stats["u_i"][0])
    with open(p, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "region_id",
                "u_i_no_nego",
                "rank_no_nego",
                "u_i_nego",
                "rank_nego",
                "gain",
                "rank_delta",
            ]
        )
        for i in range(n):
            w.writerow(
                [
                    i,
                    _fmt(no.stats["u_i"][0][i]),
                    result.extras["rank_no_nego"][i],
                    _fmt(ne.stats["u_i"][0][i]),
                    result.extras["rank_nego"][i],
                    result.extras["gains_formatted"][i],
                    result.extras["rank_delta"][i],
                ]
            )
        w.writerow(
            [
                "u",
                _fmt(sum(no.stats["u_i"][0])),
                "",
                _fmt(sum(ne.stats["u_i"][0])),
                "",
                "",
                "",
            ]
        )
    paths.append(p)

    p = os.path.join(outdir, "table3_actions.csv")
    with open(p, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["action", "no_nego_mean", "no_nego_std", "nego_mean", "nego_std"]
        )
        for k, name in enumerate(ACTION_FIELDS):
            w.writerow(
                [
                    name,
                    _fmt(no.stats["action_means"][0][k], 3),
                    _fmt(no.stats["action_means"][1][k], 3),
                    _fmt(ne.stats["action_means"][0][k], 3),
                    _fmt(ne.stats["action_means"][1][k], 3),
                ]
            )
    paths.append(p)
    return paths


def _emit_experiment2_tables(result, outdir):
    paths = []
    p = os.path.join(outdir, "table4_regional_deltas.csv")
    with open(p, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "u_i_no_nego", "u_i_nego", "difference", "pooling"])
        summary = result.extras["regional_summary"]
        for letter in ("h", "m", "l", "a"):
            if letter not in summary:
                continue
            block = summary[letter]
            w.writerow(
                [
                    block["region"],
                    _fmt(block["pooled"]["u_no_nego"]),
                    _fmt(block["pooled"]["u_nego"]),
                    block["pooled"]["difference"],
                    "pooled over 9 LTCs",
                ]
            )
        for letter in ("h", "m", "l", "a"):
            if letter not in summary:
                continue
            block = summary[letter]
            for ltc_key, row in block["per_ltc"].items():
                w.writerow(
                    [
                        block["region"],
                        _fmt(row["u_no_nego"]),
                        _fmt(row["u_nego"]),
                        row["difference"],
                        ltc_key,
                    ]
                )
    paths.append(p)

    p = os.path.join(outdir, "grid_subtests.csv")
    with open(p, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "test_id",
                "subtest_id",
                "temperature_increase_mean",
                "temperature_increase_std",
                "collective_reward_mean",
                "collective_reward_std",
                "config_hash",
            ]
        )
        for cell in result.cells:
            w.writerow(
                [
                    cell.test_id,
                    cell.subtest_id,
                    _fmt(cell.stats["temperature_increase"][0], 3),
                    _fmt(cell.stats["temperature_increase"][1], 3),
                    _fmt(cell.stats["collective_reward"][0], 3),
                    _fmt(cell.stats["collective_reward"][1], 3),
                    cell.config_hash,
                ]
            )
    paths.append(p)
    return paths


def emit_episode_csv(log, path):
    """Plot-ready per-step data of one episode (wide, one row per
    step x region, globals repeated)."""
    if not isinstance(log, EpisodeLog):
        raise ConfigError("emit_episode_csv expects an EpisodeLog")
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["step", "region"]
            + list(LOG_REGION_FIELDS)
            + ["temp_atmosphere_pre", "temp_atmosphere_post", "emissions"]
        )
        for t in range(log.num_steps):
            for i in range(log.n_regions):
                w.writerow(
                    [t, i]
                    + [repr(float(log.region_series[k][t, i])) for k in LOG_REGION_FIELDS]
                    + [
                        repr(float(log.temp_atmosphere_pre[t])),
                        repr(float(log.temp_atmosphere_post[t])),
                        repr(float(log.emissions[t])),
                    ]
                )
