"""Configuration loading and persistence.

Two files describe a world: a YAML config for the nested global blocks
(economy, climate, negotiation flag, training budget, seeds) and a CSV
region table with exactly the canonical columns ``region_id, xA_0, xK_0,
xL_0, xL_a, xdelta_A, xg_A, xl_g, xsigma_0`` plus optional per-region
damage overrides. Parsing is strict: unknown columns, missing columns,
non-numeric cells, and duplicate region ids are rejected with the row and
column named. Config -> serialize -> parse round-trips to the same config.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import asdict

import yaml

from .errors import ConfigError
from .params import (
    OPTIONAL_REGION_COLUMNS,
    REGION_TABLE_COLUMNS,
    ClimateParams,
    GlobalEconParams,
    RegionParams,
    SimConfig,
    TrainBudget,
    uniform_foreign_preferences,
)

CONFIG_SCHEMA = "climcoop_config/1"

_FIELD_BY_COLUMN = {
    "xA_0": "a0",
    "xK_0": "k0",
    "xL_0": "l0",
    "xL_a": "l_a",
    "xdelta_A": "delta_a",
    "xg_A": "g_a",
    "xl_g": "l_g",
    "xsigma_0": "sigma0",
}


def _parse_cell(raw, row_num, column):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"region table row {row_num}, column {column!r}: "
            f"non-numeric value {raw!r}"
        ) from None


def parse_region_rows(rows, source="<region table>"):
    """Validate and convert an iterable of dict rows to RegionParams."""
    regions = []
    seen_ids = set()
    for row_num, row in enumerate(rows):
        extra = set(row) - set(REGION_TABLE_COLUMNS) - set(OPTIONAL_REGION_COLUMNS)
        if extra:
            raise ConfigError(
                f"{source}: unknown column(s) {sorted(extra)} in row {row_num}"
            )
        missing = [c for c in REGION_TABLE_COLUMNS if row.get(c) in (None, "")]
        if missing:
            raise ConfigError(
                f"{source}: row {row_num} missing column(s) {missing}"
            )
        rid_raw = row["region_id"]
        try:
            region_id = int(float(rid_raw))
        except (TypeError, ValueError):
            raise ConfigError(
                f"{source}: row {row_num} has non-integer region_id {rid_raw!r}"
            ) from None
        if region_id in seen_ids:
            raise ConfigError(f"{source}: duplicate region_id {region_id}")
        seen_ids.add(region_id)

        kwargs = {"region_id": region_id}
        for column, fname in _FIELD_BY_COLUMN.items():
            kwargs[fname] = _parse_cell(row[column], row_num, column)
        for column in OPTIONAL_REGION_COLUMNS:
            if row.get(column) not in (None, ""):
                kwargs[column] = _parse_cell(row[column], row_num, column)
        region = RegionParams(**kwargs)
        region.validate()
        regions.append(region)
    if not regions:
        raise ConfigError(f"{source}: no region rows")
    return regions


def load_region_config(path):
    """Region table from a CSV file (strict schema, N >= 2)."""
    try:
        with open(path, newline="", encoding="ascii") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ConfigError(f"{path}: empty region table")
            regions = parse_region_rows(reader, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read region table {path}: {exc}") from exc
    if len(regions) < 2:
        raise ConfigError(f"{path}: a region table needs at least 2 regions")
    return regions


def save_region_config(regions, path):
    columns = list(REGION_TABLE_COLUMNS)
    overrides = any(
        (r.damage_a1, r.damage_a2, r.damage_a3)
        != (
            RegionParams.__dataclass_fields__["damage_a1"].default,
            RegionParams.__dataclass_fields__["damage_a2"].default,
            RegionParams.__dataclass_fields__["damage_a3"].default,
        )
        for r in regions
    )
    if overrides:
        columns += list(OPTIONAL_REGION_COLUMNS)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in regions:
            row = [
                r.region_id,
                repr(r.a0),
                repr(r.k0),
                repr(r.l0),
                repr(r.l_a),
                repr(r.delta_a),
                repr(r.g_a),
                repr(r.l_g),
                repr(r.sigma0),
            ]
            if overrides:
                row += [repr(r.damage_a1), repr(r.damage_a2), repr(r.damage_a3)]
            writer.writerow(row)


def load_packaged_regions():
    """The 27-region table shipped with the package."""
    ref = importlib.resources.files("climcoop").joinpath("data/regions_default.csv")
    with ref.open(newline="", encoding="ascii") as fh:
        return parse_region_rows(csv.DictReader(fh), source="packaged region table")


def synthetic_config(n_regions, negotiation_on=False):
    """A deterministic N-region world for scale tests and benchmarks.

    Cycles the packaged 27-region table with a small id-dependent scaling
    so rows are not exact duplicates.
    """
    base = load_packaged_regions()
    regions = []
    for i in range(n_regions):
        src = base[i % len(base)]
        wobble = 1.0 + 0.01 * ((i * 7919) % 13 - 6)  # +-6%, id-determined
        regions.append(
            RegionParams(
                region_id=i,
                a0=src.a0 * wobble,
                k0=src.k0 * wobble,
                l0=src.l0 * wobble,
                l_a=src.l_a * wobble,
                delta_a=src.delta_a,
                g_a=src.g_a,
                l_g=src.l_g,
                sigma0=src.sigma0,
            )
        )
    dom, forw = uniform_foreign_preferences(n_regions)
    cfg = SimConfig(
        econ=GlobalEconParams(dom_pref=dom, for_pref=forw),
        climate=ClimateParams(),
        regions=tuple(regions),
        negotiation_on=negotiation_on,
    )
    cfg.validate()
    return cfg


def config_to_dict(config):
    d = {
        "schema": CONFIG_SCHEMA,
        "econ": asdict(config.econ),
        "climate": asdict(config.climate),
        "negotiation_on": config.negotiation_on,
        "nego_quantize_levels": config.nego_quantize_levels,
        "budget": asdict(config.budget),
        "seeds": list(config.seeds),
        "regions": [asdict(r) for r in config.regions],
    }
    d["econ"]["for_pref"] = list(config.econ.for_pref)
    d["climate"]["carbon_transfer"] = [
        list(row) for row in config.climate.carbon_transfer
    ]
    d["climate"]["initial_masses"] = list(config.climate.initial_masses)
    return d


def config_from_dict(d, source="<config>"):
    if d.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(
            f"{source}: unsupported config schema {d.get('schema')!r}"
        )
    try:
        econ_d = dict(d["econ"])
        econ_d["for_pref"] = tuple(econ_d.get("for_pref", ()))
        climate_d = dict(d["climate"])
        climate_d["carbon_transfer"] = tuple(
            tuple(row) for row in climate_d["carbon_transfer"]
        )
        climate_d["initial_masses"] = tuple(climate_d["initial_masses"])
        regions = tuple(RegionParams(**r) for r in d["regions"])
        config = SimConfig(
            econ=GlobalEconParams(**econ_d),
            climate=ClimateParams(**climate_d),
            regions=regions,
            negotiation_on=bool(d.get("negotiation_on", False)),
            nego_quantize_levels=int(d.get("nego_quantize_levels", 0)),
            budget=TrainBudget(**d.get("budget", {})),
            seeds=tuple(int(s) for s in d.get("seeds", (1, 2, 3, 4, 5))),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: malformed config ({exc})") from exc
    config.validate()
    return config


def save_config(config, path):
    with open(path, "w", encoding="ascii") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=True)


def load_config(path, region_table=None):
    """Load a YAML config; ``region_table`` may point to an external CSV.

    The YAML may carry its regions inline (``regions`` list) or reference
    a CSV via ``region_table_path``; an explicit ``region_table`` argument
    wins over both.
    """
    try:
        with open(path, encoding="ascii") as fh:
            d = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    if region_table is not None:
        d = dict(d)
        d["regions"] = [asdict(r) for r in load_region_config(region_table)]
    elif "region_table_path" in d:
        d = dict(d)
        d["regions"] = [
            asdict(r) for r in load_region_config(d.pop("region_table_path"))
        ]
    if d.get("econ", {}).get("for_pref") in (None, [], ()):
        dom, forw = uniform_foreign_preferences(
            len(d["regions"]), d.get("econ", {}).get("dom_pref", 0.5)
        )
        d.setdefault("econ", {})["dom_pref"] = dom
        d["econ"]["for_pref"] = list(forw)
    return config_from_dict(d, source=str(path))
