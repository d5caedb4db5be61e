"""Episode state and the step pipeline.

One step runs, in this fixed order: negotiation (when enabled) ->
policy actions -> floor masking -> trade clearing -> economy updates ->
emissions -> climate update -> rewards -> logging. Rewards are the
per-step utilities; damages use the temperature as it stood at the start
of the step (the climate update lands on the next step's damages).

``step`` is pure: it never mutates its inputs and returns a fresh
``WorldState``, so identical calls give identical outputs and episodes can
run concurrently without sharing anything. All randomness comes from named
streams keyed by (seed, episode, step, region, purpose); deterministic
policies consume none, which makes trajectories bit-reproducible across
runs and thread counts.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from . import climate as climate_mod
from . import econ
from .actions import ActionBatch
from .errors import ConfigError, InvalidStateError
from .negotiation import collect_proposals, compute_floors
from .params import RegionTable, config_hash
from .policy import (
    OBS_LENGTH,
    OBS_MEAN_ACTIONS,
    OBS_REGION_ID,
    OBS_FLOOR,
)
from .rng import RngContext

_E_TECH = float(np.exp(0.0033))  # baseline technology growth per step

# Per-(step, region) fields of the episode log, in storage order.
LOG_REGION_FIELDS = (
    "utility",
    "labor",
    "technology",
    "capital",
    "consumption",
    "savings",
    "mitigation",
    "export_cap",
    "import_bids_mean",
    "tariffs_mean",
    "floor",
)


@dataclass
class WorldState:
    """Full simulation state between steps (one instance per episode)."""

    config: object
    table: RegionTable
    seed: int
    episode: int
    step_index: int
    labor: np.ndarray
    technology: np.ndarray
    capital: np.ndarray
    sigma: np.ndarray
    consumption: np.ndarray
    step_utility: np.ndarray
    cumulative_utility: np.ndarray
    floors: np.ndarray
    last_action_means: np.ndarray  # (5,)
    last_emissions: float
    climate: climate_mod.ClimateState
    # precomputed at reset, shared across steps
    for_pref: np.ndarray = field(repr=False, default=None)
    carbon_transfer: np.ndarray = field(repr=False, default=None)
    region_index_col: np.ndarray = field(repr=False, default=None)
    capital_retention: float = field(repr=False, default=0.0)  # (1-delta_k)^Delta
    sigma_retention: float = field(repr=False, default=1.0)    # e^(-g_sigma*Delta)

    @property
    def n_regions(self):
        return self.labor.shape[0]


@dataclass(frozen=True)
class RegionState:
    """Single-region view of the time-varying economy (for inspection)."""

    labor: float
    technology: float
    capital: float
    sigma: float
    consumption: float
    step_utility: float
    cumulative_utility: float


def region_state(state, region_id):
    return RegionState(
        labor=float(state.labor[region_id]),
        technology=float(state.technology[region_id]),
        capital=float(state.capital[region_id]),
        sigma=float(state.sigma[region_id]),
        consumption=float(state.consumption[region_id]),
        step_utility=float(state.step_utility[region_id]),
        cumulative_utility=float(state.cumulative_utility[region_id]),
    )


def worldstate_equal(a, b):
    """Exact equality of two states (used by determinism checks)."""
    return (
        a.step_index == b.step_index
        and a.seed == b.seed
        and np.array_equal(a.labor, b.labor)
        and np.array_equal(a.technology, b.technology)
        and np.array_equal(a.capital, b.capital)
        and np.array_equal(a.sigma, b.sigma)
        and np.array_equal(a.consumption, b.consumption)
        and np.array_equal(a.cumulative_utility, b.cumulative_utility)
        and np.array_equal(a.floors, b.floors)
        and np.array_equal(a.climate.masses, b.climate.masses)
        and a.climate.temp_atmosphere == b.climate.temp_atmosphere
        and a.climate.temp_ocean == b.climate.temp_ocean
    )


def reset(config, seed, episode=0):
    """Initial state from the region table and configured climate."""
    config.validate()
    table = RegionTable.from_regions(config.regions)
    n = len(config.regions)
    return WorldState(
        config=config,
        table=table,
        seed=seed,
        episode=episode,
        step_index=0,
        labor=table.l0.copy(),
        technology=table.a0.copy(),
        capital=table.k0.copy(),
        sigma=table.sigma0.copy(),
        consumption=np.zeros(n),
        step_utility=np.zeros(n),
        cumulative_utility=np.zeros(n),
        floors=np.zeros(n),
        last_action_means=np.zeros(5),
        last_emissions=0.0,
        climate=climate_mod.initial_climate_state(config.climate),
        for_pref=np.asarray(config.econ.for_pref, dtype=np.float64),
        carbon_transfer=np.asarray(config.climate.carbon_transfer, dtype=np.float64),
        region_index_col=np.arange(n) / max(n - 1, 1),
        capital_retention=(1.0 - config.econ.delta_k) ** config.econ.delta_step,
        sigma_retention=float(np.exp(-config.econ.g_sigma * config.econ.delta_step)),
    )


def build_observations(state):
    """Observation matrix, one row per region (layout in ``policy``)."""
    n = state.n_regions
    econ_p = state.config.econ
    obs = np.empty((n, OBS_LENGTH))
    obs[:, 0] = state.step_index / econ_p.num_steps
    obs[:, 1] = state.climate.temp_atmosphere
    obs[:, 2] = state.climate.masses[0] / 1000.0
    obs[:, 3] = state.labor / 1000.0
    obs[:, 4] = state.technology / 10.0
    obs[:, 5] = state.capital / 10.0
    obs[:, 6] = state.sigma
    obs[:, 7] = state.floors
    obs[:, OBS_MEAN_ACTIONS] = state.last_action_means[np.newaxis, :]
    obs[:, OBS_REGION_ID] = (
        state.region_index_col
        if state.region_index_col is not None
        else np.arange(n) / max(n - 1, 1)
    )
    return obs


def build_observation(state, region_id):
    if not 0 <= region_id < state.n_regions:
        raise ConfigError(f"region_id {region_id} out of range")
    return build_observations(state)[region_id]


def with_floors(state, floors):
    """Copy of ``state`` with this step's negotiated mitigation floors."""
    out = copy.copy(state)
    out.floors = np.minimum(np.maximum(floors, 0.0), 1.0)
    return out


def _diagnose_nonfinite(step_idx, **arrays):
    for name, arr in arrays.items():
        a = np.atleast_1d(np.asarray(arr, dtype=np.float64))
        finite = np.isfinite(a)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise InvalidStateError(
                "non-finite value", step=step_idx, region=bad, field=name
            )
    raise InvalidStateError("non-finite value", step=step_idx)


def sanitize_actions(actions, floors):
    """Fresh, clamped, floor-masked copy of an action batch."""
    bids = np.maximum(actions.import_bids, 0.0)
    tariffs = np.minimum(np.maximum(actions.tariffs, 0.0), 1.0)
    np.fill_diagonal(bids, 0.0)
    np.fill_diagonal(tariffs, 0.0)
    mitigation = np.minimum(np.maximum(actions.mitigation, 0.0), 1.0)
    np.maximum(mitigation, floors, out=mitigation)
    return ActionBatch(
        savings=np.minimum(np.maximum(actions.savings, 0.0), 1.0),
        mitigation=mitigation,
        export_cap=np.maximum(actions.export_cap, 0.0),
        import_bids=bids,
        tariffs=tariffs,
    )


def step(state, actions):
    """Advance one step; returns ``(new_state, rewards)``.

    ``actions`` is an ActionBatch (or a sequence of per-region
    ActionVectors). Fractions are clamped at ingestion and the mitigation
    floor from ``state.floors`` is applied before anything else sees the
    actions.
    """
    if not isinstance(actions, ActionBatch):
        actions = ActionBatch.from_vectors(list(actions))
    if actions.n_regions != state.n_regions:
        raise ConfigError(
            f"got actions for {actions.n_regions} regions, "
            f"expected {state.n_regions}"
        )
    return _step_core(state, sanitize_actions(actions, state.floors))


def _step_core(state, acts):
    """The pipeline body; ``acts`` must already be clamped and masked."""
    cfg = state.config
    econ_p = cfg.econ
    table = state.table
    t = state.step_index
    if t >= econ_p.num_steps:
        raise InvalidStateError("episode already complete", step=t)
    n = state.n_regions

    # Economy: output under current damages and abatement spending.
    pop = state.labor / 1000.0
    prod = state.technology * state.capital**econ_p.gamma * pop ** (1.0 - econ_p.gamma)
    temp = state.climate.temp_atmosphere
    dmg = 1.0 / (1.0 + table.damage_a1 * temp + table.damage_a2 * temp**table.damage_a3)
    abat = np.minimum(
        (econ_p.backstop_price / (1000.0 * econ_p.theta2))
        * state.sigma
        * acts.mitigation**econ_p.theta2,
        1.0 - 1e-9,
    )
    y = dmg * (1.0 - abat) * prod

    # Trade: ration bids against each exporter's capacity, destroy tariffs.
    surplus = y * (1.0 - acts.savings)
    capacity = np.minimum(acts.export_cap, np.maximum(surplus, 0.0))
    demand = acts.import_bids.sum(axis=0)
    scale = np.where(
        demand > capacity, capacity / np.where(demand > 0.0, demand, 1.0), 1.0
    )
    shipments = acts.import_bids * scale[np.newaxis, :]  # [importer, exporter]
    exports_per_region = shipments.sum(axis=0)
    c_dom = np.maximum(0.0, y - acts.savings * y - exports_per_region)

    s = econ_p.sub_rate
    if n > 1:
        kept = shipments * (1.0 - acts.tariffs)
        foreign = (kept**s) @ state.for_pref
    else:
        foreign = 0.0
    consumption = (econ_p.dom_pref * c_dom**s + foreign) ** (1.0 / s)

    # Climate: regional emissions pool into the shared carbon cycle.
    step_emissions = float(
        (state.sigma * (1.0 - acts.mitigation) * prod).sum() * econ_p.delta_step
    )
    new_climate = _step_climate_fast(state, step_emissions, t, cfg.climate)

    # Rewards: utility of this step's consumption at this step's labor.
    base = consumption / pop + econ_p.epsilon
    rewards = pop * (base ** (1.0 - econ_p.alpha) - 1.0) / (1.0 - econ_p.alpha)

    # State advance (technology decay exponent uses the 0-based index,
    # i.e. the first update sees exponent zero).
    new_labor = state.labor * (
        ((1.0 + table.l_a) / (1.0 + state.labor)) ** table.l_g
    )
    growth = _E_TECH + table.g_a * np.exp(-table.delta_a * econ_p.delta_step * t)
    new_technology = growth * state.technology
    new_capital = state.capital_retention * state.capital + econ_p.delta_step * (
        acts.savings * y
    )
    new_sigma = state.sigma * state.sigma_retention

    # One fused finite check; NaN/Inf propagate through the sums. Rewards
    # inherit any economic blow-up (consumption, output, trade), so probing
    # them plus the advancing stocks and the climate covers the pipeline.
    probe = (
        float(rewards.sum())
        + float(new_labor.sum())
        + float(new_technology.sum())
        + float(new_capital.sum())
        + float(new_sigma.sum())
        + new_climate.temp_atmosphere
        + new_climate.temp_ocean
        + float(new_climate.masses.sum())
    )
    if not np.isfinite(probe):
        _diagnose_nonfinite(
            t,
            utility=rewards,
            consumption=consumption,
            gross_output=y,
            labor=new_labor,
            technology=new_technology,
            capital=new_capital,
            sigma=new_sigma,
            temp_atmosphere=new_climate.temp_atmosphere,
            carbon_masses=new_climate.masses,
        )

    denom = max(n - 1, 1)
    new_means = np.array(
        [
            acts.savings.sum() / n,
            acts.mitigation.sum() / n,
            acts.export_cap.sum() / n,
            acts.import_bids.sum() / (n * denom),
            acts.tariffs.sum() / (n * denom),
        ]
    )

    new_state = WorldState(
        config=cfg,
        table=table,
        seed=state.seed,
        episode=state.episode,
        step_index=t + 1,
        labor=new_labor,
        technology=new_technology,
        capital=new_capital,
        sigma=new_sigma,
        consumption=consumption,
        step_utility=rewards,
        cumulative_utility=state.cumulative_utility + rewards,
        floors=np.zeros(n),
        last_action_means=new_means,
        last_emissions=step_emissions,
        climate=new_climate,
        for_pref=state.for_pref,
        carbon_transfer=state.carbon_transfer,
        region_index_col=state.region_index_col,
        capital_retention=state.capital_retention,
        sigma_retention=state.sigma_retention,
    )
    return new_state, rewards


def _step_climate_fast(state, total_emissions, step_index, params):
    """Same update as :func:`climate.step_climate`, using the cached matrix."""
    import math

    masses = state.carbon_transfer @ state.climate.masses
    masses[0] += total_emissions
    forcing = params.f2x * math.log2(
        masses[0] / params.m_preindustrial
    ) + climate_mod.exogenous_forcing(step_index, params)
    lam = params.f2x / params.t2x
    t_atm = state.climate.temp_atmosphere
    t_oc = state.climate.temp_ocean
    return climate_mod.ClimateState(
        masses=masses,
        temp_atmosphere=float(
            t_atm + params.heat_c1 * (forcing - lam * t_atm - params.heat_c3 * (t_atm - t_oc))
        ),
        temp_ocean=float(t_oc + params.heat_c4 * (t_atm - t_oc)),
        cumulative_emissions=state.climate.cumulative_emissions + total_emissions,
    )


@dataclass
class EpisodeSummary:
    """What training and experiments need from one episode."""

    u_i: np.ndarray
    u: float
    temperature_increase: float
    action_means: np.ndarray  # (5,) savings, mitigation, export, bids, tariffs
    final_temp_atmosphere: float


@dataclass
class EpisodeLog:
    """Complete rectangular trace of one episode.

    ``region_series`` maps each ``LOG_REGION_FIELDS`` entry to a
    (num_steps, N) array; temperatures are logged both as seen by the step
    (pre, used for damages) and after its climate update (post).
    """

    schema: str
    config_hash: str
    seed: int
    negotiation_on: bool
    num_steps: int
    n_regions: int
    region_series: dict
    temp_atmosphere_pre: np.ndarray
    temp_atmosphere_post: np.ndarray
    emissions: np.ndarray
    u_i: np.ndarray
    u: float
    temperature_increase: float
    negotiation_trace: list = field(default_factory=list)

    def summary(self):
        means = np.array(
            [
                self.region_series["savings"].mean(),
                self.region_series["mitigation"].mean(),
                self.region_series["export_cap"].mean(),
                self.region_series["import_bids_mean"].mean(),
                self.region_series["tariffs_mean"].mean(),
            ]
        )
        return EpisodeSummary(
            u_i=self.u_i.copy(),
            u=self.u,
            temperature_increase=self.temperature_increase,
            action_means=means,
            final_temp_atmosphere=float(self.temp_atmosphere_post[-1]),
        )

    def to_dict(self):
        return {
            "schema": self.schema,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "negotiation_on": self.negotiation_on,
            "num_steps": self.num_steps,
            "n_regions": self.n_regions,
            "region_series": {
                k: v.tolist() for k, v in self.region_series.items()
            },
            "temp_atmosphere_pre": self.temp_atmosphere_pre.tolist(),
            "temp_atmosphere_post": self.temp_atmosphere_post.tolist(),
            "emissions": self.emissions.tolist(),
            "u_i": self.u_i.tolist(),
            "u": self.u,
            "temperature_increase": self.temperature_increase,
            "negotiation_trace": self.negotiation_trace,
        }

    def to_json(self, path=None):
        blob = json.dumps(self.to_dict(), sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="ascii") as fh:
                fh.write(blob)
        return blob

    @classmethod
    def from_dict(cls, d):
        return cls(
            schema=d["schema"],
            config_hash=d["config_hash"],
            seed=d["seed"],
            negotiation_on=d["negotiation_on"],
            num_steps=d["num_steps"],
            n_regions=d["n_regions"],
            region_series={
                k: np.asarray(v, dtype=np.float64)
                for k, v in d["region_series"].items()
            },
            temp_atmosphere_pre=np.asarray(d["temp_atmosphere_pre"]),
            temp_atmosphere_post=np.asarray(d["temp_atmosphere_post"]),
            emissions=np.asarray(d["emissions"]),
            u_i=np.asarray(d["u_i"]),
            u=d["u"],
            temperature_increase=d["temperature_increase"],
            negotiation_trace=d.get("negotiation_trace", []),
        )

    @classmethod
    def from_json(cls, blob_or_path):
        text = blob_or_path
        if "\n" not in text and text.strip()[:1] != "{":
            with open(blob_or_path, encoding="ascii") as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def logs_equal(a, b):
    """Bit-exact equality of two episode logs."""
    if (a.num_steps, a.n_regions, a.u, a.temperature_increase) != (
        b.num_steps,
        b.n_regions,
        b.u,
        b.temperature_increase,
    ):
        return False
    for k in LOG_REGION_FIELDS:
        if not np.array_equal(a.region_series[k], b.region_series[k]):
            return False
    return (
        np.array_equal(a.temp_atmosphere_pre, b.temp_atmosphere_pre)
        and np.array_equal(a.temp_atmosphere_post, b.temp_atmosphere_post)
        and np.array_equal(a.emissions, b.emissions)
        and np.array_equal(a.u_i, b.u_i)
    )


def episode_rewards(log):
    """Per-region episode rewards and the collective total from a log."""
    return econ.episode_rewards(log.region_series["utility"], log.num_steps)


def temperature_increase(log):
    """End-of-episode warming relative to the episode start."""
    if log.temp_atmosphere_post.shape[0] != log.num_steps:
        raise InvalidStateError("incomplete episode log")
    return float(log.temp_atmosphere_post[-1] - log.temp_atmosphere_pre[0])


def run_episode(
    config,
    policy,
    seed,
    nego_on=None,
    episode=0,
    collect_log=True,
    collect_nego=False,
    step_callback=None,
):
    """Play one full episode under ``policy``.

    ``nego_on`` overrides the config flag when given. With
    ``collect_log=False`` only an :class:`EpisodeSummary` is produced
    (used in training loops where log assembly would dominate).
    ``step_callback(t, state, acts, rewards)`` streams per-step records.
    """
    nego = config.negotiation_on if nego_on is None else bool(nego_on)
    state = reset(config, seed, episode=episode)
    econ_p = config.econ
    n = state.n_regions
    t_steps = econ_p.num_steps

    if collect_log:
        series = {k: np.empty((t_steps, n)) for k in LOG_REGION_FIELDS}
        temp_pre = np.empty(t_steps)
        temp_post = np.empty(t_steps)
        emis = np.empty(t_steps)
        nego_trace = []
    initial_temp = state.climate.temp_atmosphere
    action_sums = np.zeros(5)

    rng_ctx = RngContext(seed, episode=episode)
    denom = max(n - 1, 1)

    for t in range(t_steps):
        rng_ctx.step = t
        obs = build_observations(state)

        if nego:
            promises, requests = collect_proposals(
                policy, obs, rng_ctx, config.nego_quantize_levels
            )
            # Diagonal acceptances are harmless: self-proposals are zeroed,
            # so they can only bind a floor of 0.
            acceptances = policy.evaluate_batch(obs, promises, requests, rng_ctx)
            floors = compute_floors(promises, requests, acceptances)
            state = with_floors(state, floors)
            obs[:, OBS_FLOOR] = floors
            if collect_log and collect_nego:
                nego_trace.append(
                    {
                        "step": t,
                        "promises": promises.tolist(),
                        "requests": requests.tolist(),
                        "acceptances": acceptances.tolist(),
                        "floors": floors.tolist(),
                    }
                )

        acts = sanitize_actions(policy.act_batch(obs, rng_ctx), state.floors)
        before = state
        state, rewards = _step_core(state, acts)

        action_sums += state.last_action_means
        if collect_log:
            # Rows record the stocks as used by step t; consumption and
            # utility are the step's results.
            series["utility"][t] = rewards
            series["labor"][t] = before.labor
            series["technology"][t] = before.technology
            series["capital"][t] = before.capital
            series["consumption"][t] = state.consumption
            series["savings"][t] = acts.savings
            series["mitigation"][t] = acts.mitigation
            series["export_cap"][t] = acts.export_cap
            series["import_bids_mean"][t] = acts.import_bids.sum(axis=1) / denom
            series["tariffs_mean"][t] = acts.tariffs.sum(axis=1) / denom
            series["floor"][t] = before.floors
            temp_pre[t] = before.climate.temp_atmosphere
            temp_post[t] = state.climate.temp_atmosphere
            emis[t] = state.last_emissions
        if step_callback is not None:
            step_callback(t, state, acts, rewards, before.floors)

    u_i = state.cumulative_utility.copy()
    u = float(u_i.sum())
    warming = float(state.climate.temp_atmosphere - initial_temp)

    if not collect_log:
        return EpisodeSummary(
            u_i=u_i,
            u=u,
            temperature_increase=warming,
            action_means=action_sums / t_steps,
            final_temp_atmosphere=float(state.climate.temp_atmosphere),
        )

    return EpisodeLog(
        schema="episode_log/1",
        config_hash=config_hash(config),
        seed=seed,
        negotiation_on=nego,
        num_steps=t_steps,
        n_regions=n,
        region_series=series,
        temp_atmosphere_pre=temp_pre,
        temp_atmosphere_post=temp_post,
        emissions=emis,
        u_i=u_i,
        u=u,
        temperature_increase=warming,
        negotiation_trace=nego_trace,
    )
