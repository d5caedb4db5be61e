"""The environment handle: one in-flight episode per handle."""

from __future__ import annotations

import numpy as np
import yaml

import climcoop
from climcoop import ActionBatch, EpisodeLog
from climcoop.config_io import config_from_dict, load_config
from climcoop.engine import (
    LOG_REGION_FIELDS,
    build_observations,
    reset as engine_reset,
    sanitize_actions,
    step as engine_step,
    with_floors,
)
from climcoop.negotiation import compute_floors, quantize_fractions
from climcoop.params import config_hash


class EnvClosedError(RuntimeError):
    """Operation on a closed handle."""


class EnvUsageError(ValueError):
    """Malformed actions, wrong region set, or stepping outside an episode."""


def version():
    """Binding and engine versions, e.g. ``climcoop-env 0.1.0 (climcoop 0.1.0)``."""
    from . import __version__

    return f"climcoop-env {__version__} (climcoop {climcoop.__version__})"


def make_env(config=None, config_path=None, config_text=None, seed=0, nego_on=None):
    """Build a handle from a SimConfig, a YAML file path, or inline YAML."""
    sources = [s for s in (config, config_path, config_text) if s is not None]
    if len(sources) != 1:
        raise EnvUsageError(
            "provide exactly one of config, config_path, config_text"
        )
    if config_path is not None:
        config = load_config(config_path)
    elif config_text is not None:
        config = config_from_dict(yaml.safe_load(config_text), source="<inline>")
    if nego_on is not None:
        config = config.with_negotiation(bool(nego_on))
    return EnvHandle(config, seed)


class EnvHandle:
    """Owns one engine world; episodes are driven externally step by step."""

    def __init__(self, config, seed=0):
        config.validate()
        self._config = config
        self._seed = int(seed)
        self._episode = -1
        self._state = None
        self._closed = False
        self._done = False
        self._recorder = None
        self._log = None

    # -- lifecycle -----------------------------------------------------

    def _check_open(self):
        if self._closed:
            raise EnvClosedError("handle is closed")

    def close(self):
        self._closed = True
        self._state = None

    @property
    def n_regions(self):
        return self._config.n_regions

    @property
    def num_steps(self):
        return self._config.econ.num_steps

    @property
    def negotiation_on(self):
        return self._config.negotiation_on

    def reset(self, seed=None):
        """Start a new episode; returns the per-region observation map."""
        self._check_open()
        if seed is not None:
            self._seed = int(seed)
        self._episode += 1
        self._state = engine_reset(self._config, self._seed, episode=self._episode)
        self._done = False
        self._log = None
        self._recorder = _Recorder(self._config, self._seed)
        return self._obs_map()

    def _obs_map(self):
        obs = build_observations(self._state)
        return {i: obs[i].copy() for i in range(self.n_regions)}

    # -- actions -------------------------------------------------------

    def _parse_region_action(self, region_id, value):
        n = self.n_regions
        if isinstance(value, dict):
            try:
                savings = float(value["savings"])
                mitigation = float(value["mitigation"])
                export_cap = float(value["export_cap"])
                bids = np.asarray(value["bids"], dtype=np.float64)
                tariffs = np.asarray(value["tariffs"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise EnvUsageError(
                    f"region {region_id}: malformed action dict ({exc})"
                ) from None
        else:
            arr = np.asarray(value, dtype=np.float64).ravel()
            if arr.shape[0] != 3 + 2 * n:
                raise EnvUsageError(
                    f"region {region_id}: action array must have length "
                    f"{3 + 2 * n}, got {arr.shape[0]}"
                )
            savings, mitigation, export_cap = arr[0], arr[1], arr[2]
            bids = arr[3 : 3 + n]
            tariffs = arr[3 + n :]
        if bids.shape != (n,) or tariffs.shape != (n,):
            raise EnvUsageError(
                f"region {region_id}: bids and tariffs must have length {n}"
            )
        return savings, mitigation, export_cap, bids, tariffs

    def _parse_negotiation(self, actions):
        n = self.n_regions
        promises = np.zeros((n, n))
        requests = np.zeros((n, n))
        accepts = np.zeros((n, n), dtype=bool)
        for i, value in actions.items():
            if not isinstance(value, dict):
                continue
            if "promise" in value:
                row = np.asarray(value["promise"], dtype=np.float64)
                if row.shape != (n,):
                    raise EnvUsageError(f"region {i}: promise must have length {n}")
                promises[i] = row
            if "request" in value:
                row = np.asarray(value["request"], dtype=np.float64)
                if row.shape != (n,):
                    raise EnvUsageError(f"region {i}: request must have length {n}")
                requests[i] = row
            if "accept" in value:
                row = np.asarray(value["accept"])
                if row.shape != (n,):
                    raise EnvUsageError(f"region {i}: accept must have length {n}")
                accepts[:, i] = row.astype(bool)
        levels = self._config.nego_quantize_levels
        promises = np.minimum(np.maximum(promises, 0.0), 1.0)
        requests = np.minimum(np.maximum(requests, 0.0), 1.0)
        if levels:
            promises = quantize_fractions(promises, levels)
            requests = quantize_fractions(requests, levels)
        np.fill_diagonal(promises, 0.0)
        np.fill_diagonal(requests, 0.0)
        return promises, requests, accepts

    def step(self, actions):
        """Advance one step.

        ``actions`` maps every region id to its action (array or dict; see
        the package docstring). Returns ``(observations, rewards, done,
        info)``; ``done`` fires exactly when the configured number of
        steps has been played.
        """
        self._check_open()
        n = self.n_regions
        if self._state is None:
            raise EnvUsageError("reset() must be called before step()")
        if self._done:
            raise EnvUsageError("episode is done; call reset()")
        if set(actions.keys()) != set(range(n)):
            raise EnvUsageError(
                f"actions must cover exactly regions 0..{n - 1}, "
                f"got {sorted(actions.keys())}"
            )

        batch = ActionBatch.zeros(n)
        for i in range(n):
            sv, mit, cap, bids, tariffs = self._parse_region_action(i, actions[i])
            batch.savings[i] = sv
            batch.mitigation[i] = mit
            batch.export_cap[i] = cap
            batch.import_bids[i] = bids
            batch.tariffs[i] = tariffs

        state = self._state
        if self._config.negotiation_on:
            promises, requests, accepts = self._parse_negotiation(actions)
            floors = compute_floors(promises, requests, accepts)
            state = with_floors(state, floors)

        executed = sanitize_actions(batch, state.floors)
        before = state
        new_state, rewards = engine_step(state, batch)
        self._recorder.record(before, new_state, executed, rewards)
        self._state = new_state
        self._done = new_state.step_index >= self.num_steps
        if self._done:
            self._log = self._recorder.finalize(
                new_state, self._config.negotiation_on
            )

        info = {
            "step": new_state.step_index - 1,
            "temp_atmosphere": new_state.climate.temp_atmosphere,
            "emissions": new_state.last_emissions,
        }
        return (
            self._obs_map(),
            {i: float(rewards[i]) for i in range(n)},
            self._done,
            info,
        )

    def episode_log(self):
        """The completed episode's native-format log (after done)."""
        self._check_open()
        if self._log is None:
            raise EnvUsageError("episode_log() is only available once done")
        return self._log


class _Recorder:
    """Assembles an EpisodeLog exactly the way the native runner does."""

    def __init__(self, config, seed):
        self.config = config
        self.seed = seed
        n = config.n_regions
        t = config.econ.num_steps
        self.series = {k: np.empty((t, n)) for k in LOG_REGION_FIELDS}
        self.temp_pre = np.empty(t)
        self.temp_post = np.empty(t)
        self.emissions = np.empty(t)
        self.denom = max(n - 1, 1)

    def record(self, before, state, acts, rewards):
        t = before.step_index
        self.series["utility"][t] = rewards
        self.series["labor"][t] = before.labor
        self.series["technology"][t] = before.technology
        self.series["capital"][t] = before.capital
        self.series["consumption"][t] = state.consumption
        self.series["savings"][t] = acts.savings
        self.series["mitigation"][t] = acts.mitigation
        self.series["export_cap"][t] = acts.export_cap
        self.series["import_bids_mean"][t] = acts.import_bids.sum(axis=1) / self.denom
        self.series["tariffs_mean"][t] = acts.tariffs.sum(axis=1) / self.denom
        self.series["floor"][t] = before.floors
        self.temp_pre[t] = before.climate.temp_atmosphere
        self.temp_post[t] = state.climate.temp_atmosphere
        self.emissions[t] = state.last_emissions

    def finalize(self, state, nego_on):
        u_i = state.cumulative_utility.copy()
        return EpisodeLog(
            schema="episode_log/1",
            config_hash=config_hash(self.config),
            seed=self.seed,
            negotiation_on=nego_on,
            num_steps=self.config.econ.num_steps,
            n_regions=self.config.n_regions,
            region_series=self.series,
            temp_atmosphere_pre=self.temp_pre,
            temp_atmosphere_post=self.temp_post,
            emissions=self.emissions,
            u_i=u_i,
            u=float(u_i.sum()),
            temperature_increase=float(
                self.temp_post[-1] - self.temp_pre[0]
            ),
        )
