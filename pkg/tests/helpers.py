"""Test-only helpers: scripted policies and config flattening."""

from dataclasses import asdict

import numpy as np

from climcoop.actions import ActionBatch
from climcoop.policy import Policy


class ScheduledPolicy(Policy):
    """Replays a fixed per-step list of ActionBatches (indexed by the
    engine's step counter on the rng context)."""

    kind = "scheduled"

    def __init__(self, batches):
        super().__init__(batches[0].n_regions)
        self.batches = batches

    def act_batch(self, observations, rng_ctx):
        return self.batches[rng_ctx.step]

    def propose_batch(self, observations, rng_ctx):
        n = self.n_regions
        return np.zeros((n, n)), np.zeros((n, n))

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        return np.zeros((self.n_regions, self.n_regions), dtype=bool)


def varied_schedule(n_regions, n_steps):
    """Deterministic, in-bounds, non-trivial actions for every (t, i)."""
    batches = []
    dicts = []
    for t in range(n_steps):
        batch = ActionBatch.zeros(n_regions)
        step_dicts = []
        for i in range(n_regions):
            savings = 0.10 + 0.05 * ((t + i) % 4)
            mitigation = 0.05 * ((2 * t + i) % 5)
            export_cap = 0.02 + 0.01 * i
            bids = [
                0.0 if j == i else 0.004 + 0.001 * ((i + 2 * j + t) % 3)
                for j in range(n_regions)
            ]
            tariffs = [
                0.0 if j == i else 0.05 * ((i + j + t) % 4)
                for j in range(n_regions)
            ]
            batch.savings[i] = savings
            batch.mitigation[i] = mitigation
            batch.export_cap[i] = export_cap
            batch.import_bids[i] = bids
            batch.tariffs[i] = tariffs
            step_dicts.append(
                {
                    "savings": savings,
                    "mitigation": mitigation,
                    "export_cap": export_cap,
                    "bids": bids,
                    "tariffs": tariffs,
                }
            )
        batches.append(batch)
        dicts.append(step_dicts)
    return batches, dicts


def config_as_plain_dict(cfg):
    """SimConfig -> plain nested dict for the naive oracle."""
    return {
        "econ": {
            "alpha": cfg.econ.alpha,
            "epsilon": cfg.econ.epsilon,
            "gamma": cfg.econ.gamma,
            "delta_step": cfg.econ.delta_step,
            "num_steps": cfg.econ.num_steps,
            "sub_rate": cfg.econ.sub_rate,
            "dom_pref": cfg.econ.dom_pref,
            "for_pref": list(cfg.econ.for_pref),
            "theta2": cfg.econ.theta2,
            "backstop_price": cfg.econ.backstop_price,
            "delta_k": cfg.econ.delta_k,
            "g_sigma": cfg.econ.g_sigma,
        },
        "climate": {
            "carbon_transfer": [list(r) for r in cfg.climate.carbon_transfer],
            "m_preindustrial": cfg.climate.m_preindustrial,
            "f2x": cfg.climate.f2x,
            "t2x": cfg.climate.t2x,
            "heat_c1": cfg.climate.heat_c1,
            "heat_c3": cfg.climate.heat_c3,
            "heat_c4": cfg.climate.heat_c4,
            "f_exo_0": cfg.climate.f_exo_0,
            "f_exo_slope": cfg.climate.f_exo_slope,
            "initial_masses": list(cfg.climate.initial_masses),
            "initial_temp_atmosphere": cfg.climate.initial_temp_atmosphere,
            "initial_temp_ocean": cfg.climate.initial_temp_ocean,
        },
        "regions": [asdict(r) for r in cfg.regions],
    }
