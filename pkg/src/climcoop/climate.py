"""Global carbon cycle and temperature response.

A three-reservoir carbon cycle (atmosphere, upper ocean, lower ocean)
moves mass with a column-stochastic transfer matrix, so total carbon only
changes by the emissions injected each step. Radiative forcing is
logarithmic in atmospheric carbon relative to preindustrial, plus a linear
exogenous schedule; a two-layer temperature model relaxes toward the
forcing-implied equilibrium, reaching the climate sensitivity ``t2x`` at
doubled carbon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ClimateState:
    """Carbon reservoirs (GtC) and temperatures (degC above preindustrial)."""

    masses: np.ndarray  # (3,): atmosphere, upper ocean, lower ocean
    temp_atmosphere: float
    temp_ocean: float
    cumulative_emissions: float = 0.0

    def copy(self):
        return replace(self, masses=self.masses.copy())


def initial_climate_state(params):
    return ClimateState(
        masses=np.array(params.initial_masses, dtype=np.float64),
        temp_atmosphere=float(params.initial_temp_atmosphere),
        temp_ocean=float(params.initial_temp_ocean),
        cumulative_emissions=0.0,
    )


def emissions(sigma, mitigation_rate, production, delta_step):
    """Emissions of one step, GtC: ``sigma * (1 - mu) * production * Delta``."""
    out = (
        np.asarray(sigma, dtype=np.float64)
        * (1.0 - np.asarray(mitigation_rate, dtype=np.float64))
        * np.asarray(production, dtype=np.float64)
        * delta_step
    )
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def exogenous_forcing(step_index, params):
    """Non-CO2 forcing schedule, linear in the step index (W/m^2)."""
    return params.f_exo_0 + params.f_exo_slope * step_index


def step_climate(state, total_emissions, step_index, params):
    """Advance reservoirs and temperatures by one step.

    Mass moves first (emissions enter the atmosphere), forcing is computed
    from the updated atmospheric mass, then both temperature layers relax.
    Total mass grows by exactly ``total_emissions``.
    """
    transfer = np.asarray(params.carbon_transfer, dtype=np.float64)
    masses = transfer @ state.masses
    masses[0] += total_emissions

    forcing = params.f2x * math.log2(
        masses[0] / params.m_preindustrial
    ) + exogenous_forcing(step_index, params)

    lam = params.f2x / params.t2x
    t_atm = state.temp_atmosphere
    t_oc = state.temp_ocean
    new_t_atm = t_atm + params.heat_c1 * (
        forcing - lam * t_atm - params.heat_c3 * (t_atm - t_oc)
    )
    new_t_oc = t_oc + params.heat_c4 * (t_atm - t_oc)

    return ClimateState(
        masses=masses,
        temp_atmosphere=float(new_t_atm),
        temp_ocean=float(new_t_oc),
        cumulative_emissions=state.cumulative_emissions + float(total_emissions),
    )
