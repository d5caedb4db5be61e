"""Per-region economic equations and trade clearing.

Every function here is pure and stateless: it maps current values to new
values with no time loop and no I/O, and accepts either scalars or numpy
arrays (one entry per region). The engine owns sequencing; tests can call
each piece in isolation.

Utility puts consumption per thousand-of-population through an isoelastic
transform; labor relaxes toward its long-term size; production is
Cobb-Douglas; damages scale output down as warming rises; abatement cost
is the standard backstop-price closure, convex in the mitigation rate.
Trade clears by proportional rationing of import bids against each
exporter's capacity, with tariffed goods destroyed (not redistributed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError

# Abatement cost is a fraction of output and must stay below 1; with sane
# calibrations it never gets close, but the clamp keeps pathological
# configs from producing negative output.
_MAX_ABATEMENT = 1.0 - 1e-9


def step_utility(labor, consumption, econ):
    """Isoelastic per-step utility of one region.

    ``(l/1000) * (((c/(l/1000)) + eps)^(1-alpha) - 1) / (1-alpha)``.
    Zero exactly when per-capita consumption plus eps equals one.
    """
    pop = np.asarray(labor, dtype=np.float64) / 1000.0
    base = np.asarray(consumption, dtype=np.float64) / pop + econ.epsilon
    with np.errstate(invalid="ignore"):
        u = pop * (base ** (1.0 - econ.alpha) - 1.0) / (1.0 - econ.alpha)
    if not np.all(np.isfinite(u)):
        bad = int(np.argmin(np.isfinite(np.atleast_1d(u))))
        raise InvalidStateError("non-finite utility", region=bad, field="utility")
    return u if isinstance(u, np.ndarray) and u.ndim else float(u)


def episode_rewards(step_utilities, num_steps=None):
    """Episode reward per region and the collective total.

    ``step_utilities`` is a (T, N) matrix of per-step utilities. Returns
    ``(u_i, u)`` where ``u_i`` sums each region's column and ``u`` sums
    the regions.
    """
    m = np.asarray(step_utilities, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidStateError("step utilities must be a (steps, regions) matrix")
    if num_steps is not None and m.shape[0] != num_steps:
        raise InvalidStateError(
            f"incomplete log: {m.shape[0]} steps, expected {num_steps}"
        )
    u_i = m.sum(axis=0)
    return u_i, float(u_i.sum())


def update_labor(labor, region):
    """One step of population dynamics toward the long-term size.

    ``l * ((1 + l_a) / (1 + l))^l_g``; with l_g > 0 the long-term size is
    an attracting fixed point, with l_g < 0 (several regions) it repels.
    """
    labor = np.asarray(labor, dtype=np.float64)
    out = labor * (((1.0 + region.l_a) / (1.0 + labor)) ** region.l_g)
    return out if out.ndim else float(out)


def technology_growth_factor(step, region, econ):
    """Growth multiplier for technology at 1-based step ``step``.

    ``e^0.0033 + g_a * e^(-delta_a * Delta * (step - 1))``; the transient
    term decays so the factor tends to e^0.0033 from any g_a.
    """
    if np.any(np.asarray(step) < 1):
        raise InvalidStateError("technology update uses 1-based steps", field="step")
    decay = np.exp(-region.delta_a * econ.delta_step * (np.asarray(step) - 1.0))
    return np.exp(0.0033) + region.g_a * decay


def update_technology(technology, step, region, econ):
    """Advance total factor productivity by one (1-based) step."""
    out = technology_growth_factor(step, region, econ) * np.asarray(
        technology, dtype=np.float64
    )
    return out if out.ndim else float(out)


def update_capital(capital, gross_output, savings_rate, econ):
    """Depreciate the stock over the step and add the period's investment.

    Depreciation compounds the annual rate: ``(1 - delta_k)^Delta``.
    """
    dep = (1.0 - econ.delta_k) ** econ.delta_step
    out = dep * np.asarray(capital, dtype=np.float64) + econ.delta_step * (
        np.asarray(savings_rate, dtype=np.float64) * np.asarray(gross_output)
    )
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def production(technology, capital, labor, gamma):
    """Cobb-Douglas output: ``A * K^gamma * (l/1000)^(1-gamma)``."""
    out = (
        np.asarray(technology, dtype=np.float64)
        * np.asarray(capital, dtype=np.float64) ** gamma
        * (np.asarray(labor, dtype=np.float64) / 1000.0) ** (1.0 - gamma)
    )
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def damages_factor(atm_temp, a1, a2, a3):
    """Output multiplier in (0, 1] from warming: ``1 / (1 + a1*T + a2*T^a3)``."""
    t = np.asarray(atm_temp, dtype=np.float64)
    out = 1.0 / (1.0 + np.asarray(a1) * t + np.asarray(a2) * t ** np.asarray(a3))
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def abatement_cost(mitigation_rate, sigma, econ):
    """Cost fraction of output for abating at rate mu.

    ``(backstop / (1000 * theta2)) * sigma * mu^theta2`` — zero at mu=0,
    increasing and convex in mu, clamped below 1.
    """
    mu = np.asarray(mitigation_rate, dtype=np.float64)
    cost = (
        econ.backstop_price
        / (1000.0 * econ.theta2)
        * np.asarray(sigma, dtype=np.float64)
        * mu**econ.theta2
    )
    out = np.minimum(cost, _MAX_ABATEMENT)
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def gross_output(damages, abatement, prod):
    """Net output: ``damages * (1 - abatement_cost) * production``."""
    out = np.asarray(damages) * (1.0 - np.asarray(abatement)) * np.asarray(prod)
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def domestic_consumption(gross_out, savings_rate, total_exports):
    """Output left for home consumption after investment and exports."""
    y = np.asarray(gross_out, dtype=np.float64)
    out = np.maximum(
        0.0, y - np.asarray(savings_rate) * y - np.asarray(total_exports)
    )
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def aggregate_consumption(c_dom, c_for, econ):
    """CES aggregate of domestic consumption and per-source imports.

    ``(dom_pref * c_dom^s + sum_i for_pref_i * c_for_i^s)^(1/s)`` with
    ``s = sub_rate``. ``c_for`` is a length-N vector for one region or an
    (N, N) matrix (row per importing region).
    """
    s = econ.sub_rate
    cd = np.asarray(c_dom, dtype=np.float64)
    cf = np.asarray(c_for, dtype=np.float64)
    w = np.asarray(econ.for_pref, dtype=np.float64)
    if w.size == 0:
        foreign = np.zeros(cf.shape[0]) if cf.ndim == 2 else 0.0
    elif cf.ndim == 2:
        foreign = (cf**s) @ w
    else:
        foreign = float((cf**s) @ w)
    out = (econ.dom_pref * cd**s + foreign) ** (1.0 / s)
    return out if isinstance(out, np.ndarray) and out.ndim else float(out)


def update_carbon_intensity(sigma, econ):
    """Exponential decline of emissions per unit output."""
    out = np.asarray(sigma, dtype=np.float64) * np.exp(
        -econ.g_sigma * econ.delta_step
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TradeOutcome:
    """Cleared shipments and what importers keep after tariffs.

    ``exports_matrix[i, j]`` is the quantity shipped from region i to
    region j; ``foreign_consumption[j, i]`` is what j actually consumes
    from source i (tariffed goods are destroyed).
    """

    exports_matrix: np.ndarray
    foreign_consumption: np.ndarray


def clear_trade(savings, export_caps, import_bids, tariffs, gross_outputs):
    """Match import bids to export capacity by proportional rationing.

    An exporter can ship at most ``min(export_cap, (1 - savings) * output)``
    — never goods earmarked for investment. When bids for one exporter
    exceed that capacity every bid is scaled by the same factor, so no
    importer is favored. Degenerate inputs (no bids, no capacity) clear to
    zero trade rather than erroring.

    ``import_bids[j, i]`` is what region j wants from region i, self
    entries ignored.
    """
    y = np.asarray(gross_outputs, dtype=np.float64)
    bids = np.array(import_bids, dtype=np.float64, copy=True)
    np.fill_diagonal(bids, 0.0)
    surplus = np.maximum(0.0, y * (1.0 - np.asarray(savings)))
    capacity = np.minimum(np.asarray(export_caps, dtype=np.float64), surplus)
    demand = bids.sum(axis=0)  # per exporter
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(demand > capacity, capacity / np.where(demand > 0, demand, 1.0), 1.0)
    shipments = bids * scale[np.newaxis, :]  # [importer, exporter]
    kept = shipments * (1.0 - np.asarray(tariffs, dtype=np.float64))
    return TradeOutcome(
        exports_matrix=shipments.T.copy(), foreign_consumption=kept
    )
