"""Parameter blocks for the multi-region climate-economy model.

Three groups of parameters feed the simulator:

* ``GlobalEconParams`` — economy-wide constants (utility curvature, capital
  elasticity, trade preferences, abatement cost scale, step length).
* ``RegionParams`` — one row per region: initial stocks, population and
  technology growth, carbon intensity, damage coefficients.
* ``ClimateParams`` — three-reservoir carbon cycle, two-layer temperature
  response, and the initial (above preindustrial) climate state.

``SimConfig`` bundles everything a run needs, plus the negotiation flag
and the training budget. All defaults are calibration choices, not
physical truths; every one of them can be overridden from the config file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace, asdict
from functools import lru_cache

import numpy as np

from .errors import ConfigError

# Columns of the region table file, in order. Optional per-region damage
# overrides (damage_a1, damage_a2, damage_a3) may follow.
REGION_TABLE_COLUMNS = (
    "region_id",
    "xA_0",
    "xK_0",
    "xL_0",
    "xL_a",
    "xdelta_A",
    "xg_A",
    "xl_g",
    "xsigma_0",
)
OPTIONAL_REGION_COLUMNS = ("damage_a1", "damage_a2", "damage_a3")

# Damage-function defaults (quadratic in warming), shared by all regions
# unless the region table overrides them.
DEFAULT_DAMAGE_A1 = 0.0
DEFAULT_DAMAGE_A2 = 0.00236
DEFAULT_DAMAGE_A3 = 2.0


@dataclass(frozen=True)
class GlobalEconParams:
    """Economy-wide constants.

    ``delta_step`` is the number of years per step; the shipped
    configuration uses 5-year steps x 20 steps = one century.
    """

    alpha: float = 0.5          # risk-aversion exponent, != 1
    epsilon: float = 1e-5       # utility smoothing constant, > 0
    gamma: float = 0.3          # capital elasticity, in (0, 1)
    delta_step: float = 5.0     # years per step
    num_steps: int = 20         # steps per episode
    sub_rate: float = 0.5       # consumption substitution exponent, in (0, 1]
    dom_pref: float = 0.5       # weight on domestic consumption
    for_pref: tuple = ()        # per-source weights on imports, length N
    theta2: float = 2.6         # abatement cost exponent, > 1
    backstop_price: float = 550.0  # abatement cost scale
    delta_k: float = 0.1        # annual capital depreciation rate, [0, 1)
    g_sigma: float = 0.01       # annual carbon-intensity decline rate

    def validate(self, n_regions=None):
        if self.alpha == 1.0:
            raise ConfigError("alpha must differ from 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if not 0.0 < self.sub_rate <= 1.0:
            raise ConfigError("sub_rate must lie in (0, 1]")
        if self.dom_pref < 0:
            raise ConfigError("dom_pref must be >= 0")
        if any(w < 0 for w in self.for_pref):
            raise ConfigError("for_pref weights must be >= 0")
        if not self.theta2 > 1:
            raise ConfigError("theta2 must be > 1")
        if not 0.0 <= self.delta_k < 1.0:
            raise ConfigError("delta_k must lie in [0, 1)")
        if self.delta_step <= 0 or self.num_steps <= 0:
            raise ConfigError("delta_step and num_steps must be positive")
        if n_regions is not None and len(self.for_pref) != n_regions:
            raise ConfigError(
                f"for_pref has length {len(self.for_pref)}, expected {n_regions}"
            )


def uniform_foreign_preferences(n_regions, dom_pref=0.5):
    """Default import weights: the non-domestic share split evenly.

    ``for_pref`` always has length N; the self entry is never consumed
    (own imports are zero by construction). A single-region economy trades
    with nobody, so it gets full domestic weight.
    """
    if n_regions < 1:
        raise ConfigError("need at least one region")
    if n_regions == 1:
        return 1.0, (0.0,)
    w = (1.0 - dom_pref) / (n_regions - 1)
    return dom_pref, tuple(w for _ in range(n_regions))


@dataclass(frozen=True)
class RegionParams:
    """Static calibration of one region (one row of the region table)."""

    region_id: int
    a0: float        # initial technology (total factor productivity)
    k0: float        # initial capital stock
    l0: float        # initial labor, millions
    l_a: float       # long-term population, millions
    delta_a: float   # technology growth decay
    g_a: float       # initial technology growth
    l_g: float       # labor convergence speed (negative values occur)
    sigma0: float    # initial carbon intensity
    damage_a1: float = DEFAULT_DAMAGE_A1
    damage_a2: float = DEFAULT_DAMAGE_A2
    damage_a3: float = DEFAULT_DAMAGE_A3

    def validate(self):
        ctx = f"region {self.region_id}"
        if not self.l0 > 0:
            raise ConfigError(f"{ctx}: xL_0 must be > 0")
        if not self.l_a > 0:
            raise ConfigError(f"{ctx}: xL_a must be > 0")
        if not self.a0 > 0:
            raise ConfigError(f"{ctx}: xA_0 must be > 0")
        if self.k0 < 0:
            raise ConfigError(f"{ctx}: xK_0 must be >= 0")
        if self.sigma0 < 0:
            raise ConfigError(f"{ctx}: xsigma_0 must be >= 0")
        if self.damage_a2 < 0:
            raise ConfigError(f"{ctx}: damage_a2 must be >= 0")


def default_carbon_transfer():
    """Per-step reservoir transition matrix (atmosphere, upper, lower ocean).

    Built from the standard two-coefficient parameterization so that each
    column sums to one (carbon is moved, never created) and the
    preindustrial masses (588, 360, 1720) GtC are a fixed point.
    """
    b12, b23 = 0.12, 0.007
    mateq, mueq, mleq = 588.0, 360.0, 1720.0
    b21 = b12 * mateq / mueq
    b32 = b23 * mueq / mleq
    return (
        (1.0 - b12, b21, 0.0),
        (b12, 1.0 - b21 - b23, b32),
        (0.0, b23, 1.0 - b32),
    )


@dataclass(frozen=True)
class ClimateParams:
    """Carbon-cycle and temperature dynamics, plus the initial state.

    The defaults are the conventional published constants for a 5-year
    step; every field is overridable from the config file and none is
    load-bearing for acceptance beyond the stated qualitative properties.
    Emissions are interpreted as GtC: carbon intensity is read as GtC per
    unit of production per year, multiplied by ``delta_step`` per step.
    """

    carbon_transfer: tuple = field(default_factory=default_carbon_transfer)
    m_preindustrial: float = 588.0   # preindustrial atmospheric carbon, GtC
    f2x: float = 3.6813              # forcing at CO2 doubling, W/m^2
    t2x: float = 3.1                 # equilibrium climate sensitivity, degC
    heat_c1: float = 0.1005          # atmospheric temperature response per step
    heat_c3: float = 0.088           # atmosphere -> ocean coupling
    heat_c4: float = 0.025           # ocean temperature response per step
    f_exo_0: float = 0.5             # exogenous forcing at step 0, W/m^2
    f_exo_slope: float = 0.5 / 17.0  # exogenous forcing increase per step
    initial_masses: tuple = (875.0, 460.0, 1740.0)  # ~2020 reservoirs, GtC
    initial_temp_atmosphere: float = 1.1  # degC above preindustrial, ~2020
    initial_temp_ocean: float = 0.1

    def validate(self):
        m = np.asarray(self.carbon_transfer, dtype=float)
        if m.shape != (3, 3):
            raise ConfigError("carbon_transfer must be a 3x3 matrix")
        if np.any(m < 0):
            raise ConfigError("carbon_transfer entries must be >= 0")
        col_sums = m.sum(axis=0)
        if not np.allclose(col_sums, 1.0, atol=1e-9):
            raise ConfigError(
                f"carbon_transfer columns must sum to 1, got {col_sums.tolist()}"
            )
        if not self.t2x > 0:
            raise ConfigError("t2x must be > 0")
        if not self.f2x > 0:
            raise ConfigError("f2x must be > 0")
        if not self.m_preindustrial > 0:
            raise ConfigError("m_preindustrial must be > 0")
        if len(self.initial_masses) != 3 or any(v < 0 for v in self.initial_masses):
            raise ConfigError("initial_masses must be three non-negative values")


@dataclass(frozen=True)
class TrainBudget:
    """Desk-scale policy-search budget. Paper-scale training is out of scope;
    larger runs remain possible by raising these numbers in the config."""

    iterations: int = 500
    population: int = 64
    elite_fraction: float = 0.125

    def validate(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.population < 4:
            raise ConfigError("population must be >= 4")
        if not 0.0 < self.elite_fraction <= 0.5:
            raise ConfigError("elite_fraction must lie in (0, 0.5]")


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs.

    ``econ``/``climate``/``regions`` and the negotiation flag define the
    simulation itself; seeds, budget, and output paths are run metadata
    and deliberately excluded from :func:`config_hash`.
    """

    econ: GlobalEconParams
    climate: ClimateParams
    regions: tuple  # tuple[RegionParams, ...]
    negotiation_on: bool = False
    nego_quantize_levels: int = 0  # 0 = continuous proposals; e.g. 10 levels
    budget: TrainBudget = field(default_factory=TrainBudget)
    seeds: tuple = (1, 2, 3, 4, 5)

    @property
    def n_regions(self):
        return len(self.regions)

    def validate(self, min_regions=1):
        if self.n_regions < min_regions:
            raise ConfigError(f"need at least {min_regions} regions")
        seen = set()
        for rp in self.regions:
            if rp.region_id in seen:
                raise ConfigError(f"duplicate region_id {rp.region_id}")
            seen.add(rp.region_id)
            rp.validate()
        self.econ.validate(n_regions=self.n_regions)
        self.climate.validate()
        self.budget.validate()
        if self.nego_quantize_levels not in (0,) and self.nego_quantize_levels < 2:
            raise ConfigError("nego_quantize_levels must be 0 (off) or >= 2")
        if not self.seeds:
            raise ConfigError("at least one seed required")

    def with_negotiation(self, on):
        return replace(self, negotiation_on=bool(on))


def default_config(n_regions=None, negotiation_on=False):
    """The shipped 27-region configuration (optionally truncated)."""
    from .config_io import load_packaged_regions

    regions = load_packaged_regions()
    if n_regions is not None:
        regions = regions[:n_regions]
    dom, forw = uniform_foreign_preferences(len(regions))
    econ = GlobalEconParams(dom_pref=dom, for_pref=forw)
    return SimConfig(
        econ=econ,
        climate=ClimateParams(),
        regions=tuple(regions),
        negotiation_on=negotiation_on,
    )


def config_hash(config):
    """Stable hash of the simulation-defining fields.

    Seeds, budgets, and output paths do not change the dynamics and are
    excluded, so two runs of the same world compare equal.
    """
    return _config_hash_cached(config)


def _hash_payload(config):
    payload = {
        "schema": "simconfig/1",
        "econ": asdict(config.econ),
        "climate": asdict(config.climate),
        "regions": [asdict(r) for r in config.regions],
        "negotiation_on": config.negotiation_on,
        "nego_quantize_levels": config.nego_quantize_levels,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


@lru_cache(maxsize=512)
def _config_hash_cached(config):
    return _hash_payload(config)


@dataclass(frozen=True)
class RegionTable:
    """Struct-of-arrays view of the region list for vectorized stepping."""

    region_ids: np.ndarray
    a0: np.ndarray
    k0: np.ndarray
    l0: np.ndarray
    l_a: np.ndarray
    delta_a: np.ndarray
    g_a: np.ndarray
    l_g: np.ndarray
    sigma0: np.ndarray
    damage_a1: np.ndarray
    damage_a2: np.ndarray
    damage_a3: np.ndarray

    @classmethod
    def from_regions(cls, regions):
        def col(name):
            return np.array([getattr(r, name) for r in regions], dtype=np.float64)

        return cls(
            region_ids=np.array([r.region_id for r in regions], dtype=np.int64),
            a0=col("a0"),
            k0=col("k0"),
            l0=col("l0"),
            l_a=col("l_a"),
            delta_a=col("delta_a"),
            g_a=col("g_a"),
            l_g=col("l_g"),
            sigma0=col("sigma0"),
            damage_a1=col("damage_a1"),
            damage_a2=col("damage_a2"),
            damage_a3=col("damage_a3"),
        )
