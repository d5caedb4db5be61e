"""Cross-entropy policy search over linear-policy weights.

Self-play with shared weights: one candidate weight vector drives every
region, and its fitness is the mean regional episode reward of one
deterministic evaluation episode. Each iteration samples a population
around the current mean, keeps the elite fraction, and refits mean and
spread; a spread floor keeps the search alive. Everything is driven by
named streams, so equal seeds return equal weights, and the best candidate
ever evaluated is what comes back — its recorded fitness can only go up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import run_episode
from .errors import ConfigError, InvalidStateError
from .policy import LinearPolicy, N_HEADS, OBS_LENGTH
from .rng import stream

_SIGMA_FLOOR = 1e-3


@dataclass
class TrainResult:
    """Best policy found plus the per-iteration fitness trace."""

    policy: LinearPolicy
    best_fitness: float
    history: list = field(default_factory=list)  # (iteration, best, mean) rows
    episodes_run: int = 0


def _fitness(weights, config, template, eval_seed, nego_on, episode):
    policy = LinearPolicy(
        template.n_regions,
        weights=weights.reshape(OBS_LENGTH + 1, N_HEADS),
        export_scale=template.export_scale,
        bid_scale=template.bid_scale,
    )
    summary = run_episode(
        config,
        policy,
        eval_seed,
        nego_on=nego_on,
        episode=episode,
        collect_log=False,
    )
    return summary.u / config.n_regions, policy


def train_cem(
    config,
    policy_template,
    iterations,
    population,
    elite_fraction,
    seed,
    nego_on=None,
):
    """Search linear-policy weights maximizing mean regional reward.

    With ``iterations=0`` the template comes back unchanged. Divergent
    (non-finite) fitness aborts with a diagnostic rather than silently
    steering the search.
    """
    if population < 4:
        raise ConfigError("population must be >= 4")
    if not 0.0 < elite_fraction <= 0.5:
        raise ConfigError("elite_fraction must lie in (0, 0.5]")
    if iterations < 0:
        raise ConfigError("iterations must be >= 0")

    template = policy_template
    if not isinstance(template, LinearPolicy):
        raise ConfigError("train_cem optimizes linear policies")
    dim = (OBS_LENGTH + 1) * N_HEADS
    mean = template.weights.ravel().astype(np.float64).copy()
    sigma = np.ones(dim)
    n_elite = max(1, int(round(elite_fraction * population)))
    eval_seed = int(stream(seed, "cem-eval-seed").integers(0, 2**31))

    if iterations == 0:
        return TrainResult(policy=template, best_fitness=float("nan"))

    best_w = mean.copy()
    best_f = -np.inf
    history = []
    episodes = 0

    for it in range(iterations):
        noise = np.empty((population, dim))
        for member in range(population):
            g = stream(seed, "cem-sample", iteration=it, member=member)
            noise[member] = g.standard_normal(dim)
        candidates = mean[np.newaxis, :] + noise * sigma[np.newaxis, :]

        fitness = np.empty(population)
        for member in range(population):
            f, _ = _fitness(
                candidates[member], config, template, eval_seed, nego_on, episode=it
            )
            if not np.isfinite(f):
                raise InvalidStateError(
                    "divergent fitness during policy search",
                    step=it,
                    region=member,
                    field="fitness",
                )
            fitness[member] = f
        episodes += population

        # Stable elite selection: fitness descending, member index breaks ties.
        order = np.lexsort((np.arange(population), -fitness))
        elite = candidates[order[:n_elite]]
        mean = elite.mean(axis=0)
        sigma = np.maximum(elite.std(axis=0), _SIGMA_FLOOR)

        it_best = int(order[0])
        if fitness[it_best] > best_f:
            best_f = float(fitness[it_best])
            best_w = candidates[it_best].copy()
        history.append((it, best_f, float(fitness.mean())))

    best_policy = LinearPolicy(
        template.n_regions,
        weights=best_w.reshape(OBS_LENGTH + 1, N_HEADS),
        export_scale=template.export_scale,
        bid_scale=template.bid_scale,
    )
    return TrainResult(
        policy=best_policy,
        best_fitness=best_f,
        history=history,
        episodes_run=episodes,
    )
