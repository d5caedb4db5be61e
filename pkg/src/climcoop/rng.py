"""Counter-based named random streams.

Every consumer of randomness gets its own stream, keyed by
``(seed, purpose, episode, step, region, iteration, member)``. Streams are
derived by hashing the key into a Philox counter-based generator, so the
draw a component sees depends only on its logical coordinates — never on
scheduling, thread count, or how many other components drew before it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed, purpose, *, episode=0, step=0, region=0, iteration=0, member=0):
    """A fresh generator for one logical consumer."""
    key = f"climcoop/1|{seed}|{purpose}|{episode}|{step}|{region}|{iteration}|{member}"
    digest = hashlib.sha256(key.encode("ascii")).digest()
    philox_key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=philox_key))


class RngContext:
    """Stream factory bound to one (seed, episode) and advanced per step.

    Policies that need randomness call :meth:`stream` with their purpose
    and region; deterministic policies ignore the context entirely, which
    keeps trajectories identical whether or not other stochastic
    components run in the same process.
    """

    __slots__ = ("seed", "episode", "step")

    def __init__(self, seed, episode=0, step=0):
        self.seed = seed
        self.episode = episode
        self.step = step

    def stream(self, purpose, region=0):
        return stream(
            self.seed,
            purpose,
            episode=self.episode,
            step=self.step,
            region=region,
        )
