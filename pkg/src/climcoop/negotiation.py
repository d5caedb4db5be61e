"""Optional per-step negotiation: proposals, evaluation, mitigation floors.

Before acting, every ordered pair of regions (i, j) carries one proposal:
i promises a mitigation rate for itself and requests one of j. Recipients
accept or reject. An accepted proposal binds both sides — the recipient to
the requested rate, the proposer to its promise — and each region's floor
is the maximum over everything binding it (zero when nothing does). The
floor then masks the action stage: executed mitigation is never below it.

Proposal and acceptance values come from the same policy abstraction as
actions. Floors and proposals are continuous here; configs may ask
policies' outputs to be snapped to a fixed number of levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Proposal:
    """One directed proposal: proposer commits to ``promise`` and demands
    ``request`` of the recipient."""

    proposer: int
    recipient: int
    promise: float
    request: float


@dataclass
class NegotiationState:
    """All proposals of one step, their outcomes, and the induced floors.

    ``promises[i, j]`` / ``requests[i, j]`` belong to the proposal i -> j;
    diagonals are unused. ``acceptances[i, j]`` is recipient j's decision.
    """

    promises: np.ndarray     # (N, N)
    requests: np.ndarray     # (N, N)
    acceptances: np.ndarray  # (N, N) bool
    floors: np.ndarray       # (N,)

    def proposals(self):
        """Flat list of the N*(N-1) directed proposals."""
        n = self.promises.shape[0]
        return [
            Proposal(i, j, float(self.promises[i, j]), float(self.requests[i, j]))
            for i in range(n)
            for j in range(n)
            if i != j
        ]


def quantize_fractions(values, levels):
    """Snap fractions in [0, 1] to ``levels`` evenly spaced values."""
    if levels and levels >= 2:
        return np.round(np.asarray(values, dtype=np.float64) * (levels - 1)) / (
            levels - 1
        )
    return np.asarray(values, dtype=np.float64)


def collect_proposals(policy, observations, rng_ctx, quantize_levels=0):
    """One proposal per ordered pair, clamped (and optionally quantized)."""
    promises, requests = policy.propose_batch(observations, rng_ctx)
    promises = np.minimum(np.maximum(promises, 0.0), 1.0)
    requests = np.minimum(np.maximum(requests, 0.0), 1.0)
    if quantize_levels:
        promises = quantize_fractions(promises, quantize_levels)
        requests = quantize_fractions(requests, quantize_levels)
    np.fill_diagonal(promises, 0.0)
    np.fill_diagonal(requests, 0.0)
    return promises, requests


def compute_floors(promises, requests, acceptances):
    """Minimum mitigation per region implied by the accepted proposals.

    Acceptance of (i -> j) bounds j by the request and i by the promise;
    the floor is the max over all such bounds, 0 for unbound regions.
    """
    acc = np.asarray(acceptances, dtype=bool)
    incoming = np.where(acc, requests, 0.0).max(axis=0)  # binds recipients
    outgoing = np.where(acc, promises, 0.0).max(axis=1)  # binds proposers
    return np.clip(np.maximum(incoming, outgoing), 0.0, 1.0)


def mask_batch(batch, floors):
    """Raise mitigation to each region's floor; other fields untouched."""
    out = batch.copy()
    out.mitigation = np.maximum(out.mitigation, floors)
    return out


def mask_action(action, floor):
    """Single-region version of the floor mask."""
    from dataclasses import replace

    return replace(
        action, mitigation_rate=float(max(action.mitigation_rate, floor))
    )
