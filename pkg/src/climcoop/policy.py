"""Pluggable decision-makers: observation layout and policy kinds.

A policy maps one observation row per region to that region's action (and,
when negotiation is on, to its proposals and accept/reject decisions). The
engine always drives the batch methods so a whole step is one pass; the
single-region helpers exist for tests and external callers.

Observation layout (fixed length ``OBS_LENGTH`` for any region count):

====  =================================================================
idx   meaning
====  =================================================================
0     step fraction t/T
1     atmospheric temperature, degC above preindustrial
2     atmospheric carbon mass / 1000 (GtC, scaled)
3     own labor / 1000
4     own technology / 10
5     own capital / 10
6     own carbon intensity
7     own mitigation floor (0 with negotiation off)
8-12  previous-step global means of the five action fields
      (savings, mitigation, export cap, import bids, tariffs)
13    region id / max(N - 1, 1)
====  =================================================================
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .actions import ActionBatch, clamp_batch
from .errors import ConfigError

OBS_STEP_FRACTION = 0
OBS_TEMPERATURE = 1
OBS_CARBON_MASS = 2
OBS_LABOR = 3
OBS_TECHNOLOGY = 4
OBS_CAPITAL = 5
OBS_SIGMA = 6
OBS_FLOOR = 7
OBS_MEAN_ACTIONS = slice(8, 13)
OBS_REGION_ID = 13
OBS_LENGTH = 14

POLICY_KINDS = ("zero", "fixed", "random", "linear-cem")

# Heads of the linear policy, in weight-column order.
LINEAR_HEADS = (
    "savings",
    "mitigation",
    "export_frac",
    "bid_level",
    "tariff_level",
    "promise",
    "request",
    "accept",
)
N_HEADS = len(LINEAR_HEADS)


@dataclass(frozen=True)
class PolicySpec:
    """Kind tag plus kind-specific parameters; see :func:`build_policy`."""

    kind: str
    params: dict

    def validate(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class Policy:
    """Base interface. Subclasses fill in the batch methods."""

    kind = "base"

    def __init__(self, n_regions):
        self.n_regions = n_regions

    def act_batch(self, observations, rng_ctx):
        """(N, OBS_LENGTH) observations -> clamped ActionBatch."""
        raise NotImplementedError

    def propose_batch(self, observations, rng_ctx):
        """-> (promises, requests), each (N, N) with row = proposer."""
        raise NotImplementedError

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        """-> bool (N, N): entry [i, j] is recipient j's decision on i -> j."""
        raise NotImplementedError

    def act(self, observation, region_id, rng_ctx):
        """Single-region action (same numbers as the batch path)."""
        obs = np.zeros((self.n_regions, OBS_LENGTH))
        obs[region_id] = observation
        return clamp_batch(self.act_batch(obs, rng_ctx)).region(region_id)

    def to_record(self):
        raise NotImplementedError


class ZeroPolicy(Policy):
    """Does nothing: zero actions, zero proposals, rejects everything.

    The returned batches are cached and must be treated as read-only (the
    engine sanitizes into fresh arrays before using them).
    """

    kind = "zero"

    def __init__(self, n_regions):
        super().__init__(n_regions)
        self._batch = ActionBatch.zeros(n_regions)
        self._pair_zeros = np.zeros((n_regions, n_regions))
        self._rejects = np.zeros((n_regions, n_regions), dtype=bool)

    def act_batch(self, observations, rng_ctx):
        return self._batch

    def propose_batch(self, observations, rng_ctx):
        return self._pair_zeros, self._pair_zeros

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        return self._rejects

    def to_record(self):
        return {"schema": "policy/1", "kind": self.kind, "n_regions": self.n_regions}


class FixedPolicy(Policy):
    """Emits the same constants every step; useful for scripted scenarios."""

    kind = "fixed"

    def __init__(
        self,
        n_regions,
        savings=0.0,
        mitigation=0.0,
        export_cap=0.0,
        bid=0.0,
        tariff=0.0,
        promise=0.0,
        request=0.0,
        accept_all=False,
    ):
        super().__init__(n_regions)
        self.savings = float(savings)
        self.mitigation = float(mitigation)
        self.export_cap = float(export_cap)
        self.bid = float(bid)
        self.tariff = float(tariff)
        self.promise = float(promise)
        self.request = float(request)
        self.accept_all = bool(accept_all)

        # Frozen constants -> cache the batches (read-only by contract).
        n = n_regions
        bids = np.full((n, n), self.bid)
        tariffs = np.full((n, n), self.tariff)
        promises = np.full((n, n), self.promise)
        requests = np.full((n, n), self.request)
        acc = np.full((n, n), self.accept_all, dtype=bool)
        for m in (bids, tariffs, promises, requests, acc):
            np.fill_diagonal(m, 0)
        self._batch = ActionBatch(
            savings=np.full(n, self.savings),
            mitigation=np.full(n, self.mitigation),
            export_cap=np.full(n, self.export_cap),
            import_bids=bids,
            tariffs=tariffs,
        )
        self._proposals = (promises, requests)
        self._acceptances = acc

    def act_batch(self, observations, rng_ctx):
        return self._batch

    def propose_batch(self, observations, rng_ctx):
        return self._proposals

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        return self._acceptances

    def to_record(self):
        return {
            "schema": "policy/1",
            "kind": self.kind,
            "n_regions": self.n_regions,
            "savings": self.savings,
            "mitigation": self.mitigation,
            "export_cap": self.export_cap,
            "bid": self.bid,
            "tariff": self.tariff,
            "promise": self.promise,
            "request": self.request,
            "accept_all": self.accept_all,
        }


class RandomPolicy(Policy):
    """Uniform actions from the named per-(step, region) streams.

    Draw order per region is fixed (documented in the code), so two runs
    with equal seeds produce identical action sequences.
    """

    kind = "random"

    def __init__(self, n_regions, export_scale=5.0, bid_scale=0.2):
        super().__init__(n_regions)
        self.export_scale = float(export_scale)
        self.bid_scale = float(bid_scale)

    def _region_draws(self, rng_ctx, region, purpose, count):
        return rng_ctx.stream(purpose, region=region).random(count)

    def act_batch(self, observations, rng_ctx):
        n = self.n_regions
        batch = ActionBatch.zeros(n)
        for i in range(n):
            draws = self._region_draws(rng_ctx, i, "action", 3 + 2 * n)
            batch.savings[i] = draws[0]
            batch.mitigation[i] = draws[1]
            batch.export_cap[i] = draws[2] * self.export_scale
            batch.import_bids[i] = draws[3 : 3 + n] * self.bid_scale
            batch.tariffs[i] = draws[3 + n : 3 + 2 * n]
        np.fill_diagonal(batch.import_bids, 0.0)
        np.fill_diagonal(batch.tariffs, 0.0)
        return batch

    def propose_batch(self, observations, rng_ctx):
        n = self.n_regions
        promises = np.zeros((n, n))
        requests = np.zeros((n, n))
        for i in range(n):
            draws = self._region_draws(rng_ctx, i, "proposal", 2 * n)
            promises[i] = draws[:n]
            requests[i] = draws[n:]
        np.fill_diagonal(promises, 0.0)
        np.fill_diagonal(requests, 0.0)
        return promises, requests

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        n = self.n_regions
        acc = np.zeros((n, n), dtype=bool)
        for j in range(n):
            acc[:, j] = self._region_draws(rng_ctx, j, "evaluation", n) < 0.5
        np.fill_diagonal(acc, False)
        return acc

    def to_record(self):
        return {
            "schema": "policy/1",
            "kind": self.kind,
            "n_regions": self.n_regions,
            "export_scale": self.export_scale,
            "bid_scale": self.bid_scale,
        }


class LinearPolicy(Policy):
    """Linear map from observations to squashed action heads.

    ``heads = sigmoid([obs, 1] @ W)`` with one column per entry of
    ``LINEAR_HEADS``. Fraction heads are used directly; the export head is
    scaled by ``export_scale`` (output units) and the bid head by
    ``bid_scale`` per partner. Proposals broadcast each region's promise
    and request to all partners. Recipient j accepts proposal (i -> j)
    when ``promise - request`` strictly exceeds its own threshold
    ``2 * accept_head_j - 1`` in [-1, 1], so all-zero weights reject the
    all-zero proposal set and training can move the g gate either way.
    """

    kind = "linear-cem"

    def __init__(self, n_regions, weights=None, export_scale=5.0, bid_scale=0.2):
        super().__init__(n_regions)
        if weights is None:
            weights = np.zeros((OBS_LENGTH + 1, N_HEADS))
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (OBS_LENGTH + 1, N_HEADS):
            raise ConfigError(
                f"linear policy weights must have shape {(OBS_LENGTH + 1, N_HEADS)}"
            )
        self.export_scale = float(export_scale)
        self.bid_scale = float(bid_scale)

    def _heads(self, observations):
        obs = np.asarray(observations, dtype=np.float64)
        aug = np.concatenate([obs, np.ones((obs.shape[0], 1))], axis=1)
        return _sigmoid(aug @ self.weights)

    def act_batch(self, observations, rng_ctx):
        # Diagonal bid/tariff entries are unspecified here; ingestion
        # clamping zeroes them.
        n = self.n_regions
        h = self._heads(observations)
        bids = np.repeat(h[:, 3, np.newaxis] * self.bid_scale, n, axis=1)
        tariffs = np.repeat(h[:, 4, np.newaxis], n, axis=1)
        return ActionBatch(
            savings=h[:, 0].copy(),
            mitigation=h[:, 1].copy(),
            export_cap=h[:, 2] * self.export_scale,
            import_bids=bids,
            tariffs=tariffs,
        )

    def propose_batch(self, observations, rng_ctx):
        # Diagonal entries unspecified; proposal collection zeroes them.
        n = self.n_regions
        h = self._heads(observations)
        promises = np.repeat(h[:, 5, np.newaxis], n, axis=1)
        requests = np.repeat(h[:, 6, np.newaxis], n, axis=1)
        return promises, requests

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        h = self._heads(observations)
        threshold = 2.0 * h[:, 7] - 1.0  # per recipient
        acc = (promises - requests) > threshold[np.newaxis, :]
        np.fill_diagonal(acc, False)
        return acc

    def to_record(self):
        return {
            "schema": "policy/1",
            "kind": self.kind,
            "n_regions": self.n_regions,
            "export_scale": self.export_scale,
            "bid_scale": self.bid_scale,
            "weights_shape": list(self.weights.shape),
            "weights": self.weights.ravel().tolist(),
        }


class CompositePolicy(Policy):
    """One independent policy per region, presented as a single policy.

    Row i of every batch comes from ``policies[i]``. This is the slow,
    general path for heterogeneous agents; homogeneous runs should use one
    shared policy directly.
    """

    kind = "composite"

    def __init__(self, policies):
        super().__init__(len(policies))
        if any(p.n_regions != len(policies) for p in policies):
            raise ConfigError("every member policy must be sized for N regions")
        self.policies = list(policies)

    def act_batch(self, observations, rng_ctx):
        rows = [
            p.act_batch(observations, rng_ctx).region(i)
            for i, p in enumerate(self.policies)
        ]
        return ActionBatch.from_vectors(rows)

    def propose_batch(self, observations, rng_ctx):
        n = self.n_regions
        promises = np.zeros((n, n))
        requests = np.zeros((n, n))
        for i, p in enumerate(self.policies):
            pr, rq = p.propose_batch(observations, rng_ctx)
            promises[i] = pr[i]
            requests[i] = rq[i]
        return promises, requests

    def evaluate_batch(self, observations, promises, requests, rng_ctx):
        n = self.n_regions
        acc = np.zeros((n, n), dtype=bool)
        for j, p in enumerate(self.policies):
            acc[:, j] = p.evaluate_batch(observations, promises, requests, rng_ctx)[
                :, j
            ]
        return acc


def build_policy(spec, n_regions):
    """Instantiate a policy from its spec for an N-region world."""
    spec.validate()
    p = dict(spec.params)
    if spec.kind == "zero":
        return ZeroPolicy(n_regions)
    if spec.kind == "fixed":
        return FixedPolicy(n_regions, **p)
    if spec.kind == "random":
        return RandomPolicy(n_regions, **p)
    if spec.kind == "linear-cem":
        weights = p.pop("weights", None)
        if weights is not None:
            shape = p.pop("weights_shape", [OBS_LENGTH + 1, N_HEADS])
            weights = np.asarray(weights, dtype=np.float64).reshape(shape)
        return LinearPolicy(n_regions, weights=weights, **p)
    raise ConfigError(f"unknown policy kind {spec.kind!r}")


def policy_from_record(record):
    """Rebuild a policy from :meth:`Policy.to_record` output."""
    rec = dict(record)
    schema = rec.pop("schema", None)
    if schema != "policy/1":
        raise ConfigError(f"unsupported policy schema {schema!r}")
    kind = rec.pop("kind")
    n_regions = rec.pop("n_regions")
    return build_policy(PolicySpec(kind=kind, params=rec), n_regions)


def save_policy(policy, path):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(policy.to_record(), fh, indent=2)


def load_policy(path):
    with open(path, encoding="ascii") as fh:
        return policy_from_record(json.load(fh))


def act(policy, observation, region_id, rng_ctx, incoming_promises=None,
        incoming_requests=None):
    """One region's full decision tuple.

    Returns ``(action, proposals, acceptances)`` — the clamped action, the
    region's outgoing proposals as ``(recipient, promise, request)``
    triples, and its accept/reject vector over the incoming proposals
    (all-reject when none are supplied).
    """
    n = policy.n_regions
    obs = np.zeros((n, OBS_LENGTH))
    obs[region_id] = observation
    action = clamp_batch(policy.act_batch(obs, rng_ctx)).region(region_id)
    promises, requests = policy.propose_batch(obs, rng_ctx)
    proposals = [
        (j, float(np.clip(promises[region_id, j], 0.0, 1.0)),
         float(np.clip(requests[region_id, j], 0.0, 1.0)))
        for j in range(n)
        if j != region_id
    ]
    in_p = np.zeros((n, n)) if incoming_promises is None else incoming_promises
    in_r = np.zeros((n, n)) if incoming_requests is None else incoming_requests
    acceptances = policy.evaluate_batch(obs, in_p, in_r, rng_ctx)[:, region_id]
    return action, proposals, acceptances
