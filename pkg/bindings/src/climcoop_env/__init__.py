"""Environment-style bindings for the climcoop simulator.

External RL toolchains drive the simulator through a reset/step/close
handle exchanging plain numeric arrays and dicts keyed by region id —
nothing about the consumer's stack is assumed. The numbers are identical
to the native engine's: the handle calls the same public reset/step
pipeline and assembles the same episode log.

Observation rows follow the engine layout (see ``climcoop.policy``).
Actions per region are either a flat array ``[savings, mitigation,
export_cap, bids[0..N-1], tariffs[0..N-1]]`` (length 3 + 2N) or a dict
with those field names. With negotiation on, per-region ``promise``,
``request`` (length N, outgoing proposals) and ``accept`` (length N,
decisions on incoming proposals by proposer id) entries may be supplied;
they default to no proposals and all-reject.
"""

from .handle import EnvHandle, EnvClosedError, EnvUsageError, make_env, version

__all__ = [
    "EnvHandle",
    "EnvClosedError",
    "EnvUsageError",
    "make_env",
    "version",
]

__version__ = "0.1.0"
