"""Error types shared across the simulator.

Two broad failure classes map onto the CLI exit codes: configuration and
input validation problems (exit 1) and runtime/numeric problems (exit 2).
"""


class ClimcoopError(Exception):
    """Base class for all simulator errors."""


class ConfigError(ClimcoopError):
    """Invalid configuration, region table, or user input."""


class InvalidStateError(ClimcoopError):
    """A simulation produced a non-finite or otherwise invalid state.

    Carries enough context (step, region, field) to locate the origin.
    """

    def __init__(self, message, *, step=None, region=None, field=None):
        parts = [message]
        if step is not None:
            parts.append(f"step={step}")
        if region is not None:
            parts.append(f"region={region}")
        if field is not None:
            parts.append(f"field={field}")
        super().__init__(" ".join(parts))
        self.step = step
        self.region = region
        self.field = field
