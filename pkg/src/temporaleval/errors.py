"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or inconsistent input data."""


class UsageError(Exception):
    """Bad arguments at the API or CLI surface."""


class TrainerError(Exception):
    """A trainer crashed, timed out, or misbehaved."""


class UnsupportedCapability(TrainerError):
    """The trainer does not implement the requested phase."""


class ProtocolError(TrainerError):
    """An external trainer violated the wire protocol."""


class IncompleteGridError(DataError):
    """Summary statistics requested over a grid with missing or failed cells."""
