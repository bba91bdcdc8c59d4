"""Exception hierarchy shared by all memlab modules."""


class MemlabError(Exception):
    """Base class for every error raised by this package."""


class NumericError(MemlabError):
    """Non-finite values where finite ones are required (NaN/Inf state)."""


class UndefinedLossError(NumericError):
    """A loss was requested over an empty set of scored positions."""


class ConfigError(MemlabError):
    """Invalid or inconsistent configuration."""


class InputError(MemlabError):
    """A runtime input violates an operation's precondition."""


class UsageError(MemlabError):
    """An API was called out of protocol (e.g. a grad tape replayed twice)."""


class IngestionError(MemlabError):
    """Corpus or annotation input could not be ingested."""


class SetupError(MemlabError):
    """An experiment precondition does not hold (e.g. held-out data leaks into training)."""


class CheckpointError(MemlabError):
    """A checkpoint file is malformed or fails its checksums."""
