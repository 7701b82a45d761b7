"""Exception taxonomy shared across the package."""


class FlucasterError(Exception):
    """Base class for all package errors."""


class DomainError(FlucasterError):
    """Input outside the operation's domain (off-season week, unknown state code)."""


class SchemaError(FlucasterError):
    """Input file is missing required columns or the schema mapping is invalid."""


class IntegrityError(FlucasterError):
    """Dataset violates a structural invariant (e.g. duplicate location/week key)."""


class InsufficientDataError(FlucasterError):
    """Requested series cannot be computed from the rows present."""


class ConfigError(FlucasterError):
    """Invalid configuration value."""


class MissingInputError(FlucasterError):
    """A required observation is absent; the caller should record an unavailable cell."""


class FitError(FlucasterError):
    """Model estimation failed (empty design, divergence, iteration budget)."""


class ContractError(FlucasterError):
    """Caller broke an interface contract (layout mismatch, missing score cells)."""


class RunError(FlucasterError):
    """Backtest cannot start or continue."""


class ResumeError(RunError):
    """Run directory does not hold a resumable state."""
