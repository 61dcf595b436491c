"""Exception hierarchy shared across the package.

Every exception derives from MultivawError so callers can catch the whole
family, and from a builtin (ValueError / RuntimeError) so generic handling
keeps working.
"""


class MultivawError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(MultivawError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class NotPositiveDefinite(MultivawError, ValueError):
    """A matrix required to be SPD failed the Cholesky pivot gate."""


class ConvergenceFailure(MultivawError, RuntimeError):
    """The symmetric eigensolver did not converge."""


class RankDeficient(MultivawError, ValueError):
    """A matrix required to have full column rank does not."""


class ScheduleViolation(MultivawError, ValueError):
    """A regularization schedule broke positivity or Loewner monotonicity."""


class ProtocolViolation(MultivawError, RuntimeError):
    """The features/response alternation of the step protocol was broken."""


class CyclicHierarchy(MultivawError, ValueError):
    """The parent/child relation of a hierarchy contains a cycle."""


class DuplicateNode(MultivawError, ValueError):
    """A hierarchy declares a node id twice or gives a node two parents."""


class MissingColumn(MultivawError, ValueError):
    """A dataset file lacks a required bottom-level column."""


class NonNumericCell(MultivawError, ValueError):
    """A dataset cell is empty or not parseable as a number."""


class EmptyFile(MultivawError, ValueError):
    """A dataset file has no header or no data rows."""


class InvalidPeriod(MultivawError, ValueError):
    """A seasonal one-hot period smaller than 2 was requested."""


class ConfigError(MultivawError, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class AuditFailure(MultivawError, RuntimeError):
    """A numerical equivalence audit exceeded its tolerance."""
