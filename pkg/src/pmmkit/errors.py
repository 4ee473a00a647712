"""Exception hierarchy shared by every pmmkit module."""


class PmmError(Exception):
    """Base class for all pmmkit errors."""


class NotPrime(PmmError, ValueError):
    pass


class DuplicateEvaluationPoint(PmmError, ValueError):
    pass


class UncorrectableErrors(PmmError):
    """No polynomial of the requested degree is consistent with enough points."""


class IndivisibleDimensions(PmmError, ValueError):
    pass


class DimensionMismatch(PmmError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class InsufficientShards(PmmError):
    pass


class InsufficientResponses(PmmError):
    pass


class InconsistentResponses(PmmError):
    """More than P responses were supplied and they disagree with the interpolant."""


class CorruptManifest(PmmError):
    pass


class ModulusMismatch(PmmError):
    pass


class NotAchievable(PmmError, ValueError):
    pass


class InfeasiblePlan(PmmError, ValueError):
    """The recovery threshold exceeds the number of servers."""


class NoFeasiblePlan(PmmError):
    pass


class FactorizationInvalid(PmmError, ValueError):
    pass


class EnumerationTooLarge(PmmError):
    pass


class TransportError(PmmError):
    pass


class MalformedFrame(TransportError):
    pass


class UnknownTag(TransportError):
    pass


class ConfigError(PmmError, ValueError):
    pass
