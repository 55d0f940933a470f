"""Exception types raised across the package."""


class EvidenceError(Exception):
    """Base class for all package errors."""


class AbsoluteContinuityViolation(EvidenceError, ValueError):
    """A numerator measure puts mass where the reference measure has none."""


class NormalizationError(EvidenceError, ValueError):
    pass


class WeightViolation(EvidenceError, ValueError):
    """Mixture weights negative or summing above one, or a scale factor outside (0, 1]."""


class DepthTooLarge(EvidenceError, ValueError):
    pass


class DomainError(EvidenceError, ValueError):
    pass


class BudgetExceeded(EvidenceError, ValueError):
    """Requested size is beyond the exact-enumeration budget."""


class MissingPrefix(EvidenceError, KeyError):
    pass


class EmptyCalibration(EvidenceError, ValueError):
    pass
