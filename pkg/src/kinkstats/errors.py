"""Exception hierarchy shared by the simulation and analysis modules."""


class KinkStatsError(Exception):
    """Base class for all package errors."""


class DomainError(KinkStatsError, ValueError):
    pass


class ConstructionError(KinkStatsError, ValueError):
    pass


class ResourceError(KinkStatsError, MemoryError):
    def __init__(self, message, required_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes


class InconsistentMomentsError(KinkStatsError, ArithmeticError):
    pass


class TruncationOverflowError(KinkStatsError, ArithmeticError):
    def __init__(self, message, discarded_weight):
        super().__init__(message)
        self.discarded_weight = discarded_weight


class NormalizationError(KinkStatsError, ArithmeticError):
    pass


class IllConditionedCorrectionError(KinkStatsError, ArithmeticError):
    pass


class UnusableRenormError(KinkStatsError, ArithmeticError):
    pass


class FitError(KinkStatsError, ValueError):
    pass


class FeasibilityError(KinkStatsError, ValueError):
    pass


class SolverError(KinkStatsError, ArithmeticError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(KinkStatsError, ValueError):
    pass
