"""Exception hierarchy shared by all modules."""


class FreshnessError(ValueError):
    """Base class for every error raised by this package."""


class NegativeOffDiagonal(FreshnessError):
    pass


class RowSumViolation(FreshnessError):
    pass


class NotIrreducible(FreshnessError):
    pass


class SingularSystem(FreshnessError):
    pass


class NonConvergence(FreshnessError):
    pass


class NotReversible(FreshnessError):
    pass


class DecompositionFailure(FreshnessError):
    pass


class UniqueMaxRequired(FreshnessError):
    pass


class HorizonExceeded(FreshnessError):
    pass


class InvalidStateIndex(FreshnessError):
    pass


class PhaseOverflow(FreshnessError):
    pass


class InvalidSpec(FreshnessError):
    pass


class SingularResolvent(FreshnessError):
    pass


class QuadratureBudgetExceeded(FreshnessError):
    pass


class InvalidConfig(FreshnessError):
    pass


class TooFewBatches(FreshnessError):
    pass


class GenerationBudgetExceeded(FreshnessError):
    pass
