"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all errors raised by sumproduct_lab."""


class ScaleMismatch(LabError, ValueError):
    pass


class EmptySetError(LabError, ValueError):
    pass


class OutOfAmbientError(LabError, ValueError):
    def __init__(self, value, lo, hi):
        super().__init__(f"point {value} lies outside the ambient interval [{lo}, {hi}]")
        self.value = value


class HypothesisViolation(LabError):
    """The hypothesis of an inequality does not hold for the supplied input."""


class TheoremViolation(LabError):
    """A statement that is a theorem failed on a concrete instance.

    Never expected; the CLI maps it to exit code 2.
    """


class BudgetExceeded(LabError):
    """The requested computation exceeds a configured desk-scale budget."""


class PreconditionError(LabError, ValueError):
    pass
