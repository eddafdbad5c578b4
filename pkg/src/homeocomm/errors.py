"""Exception hierarchy shared by every module of the package."""


class HomeoError(Exception):
    """Base class for all package errors."""


class NonFinite(HomeoError, ArithmeticError):
    """Evaluation produced a value outside the representable range."""


class FiberMismatch(HomeoError, ValueError):
    pass


class NotOrientationPreserving(HomeoError, ValueError):
    """A map fails strict monotonicity or swaps the ends."""


class GraphViolation(HomeoError):
    """A level image is not certifiable as a graph over the fiber."""


class NotProper(HomeoError):
    """The suited-band search ran out of room (window or horizon)."""


class BandViolation(HomeoError):
    pass


class NotLoxodromic(HomeoError):
    def __init__(self, condition, detail=""):
        self.condition = condition
        self.detail = detail
        msg = f"condition ({condition}) fails"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EndsMismatch(HomeoError):
    pass


class ToleranceExceeded(HomeoError):
    def __init__(self, report):
        self.report = report
        super().__init__(
            f"max error {report.max_error:.3e} >= tolerance {report.tolerance:.1e}"
        )


class InvalidSpec(HomeoError, ValueError):
    pass
