"""Exception types shared across modules."""


class DivergenceError(ArithmeticError):
    """An iterate or stage value became non-finite or exceeded the blow-up bound."""

    def __init__(self, message, stage=None, step=None):
        super().__init__(message)
        self.stage = stage
        self.step = step


class NumericError(ArithmeticError):
    """A gradient evaluation returned non-finite values."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class OracleError(RuntimeError):
    """The reference solver or optimum solver failed to converge."""


class CapabilityError(ValueError):
    """A requested quantity needs information the inputs do not carry."""


class IndeterminateOrderError(ValueError):
    """Too few error samples above the floating-point floor to fit a slope."""


class ScanFailure(RuntimeError):
    def __init__(self, message, verdicts=()):
        super().__init__(message)
        self.verdicts = list(verdicts)
