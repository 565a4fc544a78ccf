"""Exception hierarchy shared by all modules."""


class STMPCError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(STMPCError, ValueError):
    pass


class NumericalFailureError(STMPCError, RuntimeError):
    """An iterative routine hit its cap without meeting its tolerance.

    ``residuals`` carries whatever diagnostics the failing routine had.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class SynthesisError(STMPCError):
    """Terminal ingredients cannot be constructed (e.g. not stabilizable)."""


class InitialInfeasibilityError(STMPCError):
    pass


class ContractViolationError(STMPCError):
    """No sampling pattern satisfies the trigger conditions.

    Unreachable for a correctly closed loop; raised with the event context.
    """

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class ConfigError(STMPCError, ValueError):
    pass
