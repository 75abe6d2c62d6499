"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class KahlerFlowError(Exception):
    exit_code = 1


class InputError(KahlerFlowError, ValueError):
    """Malformed or inconsistent input (shape, grid mismatch, regularity)."""


class ConfigError(InputError):
    exit_code = 2


class DegenerateMetricError(KahlerFlowError):
    """Conformal factor non-finite or e^{2u} below the degeneracy floor."""


class SolvabilityError(InputError):
    """Poisson right-hand side does not integrate to zero."""


class CapabilityError(KahlerFlowError):
    """Requested derivative order or feature is not supported."""


class NumericalError(KahlerFlowError):
    pass


class StepSizeError(InputError):
    """Time step above the explicit stability limit."""


class BlowUpError(KahlerFlowError):
    exit_code = 3

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class DegeneracyError(NumericalError):
    """Discrete holomorphic kernel has the wrong dimension."""


class ResidualExceeded(KahlerFlowError):
    exit_code = 4
