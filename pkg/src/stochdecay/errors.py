"""Exception types shared across the package.

Each carries the CLI exit code it maps to, so the command layer can translate
failures without a lookup table.
"""


class StochDecayError(Exception):
    exit_code = 1


class ConfigurationError(StochDecayError, ValueError):
    """Invalid model, noise or experiment parameters."""
    exit_code = 4


class SimulationError(StochDecayError, RuntimeError):
    """A path produced a non-finite state."""
    exit_code = 2

    def __init__(self, message, stream=None, step=None):
        super().__init__(message)
        self.stream = stream
        self.step = step


class QuadratureAccuracyError(StochDecayError, ArithmeticError):
    """Two quadrature estimates of the same expectation disagree."""
    exit_code = 3

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class EstimatorError(StochDecayError, ValueError):
    """A statistic was requested on a record that cannot support it."""
    exit_code = 1
