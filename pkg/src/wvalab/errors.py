"""Exception hierarchy.

Errors split into two families that the CLI maps to distinct exit codes:
configuration/format problems (bad user input) and numerical/regime problems
(valid input the mathematics cannot handle).
"""


class WVAError(Exception):
    """Base class for every error raised by wvalab."""


class ConfigError(WVAError, ValueError):
    """Invalid user-supplied configuration or data."""


class ParameterError(ConfigError):
    """A model or operation parameter violates its precondition."""


class SpectrumFormatError(ConfigError):
    """A spectrum table or file cannot be ingested."""


class DetectionKindError(ConfigError):
    """An operation that needs both output ports was given a single-port pair."""


class NumericalError(WVAError, ArithmeticError):
    """Valid input that the numerics cannot handle."""


class SingularityError(NumericalError):
    """Evaluation too close to a pole of the weak value."""


class RegimeError(NumericalError):
    """First-order formulas requested outside their approximation regime."""


class DegenerateSignalError(NumericalError):
    """A normalizer vanished (e.g. the difference signal is identically zero)."""


class FeasibilityError(NumericalError):
    """An intensity budget cannot be met by a scheme within its regime."""

    def __init__(self, message, scheme=None):
        super().__init__(message)
        self.scheme = scheme


class CalibrationError(NumericalError):
    """Calibration impossible on the given spectrum and phase bias."""
