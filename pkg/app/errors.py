"""Exceptions raised by the calibration toolkit."""


class CalibrationError(Exception):
    """Base class for every toolkit error."""


class ModelError(CalibrationError, ValueError):
    """Sensor model parameters violate their invariants."""


class DegenerateModelError(ModelError):
    """Fringe weights sum to zero, so probabilities are undefined."""


class EmptyDataError(CalibrationError, ValueError):
    """An acquisition with no counts in any channel."""

    def __init__(self, message, phase=None):
        if phase is not None:
            message = f'{message} (phase {phase:g} deg)'
        super().__init__(message)
        self.phase = phase


class DatasetSizeError(CalibrationError, ValueError):
    """Dataset too small for the requested split."""


class ShapeError(CalibrationError, ValueError):
    """Input dimension does not match the network or model."""


class UnboundedCRBError(CalibrationError, ArithmeticError):
    """Fisher information is zero, the bound is infinite."""


class InfiniteInformationError(CalibrationError, ArithmeticError):
    """A channel with zero probability but non-zero derivative."""


class RecordFormatError(CalibrationError, ValueError):
    """Malformed calibration record file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class FormatVersionError(CalibrationError, ValueError):
    """Serialized network or estimator in an unsupported format."""
