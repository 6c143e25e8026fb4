"""Exception types raised by the library."""


class ParameterError(ValueError):
    """An argument is outside its valid domain."""


class CalibrationError(RuntimeError):
    """Blind level calibration could not find the requested number of clusters."""


class EqualizerDivergedError(RuntimeError):
    """An adaptive equalizer's output power blew up."""


class NotMeasurableError(RuntimeError):
    """A BER curve does not cross the requested target within the swept range."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""
