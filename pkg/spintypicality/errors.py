class SpinError(Exception):
    """Base class of every error raised by spintypicality."""


class SiteIndexError(SpinError, IndexError):
    pass


class DomainError(SpinError, ValueError):
    pass


class DimensionError(SpinError, ValueError):
    pass


class ConfigError(SpinError, ValueError):
    """
    Invalid network or run parameters.

    Parameters
    ----------
    errors : list of str, optional
        One ``"field.path: message"`` entry per violation, used when a whole
        configuration document is validated at once.
    """

    def __init__(self, message, errors=None):
        self.errors = list(errors) if errors else [str(message)]
        super().__init__(message)


class CapabilityError(SpinError, RuntimeError):
    pass


class OutputError(SpinError, OSError):
    pass
