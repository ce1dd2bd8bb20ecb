"""Exception hierarchy shared by every module of the package."""


class FemtoError(Exception):
    """Base class for all errors raised by femtocoord."""


class ValidationError(FemtoError, ValueError):
    """A scenario, parameter set or config document is malformed.

    ``path`` names the offending field (``"params.max_power_dbm"``,
    ``"nodes[3].serving_fbs"``) so the CLI can point at it.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class InvalidGainError(FemtoError, ValueError):
    pass


class OwnRrmMissingError(FemtoError):
    """The fBS never decoded the RRM of the fMS it serves on a resource."""


class ModeError(FemtoError):
    """The exact objective was requested on a context without exact gains."""


class SentinelLeakError(FemtoError, ValueError):
    """A zero target SINR reached an objective that divides by it."""


class IncompleteRoundError(FemtoError):
    pass
