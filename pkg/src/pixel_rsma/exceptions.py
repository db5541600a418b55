"""Exception and warning types raised across the package."""


class PixelRSMAError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PixelRSMAError, ValueError):
    pass


class SingularSubnetwork(PixelRSMAError, ArithmeticError):
    """The impedance submatrix of the short-circuited pixel ports is singular."""


class ZeroMatrix(PixelRSMAError, ValueError):
    pass


class ZeroPattern(PixelRSMAError, ArithmeticError):
    """An antenna coder whose pattern has no energy in the retained basis."""


class RankDeficient(PixelRSMAError, ArithmeticError):
    """The stacked channel estimate cannot be zero-forced."""


class MissingCodebook(PixelRSMAError, FileNotFoundError):
    pass


class ConfigError(PixelRSMAError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class SolverStall(PixelRSMAError, RuntimeError):
    """The precoder subproblem failed to find a non-worsening point."""


class SolverStallWarning(RuntimeWarning):
    pass
