"""Exception hierarchy shared by all modules."""


class SsqlabError(Exception):
    """Base class for library errors."""


class DomainError(SsqlabError, ValueError):
    """Argument outside the domain of a function."""


class DegenerateCovarianceError(SsqlabError, ValueError):
    """A covariance-type matrix failed a definiteness check.

    Parameters
    ----------
    which : str
        Name of the offending matrix (``"gamma"``, ``"schur_p"``, ...).
    detail : str
        Human readable description.
    """

    def __init__(self, which, detail=""):
        self.which = which
        msg = f"degenerate covariance: {which}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class GridMismatchError(SsqlabError, ValueError):
    """Two time-frequency representations live on different grids."""


class ConfigError(SsqlabError, ValueError):
    """Invalid configuration document or parameter combination."""


class DataError(SsqlabError, ValueError):
    """Malformed or unusable input data."""


class NumericalError(SsqlabError, ArithmeticError):
    """Internal numerical consistency check failed."""
