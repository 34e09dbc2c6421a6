"""Exception hierarchy shared by all stabmor modules."""


class StabmorError(Exception):
    """Base class for every error raised by stabmor."""


class DimensionMismatch(StabmorError, ValueError):
    pass


class SingularMatrix(StabmorError, ArithmeticError):
    """A sparse factorisation met a (numerically) zero pivot."""


class PoleProximity(SingularMatrix):
    """``sE - A`` is singular at the requested point: ``s`` is (close to) a pole."""


class SingularAtFrequency(SingularMatrix):
    """``S(omega) = -i omega E - A`` is singular on the imaginary axis."""


class PoleExpansionPoint(SingularMatrix):
    """The Krylov expansion point coincides with a pole of the pencil."""


class SingularEhat(SingularMatrix):
    """The regularised mass matrix could not be factorised."""


class NotAnODE(StabmorError):
    """The mass matrix is singular; regularise the system first."""


class SingularPencil(StabmorError, ArithmeticError):
    """``det(lambda E - A)`` vanishes identically."""


class NoConvergence(StabmorError, ArithmeticError):
    pass


class UnstableSystem(StabmorError):
    pass


class UnstablePencil(StabmorError):
    pass


class ZeroDenominator(StabmorError, ZeroDivisionError):
    pass


class RankDeficient(StabmorError, ValueError):
    pass


class NearSingularCoupling(StabmorError, ArithmeticError):
    """``V^T W`` is too ill-conditioned to biorthogonalise."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NotRegularised(StabmorError, ValueError):
    pass


class MaxIntervalsExceeded(StabmorError):
    """Adaptive quadrature hit its interval cap.

    The partial integral and evaluation count are attached so callers can
    still inspect or use them.
    """

    def __init__(self, message, value=None, node_evals=0, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.node_evals = node_evals
        self.error_estimate = error_estimate


class ParseError(StabmorError, ValueError):
    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.lineno = lineno
        self.path = path


class HeaderMismatch(ParseError):
    pass


class ManifestError(StabmorError, ValueError):
    pass
