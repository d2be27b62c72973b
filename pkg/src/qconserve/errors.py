"""Exception hierarchy shared by every module."""


class QConserveError(Exception):
    """Base class for all library errors."""


class NotHermitian(QConserveError):
    pass


class DimMismatch(QConserveError):
    pass


class SpaceMismatch(QConserveError):
    pass


class NotProductSpace(QConserveError):
    pass


class UnknownLabel(QConserveError, KeyError):
    pass


class InvalidKernel(QConserveError, ValueError):
    """Row of a Markov kernel is negative or does not sum to one."""


class InvalidPovm(QConserveError, ValueError):
    pass


class InvalidInstrument(QConserveError, ValueError):
    pass


class ExplosionCap(QConserveError):
    """Product outcome space would exceed the configured size cap."""


class InvalidParams(QConserveError, ValueError):
    pass


class GridDeficient(QConserveError):
    """Quadrature grid leaves a non-positive remainder effect."""


class NotEquivalent(QConserveError):
    pass


class NotConserved(QConserveError):
    pass


class DeadEnd(QConserveError):
    """All branch probabilities vanished along a trajectory."""


class LPError(QConserveError):
    pass


class ParseError(QConserveError):
    pass


class ValidationError(QConserveError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
