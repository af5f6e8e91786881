"""Exception and warning types raised by the solvers."""


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with each other."""


class DomainError(ValueError):
    """An input lies outside the domain of the operation."""


class NumericalError(ArithmeticError):
    """Plain-domain scaling arithmetic broke down."""


class NumericalUnderflow(NumericalError):
    pass


class NumericalOverflow(NumericalError):
    pass


class ProvenanceMismatch(ValueError):
    """A trace and a reference solution were computed on different problems."""


class NotConvergedWarning(RuntimeWarning):
    pass
