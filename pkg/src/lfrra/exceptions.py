"""Exception types shared across the library."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative kernel failed to reach its tolerance within its budget."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature exceeded its maximum subdivision depth."""


class InadmissibleParametersError(DomainError):
    """A parameter combination is ruled out by the admissibility conditions."""


class VariantMismatchError(InadmissibleParametersError):
    """A forced utility variant is inconsistent with the supplied parameters."""


class NoSolutionError(DomainError):
    """A root-finding problem has no solution in the admissible range."""


class SchemaError(ValueError):
    """An input file violates the dataset schema."""


class EmptyDataError(ValueError):
    """No observations remain after filtering and trimming."""


class InfeasibleError(RuntimeError):
    """No parameter value satisfies the estimation constraints."""


class NonConvergenceError(ConvergenceError):
    """The outer estimation loop did not converge within its iteration cap."""


class MissingCIError(ValueError):
    """An operation requiring bootstrap confidence intervals got none."""
