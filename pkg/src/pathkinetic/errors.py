"""Exception hierarchy shared by all modules."""


class KineticError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(KineticError, ValueError):
    """Out-of-range parameters or malformed configuration."""


class StructuralError(KineticError, ValueError):
    """Mismatched shapes, grids, dimensions or state lists."""


class EvaluationError(KineticError, ArithmeticError):
    """A test function or coefficient produced a non-finite value."""


class NumericError(KineticError, ArithmeticError):
    """A numerical sub-solver failed (LP, quadrature)."""


class UnsupportedKindError(KineticError, TypeError):
    """Operation not defined for the measure kind (e.g. moments of signed measures)."""


class CapabilityError(KineticError, TypeError):
    """A backend or operator lacks the capability required by the call."""


class VisibilityError(KineticError, LookupError):
    """A coefficient read the measure path outside its dependence window."""


class LocalityViolated(KineticError):
    """The estimated contraction product is not below one."""

    def __init__(self, product, message=None):
        self.product = product
        super().__init__(
            message
            or f"estimated contraction product {product:.4g} >= 1; "
            "use solve_global_pathindep, solve_adapted or solve_anticipating"
        )


class DegenerateConstants(KineticError):
    """Estimated constants force an unusable number of sub-intervals."""
