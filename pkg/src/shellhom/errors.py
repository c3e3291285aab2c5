"""Exception hierarchy for shellhom.

Every error raised on purpose by the package derives from ``ShellhomError``
so the command line front end can map it to an exit code.
"""


class ShellhomError(Exception):
    """Base class of all package errors."""


class ConfigError(ShellhomError):
    """Malformed or incomplete run configuration."""


class SolverError(ShellhomError):
    """A numerical solve failed."""


class VerificationFailure(ShellhomError):
    """An invariant suite reported a failure."""


# --- expressions -----------------------------------------------------------

class ExprSyntaxError(ShellhomError, SyntaxError):
    """Parse failure with the character position and the expected tokens."""

    def __init__(self, text, position, expected):
        self.text = text
        self.position = position
        self.expected = tuple(sorted(expected))
        msg = (f"syntax error at position {position} in {text!r}: "
               f"expected one of {', '.join(self.expected)}")
        super().__init__(msg)


class UnknownIdentifier(ShellhomError, NameError):
    """Identifier that is neither an allowed variable nor a function."""

    def __init__(self, name, position):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        # NameError.__init__ resets .name, so assign afterwards
        self.name = name
        self.position = position


class DivisionByZero(ShellhomError, ZeroDivisionError):
    """A denominator evaluated to exactly zero."""


# --- geometry --------------------------------------------------------------

class DegenerateChart(ShellhomError):
    """The chart fails to be an immersion at some node."""


class NonPositiveCurvature(ShellhomError):
    """Gauss curvature is not positive where convexity is required."""


class OutOfDomain(ShellhomError):
    """A parameter point lies outside the chart domain."""


class DegenerateImmersion(ShellhomError):
    """The deformation gradient drops rank."""


class StepTooLarge(ShellhomError):
    """Finite difference step is not small compared with the thickness."""


class SingularFactor(ShellhomError):
    """The thickness factor I + h t S leaves the admissible range."""


# --- material / relaxation / cell problems ---------------------------------

class NonQuadraticResidual(ShellhomError):
    """Richardson ladder of the quadratic extraction does not contract."""


class SingularNormalBlock(SolverError):
    """Eliminated normal block is not positive definite."""


class CGNoConvergence(SolverError):
    """Conjugate gradient stopped before reaching the tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"CG did not converge after {iterations} iterations "
                         f"(relative residual {residual:.3e})")


class IndefiniteSystem(SolverError):
    """Negative curvature direction met inside CG."""


class MaterialNotThicknessHomogeneous(ShellhomError):
    """Coefficient fields depend on the thickness variable."""


# --- energy / harness -------------------------------------------------------

class MissingCellForm(ShellhomError):
    """No effective form available for a quadrature node."""


class SizeMismatch(ShellhomError):
    """Node fields do not match the quadrature size."""


class UnderResolved(ShellhomError):
    """Quadrature does not resolve the fastest oscillation."""


class CostGuardExceeded(ShellhomError):
    """Requested experiment needs more evaluations than allowed."""


class NonZeroMeanRho(ShellhomError):
    """Fast test factor does not have zero cell mean."""


class MissingProfile(ShellhomError):
    """A relaxation profile is incomplete."""


class WrongRegimeProfile(ShellhomError):
    """A profile does not belong to the chosen regime."""


class InvalidEpsLaw(ShellhomError):
    """Scale law does not reproduce the declared regime."""
