"""Exception hierarchy.

Every error raised by the package derives from :class:`CTMCError`. The
intermediate classes map one-to-one onto CLI exit codes.
"""

from __future__ import annotations


class CTMCError(Exception):
    """Base class for all package errors."""


# --- model / rate representation -------------------------------------------


class ModelError(CTMCError, ValueError):
    """Invalid rate function or model object."""


class NegativeRate(ModelError):
    def __init__(self, x, value):
        super().__init__(f"rate evaluates to negative value {value!r} at x={x}")
        self.x = x
        self.value = value


class ZeroPower(ModelError):
    def __init__(self, exponent):
        super().__init__(f"negative power x^{exponent} evaluated at x=0")
        self.exponent = exponent


class ValidationError(ModelError):
    """A JumpModel invariant is violated."""


class UnboundedJumpSet(ValidationError):
    pass


class SelfLoopReaction(ValidationError):
    pass


class NonPositiveRateConstant(ValidationError):
    pass


class ModelSyntaxError(CTMCError, ValueError):
    """Parse failure with a source position."""

    def __init__(self, message: str, line: int, col: int, expected: str | None = None):
        text = f"line {line}, col {col}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)
        self.line = line
        self.col = col
        self.expected = expected


# --- asymptotics / classifier ----------------------------------------------


class ClassifierError(CTMCError, ValueError):
    """A classifier precondition does not hold."""


class ConsistencyFailure(ClassifierError):
    """Internal identity between asymptotic parameters failed."""


class PartialParams(ClassifierError):
    pass


class NecessaryConditionViolated(ClassifierError):
    pass


class TwoSidedModel(ClassifierError):
    pass


class NotBDP(ClassifierError):
    pass


class AlphaNonzero(ClassifierError):
    pass


class HypothesisViolated(ClassifierError):
    pass


# --- numerics ---------------------------------------------------------------


class SolverError(CTMCError, RuntimeError):
    """Numerical solve failed or was given unusable input."""


class SingularSystem(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class InvalidTruncation(SolverError):
    pass


class ZeroPivot(SolverError):
    def __init__(self, x):
        super().__init__(f"recursion pivot vanishes at x={x}")
        self.x = x


class NegativeMass(SolverError):
    def __init__(self, x, value=None):
        super().__init__(f"recursion produced negative mass {value!r} at x={x}")
        self.x = x
        self.value = value


class SeedDimension(SolverError):
    pass


class ZeroRateInProduct(SolverError):
    pass


class ThetaMismatch(SolverError):
    pass


class ParameterDomain(SolverError, ValueError):
    pass


class DegenerateTail(SolverError):
    pass


class EmptyAbsorbingSet(CTMCError, ValueError):
    pass


# --- simulation -------------------------------------------------------------


class SimulationError(CTMCError, RuntimeError):
    pass


class ExplosionGuardTripped(SimulationError):
    pass


class InvalidWindow(SimulationError, ValueError):
    pass


class NoAbsorptions(SimulationError):
    pass
