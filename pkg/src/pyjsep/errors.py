"""Exceptions and warnings raised by pyjsep."""

from __future__ import annotations

from typing import Any

__all__ = [
    "BadDimension",
    "ConfigInvalid",
    "DegenerateForm",
    "DegenerateSubspace",
    "IndexMismatch",
    "IntegrityWarning",
    "JSepError",
    "NoCertificate",
    "NoDenseOutput",
    "NoConvergence",
    "NoSeries",
    "NonAdmissibleDirection",
    "NonTransverseSection",
    "NotConverged",
    "NotEquilibrium",
    "NotHyperbolic",
    "NotNonnegativeOnNullCone",
    "NotSeparated",
    "NotSeparatedOnStep",
    "NullPivot",
    "OutsideDomain",
    "Singular",
    "SingularPoint",
    "SplitCollapse",
    "StepFailure",
    "SuspectOrbit",
    "ZeroVector",
]


class JSepError(Exception):
    """Base class of every error raised by the package."""


class IntegrityWarning(UserWarning):
    """A numerical self-check (Liouville, cocycle, sampling) exceeded its threshold."""


# -- quadratic forms ---------------------------------------------------------


class DegenerateForm(JSepError, ValueError):
    """The form has an eigenvalue below the degeneracy tolerance."""


class ZeroVector(JSepError, ValueError):
    """A cone classification was requested for the zero vector."""


class NullPivot(JSepError, ArithmeticError):
    """Pseudo Gram-Schmidt met a vector with vanishing J-norm."""


class DegenerateSubspace(JSepError, ValueError):
    """The form restricted to a subspace is degenerate."""


class BadDimension(JSepError, ValueError):
    """A dimension argument is outside its admissible range."""


# -- single operators --------------------------------------------------------


class NotSeparated(JSepError):
    """The operator does not map the positive cone into itself.

    Attributes
    ----------
    witness:
        Optional vector ``v`` with ``J(v) >= 0`` and ``J(Lv) <= 0``.

    """

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness


class NotSeparatedOnStep(NotSeparated):
    """Separation failed on one step of an orbit grid."""

    def __init__(self, message: str, step: int, witness: Any = None):
        super().__init__(message, witness=witness)
        self.step = step


class Singular(JSepError, ValueError):
    """The operator is not invertible."""


class NotNonnegativeOnNullCone(JSepError, ValueError):
    """A symmetric form takes a negative value on the null cone of J."""

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness


# -- flows -------------------------------------------------------------------


class StepFailure(JSepError, RuntimeError):
    """The integrator could not advance (step-size underflow or non-finite state)."""


class NoConvergence(JSepError, RuntimeError):
    """A Newton or shooting iteration did not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NonTransverseSection(JSepError, ValueError):
    """The flow is tangent to the Poincare section at the guess."""


class NotConverged(JSepError, RuntimeError):
    """A long-time average did not settle; ``result`` holds the estimate."""

    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


class NoDenseOutput(JSepError, LookupError):
    """Intermediate times were requested from a result without an interpolant.

    Interpolants are not serialized; integrate again to evaluate between samples.

    """


class SuspectOrbit(JSepError, ValueError):
    """No Floquet multiplier was close enough to 1 to be removed as trivial."""


# -- form fields -------------------------------------------------------------


class OutsideDomain(JSepError, ValueError):
    """A form field was evaluated outside its domain of validity."""


class NotEquilibrium(JSepError, ValueError):
    """The point is not a zero of the vector field."""


class SingularPoint(JSepError, ValueError):
    """The vector field vanishes where a flow direction is required."""


class NonAdmissibleDirection(JSepError, ValueError):
    """The flow direction is not strictly J-positive."""


class NotHyperbolic(JSepError, ValueError):
    """Some eigenvalue or multiplier sits on the neutral axis or circle."""


class IndexMismatch(JSepError, ValueError):
    """The requested index differs from the number of contracting directions."""


class NoCertificate(JSepError, RuntimeError):
    """No adapted form could be constructed to the required accuracy."""


class SplitCollapse(JSepError, RuntimeError):
    """Transported subbundles lost rank or became parallel."""


# -- reporting ---------------------------------------------------------------


class ConfigInvalid(JSepError, ValueError):
    """A scenario file does not match the schema.

    Attributes
    ----------
    field:
        Dotted path of the offending key.
    line:
        One-based line number in the scenario file when known.

    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        location = ""
        if field is not None:
            location += f" [{field}]"
        if line is not None:
            location += f" (line {line})"
        super().__init__(f"{message}{location}")
        self.field = field
        self.line = line


class NoSeries(JSepError, LookupError):
    """The requested analysis produced no time series."""
