"""Quadratic-form fields along orbits.

Form derivatives ``J'``, strict separation along trajectories, the
J-orthogonal linear Poincaré flow with its monotonicity, and construction of
adapted forms at equilibria and periodic orbits.
"""

from __future__ import annotations

import logging
import math
import warnings
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass
from dataclasses import field as dataclass_field
from enum import Enum
from typing import TYPE_CHECKING, Callable

import numpy as np
from monty.json import MSONable
from scipy.linalg import schur, solve_continuous_lyapunov, solve_sylvester

from pyjsep.errors import (
    IndexMismatch,
    IntegrityWarning,
    NoCertificate,
    NonAdmissibleDirection,
    NotEquilibrium,
    NotHyperbolic,
    OutsideDomain,
    SingularPoint,
    ZeroVector,
)
from pyjsep.flow_engine import tangent_cocycle
from pyjsep.jsep_analysis import (
    SeparationLevel,
    check_separation,
    reversed_separation,
    weakest,
)
from pyjsep.pseudo_metric import QuadraticForm, as_form, j_complement, lagrange_diagonalize
from pyjsep.utils import spectral_norm, symmetric_part

if TYPE_CHECKING:
    import numpy.typing as npt

    from pyjsep.flow_engine import CocycleSegment
    from pyjsep.models import VectorFieldModel
    from pyjsep.pseudo_metric import FormLike

__all__ = [
    "ConstantFormField",
    "CylindricalFormField",
    "FormPositivity",
    "FunctionFormField",
    "LinearPoincareFlow",
    "MonotoneVerdict",
    "MonotonicityReport",
    "OrbitSeparationReport",
    "PoincareProjection",
    "QuadraticFormField",
    "ScaledFormField",
    "adapted_form_search",
    "check_lpf_strict_monotone",
    "check_separation_along_orbit",
    "floquet_adapted_form",
    "form_derivative",
    "form_derivative_operator",
    "linear_poincare_flow",
    "poincare_project",
    "singularity_form_positivity",
]

logger = logging.getLogger(__name__)

STRICTNESS_TOL = 1e-8
PROJECTOR_TOL = 1e-10
LPF_COCYCLE_TOL = 1e-6


class QuadraticFormField(MSONable, metaclass=ABCMeta):
    """An assignment ``x -> J_x`` of non-degenerate forms with constant index."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the phase space."""

    @property
    @abstractmethod
    def index_q(self) -> int:
        """Index of every ``J_x``."""

    @abstractmethod
    def _matrix(self, x: npt.NDArray) -> npt.NDArray:
        pass

    @abstractmethod
    def derivative(self, x: npt.ArrayLike, v: npt.ArrayLike) -> npt.NDArray:
        """Directional derivative ``DJ(x)[v]`` as a symmetric matrix."""

    def contains(self, x: npt.ArrayLike) -> bool:
        """True when ``x`` lies in the region where the field is defined."""
        return True

    def matrix(self, x: npt.ArrayLike) -> npt.NDArray:
        """Matrix of ``J_x``."""
        point = np.asarray(x, dtype=float)
        if not self.contains(point):
            raise OutsideDomain(f"Point {point} lies outside the domain of the form field")
        return self._matrix(point)

    def at(self, x: npt.ArrayLike) -> QuadraticForm:
        """``J_x`` as a validated QuadraticForm with the field's index."""
        form = QuadraticForm(self.matrix(x))
        if form.index_q != self.index_q:
            raise ValueError(
                f"Form at {np.asarray(x)} has index {form.index_q}, field index is {self.index_q}"
            )
        return form

    def derivative_along(self, model: VectorFieldModel, x: npt.ArrayLike) -> npt.NDArray:
        """``∇_X J(x)``, the derivative of the field along the flow."""
        point = np.asarray(x, dtype=float)
        return self.derivative(point, model(point))

    def check_index(self, points: npt.ArrayLike) -> None:
        """Validate non-degeneracy and the index at sampled points."""
        for point in np.atleast_2d(np.asarray(points, dtype=float)):
            self.at(point)

    def __mul__(self, factor: float) -> ScaledFormField:
        """Return the field ``c J``."""
        return ScaledFormField(self, factor)

    __rmul__ = __mul__

    def __neg__(self) -> ScaledFormField:
        """Return the time-reversal field ``-J``."""
        return ScaledFormField(self, -1.0)


class ConstantFormField(QuadraticFormField):
    """The same form ``J`` at every point."""

    def __init__(self, form: FormLike):
        self.form = as_form(form)

    @property
    def dim(self) -> int:
        return self.form.dim

    @property
    def index_q(self) -> int:
        return self.form.index_q

    def _matrix(self, x):
        return self.form.matrix

    def derivative(self, x, v):
        return np.zeros((self.dim, self.dim))


class ScaledFormField(QuadraticFormField):
    """A non-zero multiple ``c J`` of another field."""

    def __init__(self, base: QuadraticFormField, factor: float):
        if factor == 0:
            raise ValueError("Scale factor must be non-zero")
        self.base = base
        self.factor = float(factor)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def index_q(self) -> int:
        return self.base.index_q if self.factor > 0 else self.dim - self.base.index_q

    def contains(self, x):
        return self.base.contains(x)

    def _matrix(self, x):
        return self.factor * self.base.matrix(x)

    def derivative(self, x, v):
        return self.factor * self.base.derivative(x, v)


class FunctionFormField(QuadraticFormField):
    """Field given by a matrix-valued function.

    Without an analytic ``derivative_func`` the directional derivative is
    a central difference with step ``h``. Instances hold callables and are
    not serializable.

    """

    def __init__(
        self,
        func: Callable[[npt.NDArray], npt.ArrayLike],
        dim: int,
        index_q: int,
        derivative_func: Callable[[npt.NDArray, npt.NDArray], npt.ArrayLike] | None = None,
        h: float = 1e-4,
        domain: Callable[[npt.NDArray], bool] | None = None,
    ):
        self.func = func
        self._dim = int(dim)
        self._index_q = int(index_q)
        self.derivative_func = derivative_func
        self.h = float(h)
        self.domain = domain

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def index_q(self) -> int:
        return self._index_q

    def contains(self, x):
        return True if self.domain is None else bool(self.domain(np.asarray(x, dtype=float)))

    def _matrix(self, x):
        return symmetric_part(self.func(x))

    def derivative(self, x, v):
        point = np.asarray(x, dtype=float)
        vec = np.asarray(v, dtype=float)
        if self.derivative_func is not None:
            return symmetric_part(self.derivative_func(point, vec))
        forward = self.matrix(point + self.h * vec)
        backward = self.matrix(point - self.h * vec)
        return symmetric_part((forward - backward) / (2 * self.h))


class CylindricalFormField(QuadraticFormField):
    """Form ``a r̂r̂ᵀ + b θ̂θ̂ᵀ + c ẑẑᵀ`` in cylindrical frames of R³.

    Defined off the axis ``x = y = 0``; the derivative is in closed form.

    """

    def __init__(
        self,
        radial: float = -1.0,
        angular: float = 1.0,
        axial: float = -1.0,
        min_radius: float = 1e-8,
    ):
        if 0.0 in (radial, angular, axial):
            raise ValueError("Cylindrical weights must be non-zero")
        self.radial = float(radial)
        self.angular = float(angular)
        self.axial = float(axial)
        self.min_radius = float(min_radius)

    @property
    def dim(self) -> int:
        return 3

    @property
    def index_q(self) -> int:
        return sum(w < 0 for w in (self.radial, self.angular, self.axial))

    def contains(self, x):
        return bool(math.hypot(x[0], x[1]) > self.min_radius)

    @staticmethod
    def _frame(x):
        r = math.hypot(x[0], x[1])
        r_hat = np.array([x[0] / r, x[1] / r, 0.0])
        t_hat = np.array([-x[1] / r, x[0] / r, 0.0])
        return r, r_hat, t_hat

    def _matrix(self, x):
        _, r_hat, t_hat = self._frame(x)
        z_hat = np.array([0.0, 0.0, 1.0])
        return (
            self.radial * np.outer(r_hat, r_hat)
            + self.angular * np.outer(t_hat, t_hat)
            + self.axial * np.outer(z_hat, z_hat)
        )

    def derivative(self, x, v):
        point = np.asarray(x, dtype=float)
        if not self.contains(point):
            raise OutsideDomain(f"Point {point} lies on the axis of the cylindrical field")
        r, r_hat, t_hat = self._frame(point)
        d_theta = (point[0] * v[1] - point[1] * v[0]) / r**2
        mixed = np.outer(r_hat, t_hat) + np.outer(t_hat, r_hat)
        return (self.radial - self.angular) * d_theta * mixed


def form_derivative_operator(
    field: QuadraticFormField, model: VectorFieldModel, x: npt.ArrayLike
) -> npt.NDArray:
    """Symmetric operator ``J A + Aᵀ J + ∇_X J`` at ``x`` with ``A = DX(x)``."""
    point = np.asarray(x, dtype=float)
    jmat = field.matrix(point)
    amat = model.jacobian(point)
    return symmetric_part(jmat @ amat + amat.T @ jmat + field.derivative_along(model, point))


def form_derivative(
    field: QuadraticFormField, model: VectorFieldModel, x: npt.ArrayLike, v: npt.ArrayLike
) -> float:
    """Return ``J'(v) = d/dt J_{X_t x}(DX_t v)`` at ``t = 0``.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    x:
        Base point in the field domain
    v:
        Non-zero tangent vector

    Returns
    -------
    float:
        ``<(J A + Aᵀ J + ∇_X J) v, v>``

    """
    vec = np.asarray(v, dtype=float)
    if not np.any(vec):
        raise ZeroVector("J' is evaluated on non-zero vectors")
    return float(vec @ form_derivative_operator(field, model, x) @ vec)


@dataclass
class FormPositivity(MSONable):
    """Positivity of ``J A + Aᵀ J`` at an equilibrium.

    Attributes
    ----------
    positive: bool
        True when the form derivative is positive definite.
    min_eigenvalue: float
        Smallest eigenvalue of ``J A + Aᵀ J``.
    witness: NDArray | None
        Unit eigenvector of the smallest eigenvalue when not positive.

    """

    positive: bool
    min_eigenvalue: float
    witness: npt.NDArray | None = None

    @property
    def verdict(self) -> str:
        """``"positive_definite"`` or ``"fails"``."""
        return "positive_definite" if self.positive else "fails"


def singularity_form_positivity(
    field: QuadraticFormField,
    model: VectorFieldModel,
    sigma: npt.ArrayLike,
    tol: float = 1e-9,
    equilibrium_tol: float = 1e-8,
) -> FormPositivity:
    """Check ``J'(v) > 0`` for every ``v`` at an equilibrium ``σ``.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    sigma:
        An equilibrium of ``model``
    tol:
        Strictness threshold relative to ``||J|| ||A||``
    equilibrium_tol:
        Largest admissible ``||X(σ)||``

    Returns
    -------
    FormPositivity:
        Minimum eigenvalue and, on failure, a witness

    """
    point = np.asarray(sigma, dtype=float)
    residual = float(np.linalg.norm(model(point)))
    if residual > equilibrium_tol:
        raise NotEquilibrium(f"||X(σ)|| = {residual:.3e} exceeds {equilibrium_tol:.1e}")
    op = form_derivative_operator(field, model, point)
    evals, evecs = np.linalg.eigh(op)
    scale = spectral_norm(field.matrix(point)) * spectral_norm(model.jacobian(point))
    positive = bool(evals[0] > tol * scale)
    return FormPositivity(
        positive=positive,
        min_eigenvalue=float(evals[0]),
        witness=None if positive else evecs[:, 0],
    )


@dataclass
class OrbitSeparationReport(MSONable):
    """Separation of the cocycle along an orbit, interval by interval.

    Attributes
    ----------
    level: SeparationLevel
        Weakest interval verdict.
    times: NDArray
        Grid ``t_0 = 0 < t_1 < ... < t_m = T`` of the final pass.
    verdicts: list[SeparationVerdict]
        Verdict of each interval ``[t_{i-1}, t_i]``.
    witness_interval: tuple | None
        First interval that is not separated.
    witness: NDArray | None
        Ambient unit vector at the start of that interval swapping the cones.
    reversal_consistent: bool
        Every strictly separated interval is strictly (-J)-separated backwards.
    grid_converged: bool
        The verdict was stable over two grid doublings.

    """

    level: SeparationLevel
    times: npt.NDArray
    verdicts: list = dataclass_field(default_factory=list)
    witness_interval: tuple | None = None
    witness: npt.NDArray | None = None
    reversal_consistent: bool = True
    grid_converged: bool = True

    @property
    def margins(self) -> npt.NDArray:
        """S-procedure margin per interval."""
        return np.array([v.margin for v in self.verdicts])


def _interval_verdicts(
    field: QuadraticFormField,
    model: VectorFieldModel,
    x0: npt.NDArray,
    times: npt.NDArray,
    tol: float,
    seed: int | None,
    integrator: dict,
):
    verdicts, witness_interval, witness = [], None, None
    consistent = True
    x = x0
    frame_s = lagrange_diagonalize(field.at(x))
    ref = frame_s.reference
    for s, t in zip(times[:-1], times[1:]):
        segment = tangent_cocycle(model, x, t - s, verify=False, **integrator)
        frame_t = lagrange_diagonalize(field.at(segment.end_point))
        if frame_t.signature_pattern != frame_s.signature_pattern:
            raise ValueError(f"Form index changes along the orbit near t={t}")
        operator = frame_s.transport(segment.matrix, frame_t)
        verdict = check_separation(ref, operator, tol=tol, seed=seed)
        verdicts.append(verdict)
        if verdict.is_strict:
            backward = reversed_separation(ref, operator, tol=tol, seed=seed)
            consistent = consistent and backward.is_strict
        if witness_interval is None and not verdict.is_separated:
            witness_interval = (float(s), float(t))
            vec = frame_s.basis @ verdict.witness
            witness = vec / np.linalg.norm(vec)
        x, frame_s = segment.end_point, frame_t
    return verdicts, witness_interval, witness, consistent


def check_separation_along_orbit(
    field: QuadraticFormField,
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    times: npt.ArrayLike | None = None,
    density: float = 8.0,
    max_doublings: int = 4,
    tol: float = 1e-9,
    seed: int | None = 0,
    **integrator,
) -> OrbitSeparationReport:
    """Check that ``DX`` maps ``C+ ∪ C0`` into ``C+`` along the orbit of ``x0``.

    Each grid interval's cocycle is expressed in the adapted frames of the
    forms at its endpoints and handed to :func:`check_separation`.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    x0:
        Initial point
    T:
        Duration (``T = 0`` is separated, not strictly)
    times:
        An explicit grid from 0 to ``T``; disables grid refinement
    density:
        Initial grid intervals per unit time
    max_doublings:
        Refinement cap
    tol:
        Separation tolerance
    seed:
        Seed of the separation cross-check sampler
    integrator:
        ``rtol``, ``atol`` and ``method`` for the cocycle

    Returns
    -------
    OrbitSeparationReport:
        The weakest verdict and the per-interval record

    """
    point = np.asarray(x0, dtype=float)
    field.matrix(point)
    if T == 0:
        return OrbitSeparationReport(level=SeparationLevel.SEPARATED, times=np.array([0.0]))
    if T < 0:
        raise ValueError("Orbit separation is checked forward in time")

    if times is not None:
        grid = np.asarray(times, dtype=float)
        if grid[0] != 0 or not np.isclose(grid[-1], T) or np.any(np.diff(grid) <= 0):
            raise ValueError("Grid must increase strictly from 0 to T")
        verdicts, w_int, witness, consistent = _interval_verdicts(
            field, model, point, grid, tol, seed, integrator
        )
        return OrbitSeparationReport(
            level=weakest(v.level for v in verdicts),
            times=grid,
            verdicts=verdicts,
            witness_interval=w_int,
            witness=witness,
            reversal_consistent=consistent,
        )

    n_intervals = max(math.ceil(density * T), 1)
    previous, stable = None, 0
    for doubling in range(max_doublings + 1):
        grid = np.linspace(0.0, T, n_intervals + 1)
        verdicts, w_int, witness, consistent = _interval_verdicts(
            field, model, point, grid, tol, seed, integrator
        )
        level = weakest(v.level for v in verdicts)
        stable = stable + 1 if level is previous else 0
        logger.debug("Grid of %d intervals: %s (stable %d)", n_intervals, level.value, stable)
        if stable >= 2:
            break
        previous = level
        if doubling < max_doublings:
            n_intervals *= 2
    converged = stable >= 2
    if not converged:
        warnings.warn(
            f"Orbit separation verdict not grid-converged after {max_doublings} doublings",
            IntegrityWarning,
            stacklevel=2,
        )
    return OrbitSeparationReport(
        level=level,
        times=grid,
        verdicts=verdicts,
        witness_interval=w_int,
        witness=witness,
        reversal_consistent=consistent,
        grid_converged=converged,
    )


@dataclass
class PoincareProjection(MSONable):
    """J-orthogonal splitting ``R^n = span X(x) ⊕ N_x``.

    Attributes
    ----------
    base_point: NDArray
        ``x``.
    direction: NDArray
        ``X(x)``.
    normal_basis: NDArray
        Orthonormal columns spanning ``N_x``.
    projector: NDArray
        ``Π_x``, the J-orthogonal projection onto ``N_x`` along ``X(x)``.
    normal_form: QuadraticForm
        ``J`` restricted to ``N_x`` in ``normal_basis`` coordinates.

    """

    base_point: npt.NDArray
    direction: npt.NDArray
    normal_basis: npt.NDArray
    projector: npt.NDArray
    normal_form: QuadraticForm

    def residuals(self) -> dict[str, float]:
        """Projector identities ``Π² = Π``, ``Π X = 0`` and ``Π N = N``."""
        proj = self.projector
        scale = max(spectral_norm(proj), 1.0)
        return {
            "idempotence": spectral_norm(proj @ proj - proj) / scale,
            "annihilation": float(np.linalg.norm(proj @ self.direction))
            / float(np.linalg.norm(self.direction)),
            "range": spectral_norm(proj @ self.normal_basis - self.normal_basis),
        }


def poincare_project(
    field: QuadraticFormField,
    model: VectorFieldModel,
    x: npt.ArrayLike,
    tol: float = 1e-9,
    singular_tol: float = 1e-12,
) -> PoincareProjection:
    """Build ``N_x`` and ``Π_x`` at a regular point with ``J_x(X(x)) > 0``.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    x:
        A regular point
    tol:
        Relative threshold on ``J_x(X)/(||J|| ||X||²)``
    singular_tol:
        ``||X(x)||`` at or below this is a singularity

    Returns
    -------
    PoincareProjection:
        Normal space, projector and restricted form

    """
    point = np.asarray(x, dtype=float)
    direction = model(point)
    if float(np.linalg.norm(direction)) <= singular_tol:
        raise SingularPoint(f"X vanishes at {point}")
    jform = field.at(point)
    jx = jform.matrix @ direction
    jxx = float(direction @ jx)
    if jxx <= tol * jform.norm * float(direction @ direction):
        raise NonAdmissibleDirection(f"J(X) = {jxx:.3e} is not positive at {point}")
    normal = j_complement(jform, direction)
    pivots = np.argmax(np.abs(normal), axis=0)
    normal = normal * np.sign(normal[pivots, np.arange(normal.shape[1])])
    projector = np.eye(len(point)) - np.outer(direction, jx) / jxx
    proj = PoincareProjection(
        base_point=point,
        direction=direction,
        normal_basis=normal,
        projector=projector,
        normal_form=jform.congruent(normal),
    )
    worst = max(proj.residuals().values())
    if worst > PROJECTOR_TOL:
        warnings.warn(
            f"Poincaré projector identities violated by {worst:.2e}", IntegrityWarning, stacklevel=2
        )
    return proj


@dataclass
class LinearPoincareFlow(MSONable):
    """Matrix of ``P^t = Π_{X_t x} DX_t`` from ``N_x`` to ``N_{X_t x}``.

    Attributes
    ----------
    operator: NDArray
        ``(n-1) x (n-1)`` matrix in the orthonormal normal bases.
    start: PoincareProjection
        Projection data at ``x``.
    end: PoincareProjection
        Projection data at ``X_t x``.
    duration: float
        ``t``.
    cocycle_residual: float
        Relative mismatch of ``P^t`` against ``P^{t/2} P^{t/2}``.

    """

    operator: npt.NDArray
    start: PoincareProjection
    end: PoincareProjection
    duration: float
    cocycle_residual: float = float("nan")


def _lpf_matrix(start: PoincareProjection, end: PoincareProjection, tangent: npt.NDArray):
    return end.normal_basis.T @ end.projector @ tangent @ start.normal_basis


def linear_poincare_flow(
    field: QuadraticFormField,
    model: VectorFieldModel,
    x: npt.ArrayLike,
    t: float,
    segment: CocycleSegment | None = None,
    **integrator,
) -> LinearPoincareFlow:
    """Linear Poincaré flow over ``[0, t]`` from ``x``.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    x:
        Regular admissible start point
    t:
        Duration
    segment:
        A precomputed cocycle of ``x`` over ``[0, t]`` with dense output
    integrator:
        ``rtol``, ``atol`` and ``method`` for the cocycle

    Returns
    -------
    LinearPoincareFlow:
        The operator together with both projections

    """
    start = poincare_project(field, model, x)
    if t == 0:
        size = start.normal_basis.shape[1]
        return LinearPoincareFlow(operator=np.eye(size), start=start, end=start, duration=0.0)
    if segment is None:
        segment = tangent_cocycle(model, start.base_point, t, verify=False, **integrator)
    end = poincare_project(field, model, segment.end_point)
    operator = _lpf_matrix(start, end, segment.matrix)

    residual = float("nan")
    try:
        mid = poincare_project(field, model, segment.state_at(0.5 * t))
    except (NonAdmissibleDirection, SingularPoint, OutsideDomain):
        logger.debug("Midpoint not admissible; linear Poincaré flow cocycle left unchecked")
        mid = None
    if segment._dense is not None and mid is not None:
        first_half = segment.matrix_at(0.5 * t)
        second_half = segment.matrix @ np.linalg.inv(first_half)
        composed = _lpf_matrix(mid, end, second_half) @ _lpf_matrix(start, mid, first_half)
        residual = spectral_norm(composed - operator) / max(spectral_norm(operator), 1e-300)
        if residual > LPF_COCYCLE_TOL:
            warnings.warn(
                f"Linear Poincaré flow cocycle mismatch {residual:.2e}",
                IntegrityWarning,
                stacklevel=2,
            )
    return LinearPoincareFlow(
        operator=operator, start=start, end=end, duration=float(t), cocycle_residual=residual
    )


class MonotoneVerdict(str, Enum):
    """Outcome of the infinitesimal linear Poincaré flow monotonicity check."""

    STRICT = "strict"
    NON_STRICT = "non_strict"
    FAILS = "fails"


@dataclass
class MonotonicityReport(MSONable):
    """Per-sample minima of ``∂_t J(P^t v)|_{t=0}`` over unit ``v ∈ N_x``.

    Attributes
    ----------
    times: NDArray
        Orbit time of each sample (sample index when unknown).
    minima: NDArray
        Per-sample minimum.
    thresholds: NDArray
        Per-sample strictness threshold.
    global_minimum: float
        Smallest entry of ``minima``.
    witness: NDArray
        Ambient unit vector attaining ``global_minimum``.
    verdict: MonotoneVerdict
        ``STRICT`` iff every minimum exceeds its threshold.

    """

    times: npt.NDArray
    minima: npt.NDArray
    thresholds: npt.NDArray
    global_minimum: float
    witness: npt.NDArray
    verdict: MonotoneVerdict


def check_lpf_strict_monotone(
    field: QuadraticFormField,
    model: VectorFieldModel,
    samples: npt.ArrayLike,
    times: npt.ArrayLike | None = None,
    tol: float = STRICTNESS_TOL,
) -> MonotonicityReport:
    """Check strict J-monotonicity of the linear Poincaré flow at orbit samples.

    At ``t = 0`` the derivative of ``J(P^t v)`` equals ``J'(v)`` for ``v ∈ N_x``,
    so each sample reduces to the smallest eigenvalue of ``J'`` compressed to
    ``N_x``.

    Parameters
    ----------
    field:
        The form field
    model:
        The vector field
    samples:
        Regular admissible orbit points, one per row
    times:
        Orbit times of the samples
    tol:
        Strictness tolerance relative to ``||A|| ||J||`` at each sample

    Returns
    -------
    MonotonicityReport:
        Minima, witness and verdict

    """
    points = np.atleast_2d(np.asarray(samples, dtype=float))
    minima, thresholds, witnesses = [], [], []
    for point in points:
        proj = poincare_project(field, model, point)
        basis = proj.normal_basis
        compressed = symmetric_part(basis.T @ form_derivative_operator(field, model, point) @ basis)
        evals, evecs = np.linalg.eigh(compressed)
        minima.append(float(evals[0]))
        thresholds.append(
            tol * spectral_norm(model.jacobian(point)) * spectral_norm(field.matrix(point))
        )
        witnesses.append(basis @ evecs[:, 0])
    minima_arr = np.asarray(minima)
    thresholds_arr = np.asarray(thresholds)
    worst = int(np.argmin(minima_arr))
    if np.all(minima_arr > thresholds_arr):
        verdict = MonotoneVerdict.STRICT
    elif np.any(minima_arr < -thresholds_arr):
        verdict = MonotoneVerdict.FAILS
    else:
        verdict = MonotoneVerdict.NON_STRICT
    return MonotonicityReport(
        times=np.arange(len(points), dtype=float) if times is None else np.asarray(times, float),
        minima=minima_arr,
        thresholds=thresholds_arr,
        global_minimum=float(minima_arr[worst]),
        witness=witnesses[worst],
        verdict=verdict,
    )


def _real_eigenbasis(mat: npt.NDArray) -> tuple[npt.NDArray, npt.NDArray]:
    """Real basis of eigenvectors, complex pairs split into real and imaginary parts."""
    evals, evecs = np.linalg.eig(mat)
    columns, values = [], []
    for lam, vec in zip(evals, evecs.T):
        if abs(lam.imag) <= 1e-12 * max(abs(lam), 1.0):
            columns.append(vec.real)
            values.append(complex(lam.real))
        elif lam.imag > 0:
            columns.extend([vec.real, vec.imag])
            values.extend([lam, lam])
    return np.column_stack(columns), np.asarray(values)


def _form_in_basis(basis: npt.NDArray, diagonal: npt.NDArray) -> npt.NDArray:
    inv = np.linalg.inv(basis)
    return symmetric_part(inv.T @ diagonal @ inv)


def _normalized(mat: npt.NDArray) -> QuadraticForm:
    return QuadraticForm(mat / float(np.abs(np.linalg.eigvalsh(mat)).max()))


def adapted_form_search(
    operator: npt.ArrayLike, q: int, tol: float = 1e-8, max_condition: float = 1e8
) -> QuadraticForm:
    """Build ``J`` of index ``q`` with ``J A + Aᵀ J`` positive definite.

    A diagonalizable ``A`` gets ``J = W⁻ᵀ diag(±1) W⁻¹`` from a real
    eigenbasis ``W``. Otherwise the stable and unstable blocks of an ordered
    real Schur form are decoupled with a Sylvester equation and weighted by
    Lyapunov-equation solutions.

    Parameters
    ----------
    operator:
        The linearization ``A``
    q:
        Number of eigenvalues with negative real part
    tol:
        Hyperbolicity threshold on ``|Re λ|`` relative to ``max(1, ||A||)``
    max_condition:
        Largest admissible condition number of the eigenbasis

    Returns
    -------
    QuadraticForm:
        The adapted form, normalized to unit norm

    """
    amat = np.asarray(operator, dtype=float)
    n = amat.shape[0]
    evals = np.linalg.eigvals(amat)
    if np.abs(evals.real).min() <= tol * max(1.0, spectral_norm(amat)):
        raise NotHyperbolic(f"Eigenvalue with |Re| <= {tol:.1e}: {evals}")
    n_stable = int(np.sum(evals.real < 0))
    if n_stable != q:
        raise IndexMismatch(f"Operator has {n_stable} stable eigenvalues, requested index {q}")

    basis, values = _real_eigenbasis(amat)
    if basis.shape == (n, n) and np.linalg.cond(basis) < max_condition:
        diagonal = np.diag(np.where(values.real < 0, -1.0, 1.0))
        jmat = _form_in_basis(basis, diagonal)
        logger.debug("Adapted form from the eigenbasis (cond %.2e)", np.linalg.cond(basis))
    else:
        tmat, zmat, _ = schur(amat, output="real", sort="lhp")
        t11, t12, t22 = tmat[:q, :q], tmat[:q, q:], tmat[q:, q:]
        coupling = solve_sylvester(t11, -t22, -t12) if 0 < q < n else np.zeros((q, n - q))
        block = np.eye(n)
        block[:q, q:] = coupling
        weights = np.zeros((n, n))
        if q:
            weights[:q, :q] = -solve_continuous_lyapunov(t11.T, -np.eye(q))
        if q < n:
            weights[q:, q:] = solve_continuous_lyapunov(t22.T, np.eye(n - q))
        jmat = _form_in_basis(zmat @ block, symmetric_part(weights))
        logger.debug("Adapted form from the ordered Schur form")

    try:
        jform = _normalized(jmat)
    except ValueError as exc:
        raise NoCertificate(f"Adapted form is degenerate: {exc}") from exc
    derivative = np.linalg.eigvalsh(symmetric_part(jform.matrix @ amat + amat.T @ jform.matrix))
    if jform.index_q != q or derivative[0] <= tol * spectral_norm(amat):
        raise NoCertificate("Constructed form does not certify the linearization")
    return jform


def floquet_adapted_form(
    monodromy: npt.ArrayLike, flow_direction: npt.ArrayLike, max_condition: float = 1e10
) -> QuadraticForm:
    """Form adapted to the Floquet splitting of a period map.

    ``J`` is negative on the contracting multipliers and positive on the
    expanding ones. The flow direction is positive, except for sources
    (no contracting multiplier) where it is the only negative direction.

    Parameters
    ----------
    monodromy:
        Period map ``M(T)`` at an orbit point
    flow_direction:
        ``X`` at that point, the eigenvector of the trivial multiplier
    max_condition:
        Largest admissible condition number of the Floquet basis

    Returns
    -------
    QuadraticForm:
        The adapted form, normalized to unit norm

    """
    mmat = np.asarray(monodromy, dtype=float)
    flow = np.asarray(flow_direction, dtype=float)
    basis, values = _real_eigenbasis(mmat)
    trivial = int(np.argmin(np.abs(values - 1.0)))
    basis[:, trivial] = flow / np.linalg.norm(flow)
    nontrivial = np.delete(np.abs(values), trivial)
    source = not np.any(nontrivial < 1.0)
    signs = np.where(np.abs(values) < 1.0, -1.0, 1.0)
    signs[trivial] = -1.0 if source else 1.0
    if np.linalg.cond(basis) >= max_condition:
        raise NoCertificate("Floquet basis is too ill-conditioned")
    return _normalized(_form_in_basis(basis, np.diag(signs)))
