"""Orbits, tangent cocycles, critical elements and Lyapunov exponents.

State and tangent equations are integrated jointly with scipy's embedded
Runge-Kutta pairs so that the variational equation sees the same dense
trajectory as the orbit.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Union

import numpy as np
from monty.json import MSONable
from scipy.integrate import solve_ivp

from pyjsep.errors import (
    BadDimension,
    IntegrityWarning,
    NoConvergence,
    NoDenseOutput,
    NonTransverseSection,
    NotConverged,
    StepFailure,
)
from pyjsep.utils import compound_matrix, spectral_norm

if TYPE_CHECKING:
    import numpy.typing as npt

    from pyjsep.models import VectorFieldModel

__all__ = [
    "CocycleSegment",
    "Equilibrium",
    "LyapunovSpectrum",
    "PeriodicOrbit",
    "Section",
    "Trajectory",
    "find_equilibria",
    "find_periodic_orbit",
    "floquet_analysis",
    "integrate",
    "lyapunov_exponents",
    "orbit_samples",
    "section_returns",
    "tangent_cocycle",
    "wedge_cocycle",
]

logger = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-12
LIOUVILLE_TOL = 1e-6
COCYCLE_TOL = 1e-5
TRIVIAL_WINDOW = 1e-4

INTERP_SAMPLES = 8

_STAGES = {"RK45": 6, "RK23": 3, "DOP853": 12}


def _rejected_steps_estimate(method: str, nfev: int, accepted: int) -> int | None:
    """Rejected steps inferred from the evaluation count; None for other methods."""
    stages = _STAGES.get(method)
    if stages is None:
        return None
    extra = 3 * accepted if method == "DOP853" else 0
    return max((nfev - 2 - extra) // stages - accepted, 0)


def _solve(
    rhs: Callable,
    y0: npt.NDArray,
    duration: float,
    rtol: float,
    atol: float,
    method: str,
    **kwargs,
):
    if not np.isfinite(duration):
        raise ValueError("Integration time must be finite")
    if rtol <= 0 or atol <= 0:
        raise ValueError("Tolerances must be positive")
    sol = solve_ivp(rhs, (0.0, duration), y0, method=method, rtol=rtol, atol=atol, **kwargs)
    if sol.status == -1:
        raise StepFailure(f"Integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise StepFailure("Integration produced non-finite states")
    return sol


def _interpolation_error(
    rhs: Callable, dense, rtol: float, atol: float, method: str, samples: int = INTERP_SAMPLES
) -> float:
    """Dense-output error at step midpoints in the weighted RMS norm of the step control.

    Up to ``samples`` accepted steps are re-integrated from their left end to
    their midpoint at a hundredth of the tolerances. A value above 1 means the
    interpolant is less accurate than the configured tolerance.
    """
    ts = dense.ts
    n_steps = len(ts) - 1
    picks = np.unique(np.linspace(0, n_steps - 1, min(samples, n_steps)).round().astype(int))
    worst = 0.0
    for i in picks:
        start, mid = ts[i], 0.5 * (ts[i] + ts[i + 1])
        ref = solve_ivp(
            rhs,
            (start, mid),
            dense(start),
            method=method,
            rtol=max(rtol * 1e-2, 1e-13),
            atol=atol * 1e-2,
        )
        if ref.status != 0:
            continue
        exact = ref.y[:, -1]
        scale = atol + rtol * np.abs(exact)
        worst = max(worst, float(np.sqrt(np.mean(((dense(mid) - exact) / scale) ** 2))))
    return worst


@dataclass
class Trajectory(MSONable):
    """Sampled orbit with integrator statistics.

    Attributes
    ----------
    times: NDArray
        Sample times (model time units).
    states: NDArray
        States, one row per sample time.
    stats: dict
        ``n_steps``, ``rejected_steps_estimate``, ``nfev``, ``interp_error``,
        ``rtol``, ``atol``, ``method``. ``interp_error`` is in units of the
        configured tolerance (see :func:`integrate`).

    """

    times: npt.NDArray
    states: npt.NDArray
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        """Coerce arrays and attach an empty interpolant."""
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if not np.all(np.isfinite(self.states)):
            raise StepFailure("Trajectory contains non-finite states")
        self._dense = None

    @property
    def final_state(self) -> npt.NDArray:
        """State at the last sample time."""
        return self.states[-1]

    def at(self, t: float | npt.ArrayLike) -> npt.NDArray:
        """Dense-output state(s) at time(s) ``t``.

        Raises
        ------
        NoDenseOutput:
            When the trajectory was restored from a serialized form, unless
            ``t`` is a stored sample time.

        """
        if self._dense is None:
            scalar = np.ndim(t) == 0
            out = []
            for ti in np.atleast_1d(np.asarray(t, dtype=float)):
                hit = np.flatnonzero(np.isclose(self.times, ti, rtol=0.0, atol=1e-12))
                if not len(hit):
                    raise NoDenseOutput(
                        f"No interpolant for t={ti}; integrate again to sample between steps"
                    )
                out.append(self.states[hit[0]])
            return out[0].copy() if scalar else np.array(out)
        return self._dense(t).T


def integrate(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "RK45",
    t_eval: npt.ArrayLike | None = None,
) -> Trajectory:
    """Integrate the orbit of ``x0`` over ``[0, T]`` (``T < 0`` runs backwards).

    Parameters
    ----------
    model:
        The vector field
    x0:
        Initial state
    T:
        Duration
    rtol, atol:
        Local error tolerances of the embedded pair
    method:
        A scipy ``solve_ivp`` method name
    t_eval:
        Optional output times; defaults to the accepted steps

    Returns
    -------
    Trajectory:
        Samples, statistics and dense output

    """
    state = np.asarray(x0, dtype=float)
    if state.shape != (model.dim,):
        raise ValueError(f"Initial state has shape {state.shape}, expected ({model.dim},)")
    stats = {"rtol": rtol, "atol": atol, "method": method}
    if T == 0:
        return Trajectory(
            times=[0.0],
            states=[state],
            stats={
                **stats,
                "n_steps": 0,
                "rejected_steps_estimate": 0,
                "nfev": 0,
                "interp_error": 0.0,
            },
        )

    def rhs(_t, y):
        return model.evaluate(y)

    sol = _solve(
        rhs,
        state,
        T,
        rtol,
        atol,
        method,
        dense_output=True,
        t_eval=t_eval,
    )
    n_steps = len(sol.sol.ts) - 1
    interp_error = _interpolation_error(rhs, sol.sol, rtol, atol, method)
    stats.update(
        n_steps=n_steps,
        rejected_steps_estimate=_rejected_steps_estimate(method, sol.nfev, n_steps),
        nfev=int(sol.nfev),
        interp_error=interp_error,
    )
    if interp_error > 1.0:
        warnings.warn(
            f"Dense output exceeds the tolerance by a factor {interp_error:.2f}",
            IntegrityWarning,
            stacklevel=2,
        )
    traj = Trajectory(times=sol.t, states=sol.y.T, stats=stats)
    traj._dense = sol.sol
    return traj


def orbit_samples(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    count: int,
    **kwargs,
) -> tuple[npt.NDArray, npt.NDArray]:
    """Return ``count`` evenly spaced times on ``[0, T]`` and the orbit states there."""
    times = np.linspace(0.0, T, count)
    traj = integrate(model, x0, T, t_eval=times if T != 0 else None, **kwargs)
    if T == 0:
        return times, np.repeat(traj.states, count, axis=0)
    return traj.times, traj.states


def _variational_rhs(model: VectorFieldModel, n: int, k: int, with_trace: bool):
    size = n * k

    def rhs(_t, y):
        x = y[:n]
        jac = model.jacobian(x)
        out = np.empty_like(y)
        out[:n] = model.evaluate(x)
        out[n : n + size] = (jac @ y[n : n + size].reshape(n, k)).ravel()
        if with_trace:
            out[-1] = np.trace(jac)
        return out

    return rhs


@dataclass
class CocycleSegment(MSONable):
    """Fundamental matrix ``M(t)`` of the variational equation along an orbit.

    Attributes
    ----------
    base_point: NDArray
        ``x``.
    duration: float
        ``t``.
    matrix: NDArray
        ``M(t)`` solving ``Ṁ = DX(x(s)) M`` with ``M(0) = I``.
    end_point: NDArray
        ``X_t(x)``.
    trace_integral: float
        ``∫ trace DX(x(s)) ds`` over the segment.
    liouville_residual: float
        Relative mismatch of ``det M(t)`` against ``exp(trace_integral)``.
    cocycle_residual: float
        Relative mismatch of ``M(t) = M(t/2; X_{t/2} x) M(t/2; x)`` (NaN when unchecked).

    """

    base_point: npt.NDArray
    duration: float
    matrix: npt.NDArray
    end_point: npt.NDArray
    trace_integral: float = 0.0
    liouville_residual: float = 0.0
    cocycle_residual: float = float("nan")

    def __post_init__(self):
        """Coerce arrays and attach an empty interpolant."""
        self.base_point = np.asarray(self.base_point, dtype=float)
        self.end_point = np.asarray(self.end_point, dtype=float)
        self.matrix = np.asarray(self.matrix, dtype=float)
        self._dense = None

    @property
    def dim(self) -> int:
        """Phase-space dimension."""
        return self.matrix.shape[0]

    def _endpoint(self, t: float) -> int | None:
        """0 or 1 when ``t`` is the start or the end of the segment."""
        for which, end in enumerate((0.0, self.duration)):
            if abs(t - end) <= 1e-12 * max(1.0, abs(self.duration)):
                return which
        return None

    def _require_dense(self, t: float):
        if self._dense is None:
            raise NoDenseOutput(
                f"No interpolant for t={t} on a restored segment; integrate again"
            )

    def state_at(self, t: float) -> npt.NDArray:
        """Orbit state at intermediate time ``t``."""
        end = self._endpoint(t)
        if end is not None and self._dense is None:
            return (self.base_point if end == 0 else self.end_point).copy()
        self._require_dense(t)
        return self._dense(t)[: self.dim]

    def matrix_at(self, t: float) -> npt.NDArray:
        """``M(t)`` at intermediate time ``t``."""
        end = self._endpoint(t)
        if end is not None and self._dense is None:
            return np.eye(self.dim) if end == 0 else self.matrix.copy()
        self._require_dense(t)
        n = self.dim
        return self._dense(t)[n : n + n * n].reshape(n, n)

    def compound(self, p: int) -> npt.NDArray:
        """``∧ᵖ M(t)``."""
        return wedge_cocycle(self, p)


def tangent_cocycle(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "RK45",
    verify: bool = True,
) -> CocycleSegment:
    """Integrate the orbit of ``x0`` together with its fundamental matrix.

    Parameters
    ----------
    model:
        The vector field
    x0:
        Base point
    T:
        Duration
    rtol, atol:
        Tolerances applied to the joint state-tangent system
    method:
        A scipy ``solve_ivp`` method name
    verify:
        Also integrate the second half again from the midpoint to measure the
        cocycle property

    Returns
    -------
    CocycleSegment:
        ``M(T)`` and its integrity residuals

    """
    state = np.asarray(x0, dtype=float)
    n = model.dim
    if state.shape != (n,):
        raise ValueError(f"Base point has shape {state.shape}, expected ({n},)")
    if T == 0:
        return CocycleSegment(
            base_point=state, duration=0.0, matrix=np.eye(n), end_point=state, cocycle_residual=0.0
        )
    y0 = np.concatenate([state, np.eye(n).ravel(), [0.0]])
    sol = _solve(
        _variational_rhs(model, n, n, with_trace=True),
        y0,
        T,
        rtol,
        atol,
        method,
        dense_output=True,
    )
    end = sol.y[:, -1]
    mat = end[n : n + n * n].reshape(n, n)
    trace_integral = float(end[-1])
    sign, logdet = np.linalg.slogdet(mat)
    liouville = float(abs(np.expm1(logdet - trace_integral))) if sign > 0 else float("inf")
    segment = CocycleSegment(
        base_point=state,
        duration=float(T),
        matrix=mat,
        end_point=end[:n].copy(),
        trace_integral=trace_integral,
        liouville_residual=liouville,
    )
    segment._dense = sol.sol
    if liouville > LIOUVILLE_TOL:
        warnings.warn(
            f"Liouville check failed on a segment of length {T}: relative error {liouville:.2e}",
            IntegrityWarning,
            stacklevel=2,
        )
    if verify:
        half = 0.5 * T
        second = tangent_cocycle(
            model, segment.state_at(half), half, rtol, atol, method, verify=False
        )
        composed = second.matrix @ segment.matrix_at(half)
        segment.cocycle_residual = spectral_norm(composed - mat) / spectral_norm(mat)
        if segment.cocycle_residual > COCYCLE_TOL:
            warnings.warn(
                f"Cocycle check failed: relative error {segment.cocycle_residual:.2e}",
                IntegrityWarning,
                stacklevel=2,
            )
    return segment


def wedge_cocycle(segment: Union[CocycleSegment, npt.ArrayLike], p: int) -> npt.NDArray:
    """Return the p-th compound matrix ``∧ᵖ M`` of a cocycle segment or matrix."""
    mat = segment.matrix if isinstance(segment, CocycleSegment) else np.asarray(segment, dtype=float)
    if not 1 <= p <= mat.shape[0]:
        raise BadDimension(f"Exterior power {p} outside [1, {mat.shape[0]}]")
    return compound_matrix(mat, p)


@dataclass
class Equilibrium(MSONable):
    """A zero of the vector field with its linearization spectrum.

    Attributes
    ----------
    point: NDArray
        ``σ``.
    eigenvalues: NDArray
        Spectrum of ``DX(σ)`` sorted by real part.
    index: int
        Number of eigenvalues with negative real part.
    hyperbolic: bool
        True when no eigenvalue has ``|Re| <=`` the spectral tolerance.
    residual: float
        ``||X(σ)||``.

    """

    point: npt.NDArray
    eigenvalues: npt.NDArray
    index: int
    hyperbolic: bool
    residual: float = 0.0


def _linearize(model: VectorFieldModel, point: npt.NDArray, spectral_tol: float) -> Equilibrium:
    eigvals = np.linalg.eigvals(model.jacobian(point))
    eigvals = eigvals[np.lexsort((eigvals.imag, eigvals.real))]
    return Equilibrium(
        point=point,
        eigenvalues=eigvals,
        index=int(np.sum(eigvals.real < 0)),
        hyperbolic=bool(np.abs(eigvals.real).min() > spectral_tol),
        residual=float(np.linalg.norm(model.evaluate(point))),
    )


def find_equilibria(
    model: VectorFieldModel,
    seeds: npt.ArrayLike,
    tol: float = 1e-10,
    dedup_radius: float = 1e-6,
    damping: float = 1.0,
    max_iter: int = 50,
    spectral_tol: float = 1e-8,
    return_failures: bool = False,
):
    """Newton-refine seeds into equilibria.

    Parameters
    ----------
    model:
        The vector field
    seeds:
        Starting points, one per row
    tol:
        Acceptance threshold on ``||X(σ)||``
    dedup_radius:
        Equilibria closer than this to an earlier one are dropped
    damping:
        Newton step factor in ``(0, 1]``
    max_iter:
        Iteration cap per seed
    spectral_tol:
        Threshold on ``|Re λ|`` for hyperbolicity
    return_failures:
        Also return the list of ``(seed, residual)`` pairs that did not converge

    Returns
    -------
    list[Equilibrium]:
        Distinct equilibria in seed order (and failures when requested)

    """
    seed_arr = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seed_arr.size == 0:
        raise ValueError("At least one seed is required")
    if not 0 < damping <= 1:
        raise ValueError("Damping must lie in (0, 1]")
    found: list[Equilibrium] = []
    failures: list[tuple[npt.NDArray, float]] = []
    for seed_point in seed_arr:
        x = seed_point.copy()
        residual = float(np.linalg.norm(model.evaluate(x)))
        for it in range(max_iter):
            if residual <= tol:
                break
            step = np.linalg.lstsq(model.jacobian(x), -model.evaluate(x), rcond=None)[0]
            x = x + damping * step
            residual = float(np.linalg.norm(model.evaluate(x)))
            logger.debug("Newton seed=%s it=%d residual=%.3e", seed_point, it, residual)
        if not residual <= tol:
            err = NoConvergence(f"Newton did not converge from seed {seed_point}", residual)
            logger.warning("%s (residual %.3e)", err, residual)
            failures.append((seed_point, residual))
            continue
        if any(np.linalg.norm(x - eq.point) <= dedup_radius for eq in found):
            continue
        found.append(_linearize(model, x, spectral_tol))
    if return_failures:
        return found, failures
    return found


@dataclass
class Section(MSONable):
    """Affine hyperplane ``normal · x = offset`` used as a Poincaré section.

    Attributes
    ----------
    normal: NDArray
        Normal vector.
    offset: float
        Level of the hyperplane.
    direction: int
        ``+1`` counts crossings with ``normal · X > 0``, ``-1`` the opposite,
        ``0`` both.

    """

    normal: npt.NDArray
    offset: float = 0.0
    direction: int = 1

    def __post_init__(self):
        """Validate the normal."""
        self.normal = np.asarray(self.normal, dtype=float)
        if not np.linalg.norm(self.normal) > 0:
            raise ValueError("Section normal must be non-zero")
        if self.direction not in (-1, 0, 1):
            raise ValueError("Section direction must be -1, 0 or 1")

    def value(self, x: npt.ArrayLike) -> float:
        """Signed level ``normal · x - offset``."""
        return float(self.normal @ np.asarray(x, dtype=float) - self.offset)

    def project(self, x: npt.ArrayLike) -> npt.NDArray:
        """Orthogonal projection of ``x`` onto the hyperplane."""
        return np.asarray(x, dtype=float) - self.value(x) * self.normal / (self.normal @ self.normal)

    def is_transverse(self, model: VectorFieldModel, x: npt.ArrayLike, tol: float = 1e-8) -> bool:
        """True when the flow crosses the section at ``x``."""
        vel = model(x)
        return abs(self.normal @ vel) > tol * np.linalg.norm(self.normal) * np.linalg.norm(vel)


def section_returns(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    section: Section,
    count: int,
    t_max: float = 100.0,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> tuple[npt.NDArray, npt.NDArray]:
    """Times and points of the first ``count`` crossings of ``section``."""

    def event(_t, y):
        return section.value(y)

    event.direction = section.direction
    sol = _solve(
        lambda _t, y: model.evaluate(y),
        np.asarray(x0, dtype=float),
        t_max,
        rtol,
        atol,
        "RK45",
        events=event,
    )
    times, points = sol.t_events[0], sol.y_events[0]
    return times[:count], points[:count]


@dataclass
class PeriodicOrbit(MSONable):
    """A periodic orbit with its Floquet data.

    Attributes
    ----------
    anchor: NDArray
        A point of the orbit (on the section when found by shooting).
    period: float
        ``T``.
    multipliers: NDArray
        Nontrivial Floquet multipliers, ascending modulus.
    index: int
        Number of multipliers inside the unit circle.
    hyperbolic: bool
        True when every nontrivial multiplier is off the unit circle.
    monodromy: NDArray
        Period map ``M(T)`` at the anchor.
    residual: float
        Return-map residual ``||X_T(anchor) - anchor||``.
    suspect: bool
        True when no multiplier was within the trivial window of 1.

    """

    anchor: npt.NDArray
    period: float
    multipliers: npt.NDArray
    index: int
    hyperbolic: bool
    monodromy: npt.NDArray
    residual: float = 0.0
    suspect: bool = False

    @property
    def flow_direction(self) -> npt.NDArray:
        """Eigenvector of the monodromy for the removed trivial multiplier."""
        evals, evecs = np.linalg.eig(self.monodromy)
        vec = evecs[:, int(np.argmin(np.abs(evals - 1.0)))].real
        return vec / np.linalg.norm(vec)


def floquet_analysis(
    model: VectorFieldModel,
    anchor: npt.ArrayLike,
    period: float,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    method: str = "DOP853",
    trivial_window: float = TRIVIAL_WINDOW,
    spectral_tol: float = 1e-6,
    segment: CocycleSegment | None = None,
) -> PeriodicOrbit:
    """Floquet multipliers of the orbit through ``anchor`` with period ``period``.

    The multiplier closest to 1 is removed as trivial only if it lies within
    ``trivial_window`` of 1; otherwise the orbit is flagged as suspect and all
    multipliers are kept.

    """
    anchor_arr = np.asarray(anchor, dtype=float)
    if segment is None:
        segment = tangent_cocycle(model, anchor_arr, period, rtol, atol, method, verify=False)
    mults = np.linalg.eigvals(segment.matrix)
    trivial = int(np.argmin(np.abs(mults - 1.0)))
    suspect = bool(abs(mults[trivial] - 1.0) > trivial_window)
    if suspect:
        logger.warning(
            "No multiplier within %.1e of 1 (closest %s); orbit flagged suspect",
            trivial_window,
            mults[trivial],
        )
        nontrivial = mults
    else:
        nontrivial = np.delete(mults, trivial)
    nontrivial = nontrivial[np.argsort(np.abs(nontrivial), kind="stable")]
    moduli = np.abs(nontrivial)
    return PeriodicOrbit(
        anchor=anchor_arr,
        period=float(period),
        multipliers=nontrivial,
        index=int(np.sum(moduli < 1)),
        hyperbolic=bool(not suspect and np.all(np.abs(moduli - 1) > spectral_tol)),
        monodromy=segment.matrix,
        residual=float(np.linalg.norm(segment.end_point - anchor_arr)),
        suspect=suspect,
    )


def find_periodic_orbit(
    model: VectorFieldModel,
    section: Section,
    guess_point: npt.ArrayLike,
    guess_period: float,
    tol: float = 1e-10,
    max_iter: int = 40,
    damping: float = 1.0,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    method: str = "DOP853",
    trivial_window: float = TRIVIAL_WINDOW,
) -> PeriodicOrbit:
    """Locate a periodic orbit by Newton shooting on the return map.

    The unknowns are the point ``x`` on the section and the period ``T``;
    the equations are ``X_T(x) - x = 0`` and ``normal · x = offset``.

    Parameters
    ----------
    model:
        The vector field
    section:
        Section pinning the phase of the orbit
    guess_point:
        Initial point, projected onto the section
    guess_period:
        Initial period
    tol:
        Acceptance threshold on the return-map residual
    max_iter:
        Newton iteration cap
    damping:
        Newton step factor in ``(0, 1]``
    rtol, atol, method:
        Integrator settings for the shooting segments
    trivial_window:
        Window for the trivial multiplier

    Returns
    -------
    PeriodicOrbit:
        The refined orbit and its Floquet data

    """
    n = model.dim
    x = section.project(guess_point)
    if not section.is_transverse(model, x):
        raise NonTransverseSection("The flow is tangent to the section at the guess point")
    period = float(guess_period)
    if not period > 0:
        raise ValueError("Guess period must be positive")
    min_period = 1e-3 * period
    jac = np.zeros((n + 1, n + 1))
    jac[n, :n] = section.normal
    residual = float("inf")
    for it in range(max_iter):
        segment = tangent_cocycle(model, x, period, rtol, atol, method, verify=False)
        mismatch = segment.end_point - x
        residual = float(np.linalg.norm(mismatch))
        logger.debug("Shooting it=%d T=%.12f residual=%.3e", it, period, residual)
        if residual <= tol:
            orbit = floquet_analysis(
                model, x, period, trivial_window=trivial_window, segment=segment
            )
            logger.info("Periodic orbit found: T=%.10f, index %d", period, orbit.index)
            return orbit
        jac[:n, :n] = segment.matrix - np.eye(n)
        jac[:n, n] = model.evaluate(segment.end_point)
        rhs = np.concatenate([-mismatch, [-section.value(x)]])
        delta = np.linalg.lstsq(jac, rhs, rcond=None)[0]
        x = x + damping * delta[:n]
        period += damping * delta[n]
        if not period > min_period:
            raise NoConvergence("Shooting collapsed the period", residual)
    raise NoConvergence(f"Shooting did not converge in {max_iter} iterations", residual)


@dataclass
class LyapunovSpectrum(MSONable):
    """Leading Lyapunov exponents with their running averages.

    Attributes
    ----------
    exponents: NDArray
        ``χ_1 >= ... >= χ_k`` (1/time).
    times: NDArray
        Times of the QR factorizations.
    running: NDArray
        Running averages, one row per entry of ``times``, sorted descending.
    drift: float
        Largest deviation of the running averages from the final estimate over
        the last quarter of the window.
    converged: bool
        ``drift`` is below the requested tolerance.
    seed: int | None
        Seed of the initial frame (None for the identity frame).

    """

    exponents: npt.NDArray
    times: npt.NDArray
    running: npt.NDArray
    drift: float
    converged: bool
    seed: int | None = None


def lyapunov_exponents(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    k: int | None = None,
    seed: int | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "RK45",
    qr_interval: float = 0.5,
    transient: float = 0.0,
    tolerance: float = 0.01,
    max_growth: float = 1e3,
    require_convergence: bool = False,
) -> LyapunovSpectrum:
    """Estimate the ``k`` leading Lyapunov exponents by QR reorthonormalization.

    Parameters
    ----------
    model:
        The vector field
    x0:
        Initial state
    T:
        Averaging window after the transient
    k:
        Number of exponents (default: all)
    seed:
        Seed of the random initial frame; ``None`` with ``k = n`` uses the
        identity frame, ``None`` with ``k < n`` uses seed 0
    rtol, atol, method:
        Integrator settings
    qr_interval:
        Initial time between factorizations; adapted so that column growth
        stays below ``max_growth``
    transient:
        Time integrated before averaging starts
    tolerance:
        Threshold on the running-average drift over the last quarter window
    max_growth:
        Growth factor that triggers a shorter factorization interval
    require_convergence:
        Raise NotConverged instead of warning when the drift is too large

    Returns
    -------
    LyapunovSpectrum:
        Exponent estimates and diagnostics

    """
    n = model.dim
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise BadDimension(f"k={k} outside [1, {n}]")
    if not T > 0:
        raise ValueError("Averaging window must be positive")
    x = np.asarray(x0, dtype=float)
    if transient > 0:
        x = integrate(model, x, transient, rtol, atol, method).final_state
    if seed is None and k == n:
        frame = np.eye(n)
    else:
        rng = np.random.default_rng(0 if seed is None else seed)
        frame = np.linalg.qr(rng.standard_normal((n, k)))[0]

    rhs = _variational_rhs(model, n, k, with_trace=False)
    sums = np.zeros(k)
    elapsed, dt = 0.0, float(qr_interval)
    times, running = [], []
    while elapsed < T * (1 - 1e-12):
        h = min(dt, T - elapsed)
        sol = _solve(rhs, np.concatenate([x, frame.ravel()]), h, rtol, atol, method)
        end = sol.y[:, -1]
        x = end[:n]
        frame, r_mat = np.linalg.qr(end[n:].reshape(n, k))
        diag = np.diag(r_mat)
        signs = np.where(diag < 0, -1.0, 1.0)
        frame = frame * signs
        logs = np.log(np.abs(diag))
        sums += logs
        elapsed += h
        times.append(elapsed)
        running.append(np.sort(sums / elapsed)[::-1])
        growth = float(np.exp(np.abs(logs).max()))
        if growth > max_growth:
            dt = 0.5 * h
            logger.debug("QR interval reduced to %.3g (growth %.3g)", dt, growth)
        elif growth < 10.0:
            dt = min(2.0 * dt, 10.0)

    times_arr = np.asarray(times)
    running_arr = np.asarray(running)
    exponents = running_arr[-1].copy()
    window = times_arr >= 0.75 * T
    drift = float(np.abs(running_arr[window] - exponents).max()) if window.any() else 0.0
    result = LyapunovSpectrum(
        exponents=exponents,
        times=times_arr,
        running=running_arr,
        drift=drift,
        converged=drift <= tolerance,
        seed=seed,
    )
    if not result.converged:
        msg = f"Running averages drift by {drift:.3e} over the last quarter window"
        if require_convergence:
            raise NotConverged(msg, result)
        warnings.warn(msg, IntegrityWarning, stacklevel=2)
    return result
