"""Certificates assembled from orbit, cocycle and cone-field checks.

Hyperbolicity of periodic orbits, dominated splittings, partial and
sectional hyperbolicity, star certificates over located critical elements,
index homogeneity, and Lyapunov-exponent bounds from the pseudo-Euclidean
singular spectrum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

import numpy as np
from monty.json import MSONable
from scipy.linalg import expm, orth

from pyjsep.cone_field import (
    ConstantFormField,
    adapted_form_search,
    check_separation_along_orbit,
    floquet_adapted_form,
    linear_poincare_flow,
    singularity_form_positivity,
)
from pyjsep.errors import (
    BadDimension,
    IndexMismatch,
    JSepError,
    NoCertificate,
    NotConverged,
    NotHyperbolic,
    NotSeparated,
    NotSeparatedOnStep,
    SplitCollapse,
    SuspectOrbit,
)
from pyjsep.flow_engine import integrate, lyapunov_exponents, orbit_samples, tangent_cocycle
from pyjsep.jsep_analysis import (
    MonotonicityLevel,
    SeparationLevel,
    check_separation,
    is_j_monotone,
    polar_decompose,
)
from pyjsep.pseudo_metric import as_form, lagrange_diagonalize
from pyjsep.utils import as_columns, compound_matrix, fit_exponential_rate, spectral_norm

if TYPE_CHECKING:
    import numpy.typing as npt

    from pyjsep.cone_field import QuadraticFormField
    from pyjsep.flow_engine import Equilibrium, LyapunovSpectrum, PeriodicOrbit
    from pyjsep.models import VectorFieldModel
    from pyjsep.pseudo_metric import FormLike

__all__ = [
    "DominationReport",
    "ElementCertificate",
    "ExponentBoundsReport",
    "FieldDirectionReport",
    "HomogeneityReport",
    "HyperbolicityReport",
    "PartialHyperbolicityReport",
    "StarCertificate",
    "Verdict",
    "VolumeExpansionReport",
    "homogeneity_report",
    "star_certificate",
    "verify_dominated_splitting",
    "verify_field_direction",
    "verify_hyperbolic_orbit",
    "verify_partial_hyperbolicity",
    "verify_volume_expansion",
    "wojtkowski_bounds_check",
]

logger = logging.getLogger(__name__)

SIGNIFICANCE = 3.0


class Verdict(str, Enum):
    """Verdicts shared by the certificate reports."""

    PASS = "pass"
    FAILS = "fails"
    UNVERIFIABLE = "unverifiable"
    NON_NEGATIVITY_FAILS = "non_negativity_fails"
    DOMINATED = "dominated"
    NOT_DOMINATED = "not_dominated"


@dataclass
class HyperbolicityReport(MSONable):
    """Hyperbolicity of a periodic orbit with rate constants.

    Attributes
    ----------
    hyperbolic: bool
        Every nontrivial multiplier is off the unit circle.
    rate: float
        ``λ = min |log |μ|| / T`` (1/time).
    constant: float
        ``K``, the condition number of the Floquet eigenbasis.
    index: int
        Number of contracting multipliers.
    period: float
        ``T``.

    """

    hyperbolic: bool
    rate: float
    constant: float
    index: int
    period: float

    @property
    def verdict(self) -> Verdict:
        """PASS for hyperbolic orbits."""
        return Verdict.PASS if self.hyperbolic else Verdict.FAILS


def verify_hyperbolic_orbit(orbit: PeriodicOrbit, tol: float = 1e-6) -> HyperbolicityReport:
    """Check ``||DX_t|E^s|| <= K e^{-λt}`` data of a periodic orbit from its multipliers.

    Parameters
    ----------
    orbit:
        An orbit from :func:`pyjsep.flow_engine.find_periodic_orbit`
    tol:
        Smallest admissible ``||μ| - 1|``

    Returns
    -------
    HyperbolicityReport:
        Verdict with ``K`` and ``λ``

    """
    if orbit.suspect:
        raise SuspectOrbit("Orbit has no trivial Floquet multiplier; refine it first")
    moduli = np.abs(np.asarray(orbit.multipliers))
    hyperbolic = bool(len(moduli) and np.all(np.abs(moduli - 1.0) > tol))
    rate = float(np.abs(np.log(moduli)).min()) / orbit.period if len(moduli) else 0.0
    evecs = np.linalg.eig(orbit.monodromy)[1]
    return HyperbolicityReport(
        hyperbolic=hyperbolic,
        rate=rate,
        constant=float(np.linalg.cond(evecs)),
        index=orbit.index,
        period=orbit.period,
    )


@dataclass
class DominationReport(MSONable):
    """Fit of ``||DX_t|E|| · ||DX_{-t}|F_{X_t x}|| <= K e^{-λt}``.

    Attributes
    ----------
    dim_e, dim_f: int
        Subbundle dimensions.
    constant: float
        ``K``.
    rate: float
        ``λ`` (1/time); the negated fitted slope.
    stderr: float
        Standard error of the fitted slope.
    times: NDArray
        Sample times.
    log_ratio: NDArray
        ``log σmax(M|E) - log σmin(M|F)`` per sample.
    verdict: Verdict
        ``DOMINATED`` or ``NOT_DOMINATED``.

    """

    dim_e: int
    dim_f: int
    constant: float
    rate: float
    stderr: float
    times: npt.NDArray
    log_ratio: npt.NDArray
    verdict: Verdict


def _check_complementary(first: npt.NDArray, second: npt.NDArray, n: int):
    if first.shape[0] != n or second.shape[0] != n:
        raise BadDimension("Subspace vectors must live in the phase space")
    if np.linalg.matrix_rank(np.hstack([first, second])) != n:
        raise ValueError("Seed subspaces are not complementary")


def verify_dominated_splitting(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    E0: npt.ArrayLike,
    F0: npt.ArrayLike,
    n_samples: int = 41,
    refine_time: float = 0.0,
    collapse_tol: float = 1e-12,
    **integrator,
) -> DominationReport:
    """Fit the domination rate of a splitting ``E ⊕ F`` along an orbit segment.

    Parameters
    ----------
    model:
        The vector field
    x0:
        Start of the segment
    T:
        Length of the segment
    E0, F0:
        Complementary seed subspaces at ``x0`` (columns)
    n_samples:
        Number of sample times on ``[0, T]``
    refine_time:
        When positive, ``E0`` is pulled back from ``X_τ x0`` and ``F0`` pushed
        forward from ``X_{-τ} x0`` before fitting
    collapse_tol:
        Relative singular-value floor below which the transported splitting
        counts as collapsed
    integrator:
        ``rtol``, ``atol`` and ``method``

    Returns
    -------
    DominationReport:
        The fitted constants, the log-ratio series and the verdict

    """
    n = model.dim
    point = np.asarray(x0, dtype=float)
    e_basis = orth(as_columns(E0, n))
    f_basis = orth(as_columns(F0, n))
    _check_complementary(e_basis, f_basis, n)
    if refine_time > 0:
        ahead = tangent_cocycle(model, point, refine_time, verify=False, **integrator)
        e_basis = orth(np.linalg.solve(ahead.matrix, e_basis))
        behind = integrate(model.reversed(), point, refine_time, **integrator).final_state
        f_basis = orth(
            tangent_cocycle(model, behind, refine_time, verify=False, **integrator).matrix
            @ f_basis
        )
        _check_complementary(e_basis, f_basis, n)

    segment = tangent_cocycle(model, point, T, verify=False, **integrator)
    times = np.linspace(0.0, T, n_samples)
    log_ratio = np.empty(n_samples)
    for i, t in enumerate(times):
        mat = segment.matrix if i == n_samples - 1 else segment.matrix_at(t)
        on_e = np.linalg.svd(mat @ e_basis, compute_uv=False)
        on_f = np.linalg.svd(mat @ f_basis, compute_uv=False)
        both = np.linalg.svd(np.hstack([orth(mat @ e_basis), orth(mat @ f_basis)]), compute_uv=False)
        if on_f[-1] <= collapse_tol * on_f[0] or both[-1] <= collapse_tol:
            raise SplitCollapse(f"Transported splitting lost rank at t={t:.6g}")
        log_ratio[i] = math.log(on_e[0]) - math.log(on_f[-1])

    fit = fit_exponential_rate(times, log_ratio)
    rate = -fit.slope
    dominated = fit.slope < 0 and fit.significant(SIGNIFICANCE)
    return DominationReport(
        dim_e=e_basis.shape[1],
        dim_f=f_basis.shape[1],
        constant=float(np.exp(np.max(log_ratio + rate * times))),
        rate=rate,
        stderr=fit.stderr,
        times=times,
        log_ratio=log_ratio,
        verdict=Verdict.DOMINATED if dominated else Verdict.NOT_DOMINATED,
    )


@dataclass
class FieldDirectionReport(MSONable):
    """Sign of ``J_x(X(x))`` over sampled points.

    Attributes
    ----------
    classification: str
        ``"non_negative"``, ``"non_positive"``, ``"indefinite"`` or ``"singular"``
        (no regular sample).
    values: NDArray
        ``J_x(X)/(||J_x|| ||X||²)`` per regular sample.
    n_singular: int
        Samples where ``X`` vanishes.

    """

    classification: str
    values: npt.NDArray
    n_singular: int = 0

    @property
    def minimum(self) -> float:
        """Smallest normalized value (inf without regular samples)."""
        return float(self.values.min()) if len(self.values) else math.inf


def verify_field_direction(
    field: QuadraticFormField,
    model: VectorFieldModel,
    samples: npt.ArrayLike,
    tol: float = 1e-9,
) -> FieldDirectionReport:
    """Classify ``X`` as a non-negative or non-positive direction of the field."""
    values, n_singular = [], 0
    for point in np.atleast_2d(np.asarray(samples, dtype=float)):
        direction = model(point)
        norm2 = float(direction @ direction)
        if norm2 == 0.0:
            n_singular += 1
            continue
        jform = field.at(point)
        values.append(jform(direction) / (jform.norm * norm2))
    vals = np.asarray(values)
    if not len(vals):
        kind = "singular"
    elif np.all(vals >= -tol):
        kind = "non_negative"
    elif np.all(vals <= tol):
        kind = "non_positive"
    else:
        kind = "indefinite"
    return FieldDirectionReport(classification=kind, values=vals, n_singular=n_singular)


@dataclass
class PartialHyperbolicityReport(MSONable):
    """Form-side criterion for partial hyperbolicity with ``dim E^s = Ind(J)``.

    Attributes
    ----------
    verdict: Verdict
        ``PASS``, ``FAILS`` or ``NON_NEGATIVITY_FAILS``.
    stable_dimension: int
        ``Ind(J)``.
    direction: FieldDirectionReport
        Sign of ``J(X)`` on the sampled segments.
    segments: list
        Orbit separation report per segment (empty when non-negativity fails).

    """

    verdict: Verdict
    stable_dimension: int
    direction: FieldDirectionReport
    segments: list = field(default_factory=list)


def verify_partial_hyperbolicity(
    form_field: QuadraticFormField,
    model: VectorFieldModel,
    segments: Iterable[tuple[npt.ArrayLike, float]],
    density: float = 8.0,
    tol: float = 1e-9,
    seed: int | None = 0,
) -> PartialHyperbolicityReport:
    """Check that the flow is non-negative and strictly J-separated on orbit segments.

    Parameters
    ----------
    form_field:
        The form field
    model:
        The vector field
    segments:
        ``(x0, T)`` pairs
    density:
        Samples per unit time for the non-negativity check
    tol:
        Tolerance shared by both checks
    seed:
        Seed of the separation sampler

    Returns
    -------
    PartialHyperbolicityReport:
        Verdict and sub-reports

    """
    segment_list = [(np.asarray(x0, dtype=float), float(T)) for x0, T in segments]
    points = [
        orbit_samples(model, x0, T, max(math.ceil(density * T), 1) + 1)[1]
        for x0, T in segment_list
    ]
    direction = verify_field_direction(form_field, model, np.vstack(points), tol)
    if direction.classification not in ("non_negative", "singular"):
        return PartialHyperbolicityReport(
            verdict=Verdict.NON_NEGATIVITY_FAILS,
            stable_dimension=form_field.index_q,
            direction=direction,
        )
    reports = [
        check_separation_along_orbit(form_field, model, x0, T, tol=tol, seed=seed)
        for x0, T in segment_list
    ]
    strict = all(r.level is SeparationLevel.STRICTLY_SEPARATED for r in reports)
    return PartialHyperbolicityReport(
        verdict=Verdict.PASS if strict else Verdict.FAILS,
        stable_dimension=form_field.index_q,
        direction=direction,
        segments=reports,
    )


@dataclass
class VolumeExpansionReport(MSONable):
    """Fit of ``|∧ᵖ DX_t|F| >= C e^{λt}`` on a transported subspace ``F``.

    Attributes
    ----------
    p: int
        Exterior power.
    dim_f: int
        ``dim F``.
    constant: float
        ``C``.
    rate: float
        ``λ`` (1/time).
    stderr: float
        Standard error of ``λ``.
    times: NDArray
        Sample times.
    log_volume: NDArray
        Log of the smallest p-dimensional expansion inside ``F``.
    verdict: Verdict
        ``PASS`` iff ``λ > 0`` and significant.

    """

    p: int
    dim_f: int
    constant: float
    rate: float
    stderr: float
    times: npt.NDArray
    log_volume: npt.NDArray
    verdict: Verdict


def verify_volume_expansion(
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    F0: npt.ArrayLike,
    p: int | None = None,
    n_samples: int = 41,
    **integrator,
) -> VolumeExpansionReport:
    """Fit the minimal p-dimensional volume expansion inside ``F`` along an orbit.

    ``F`` is transported interval by interval and re-orthonormalized; the
    accumulated triangular factor ``R`` represents ``M|F`` in orthonormal
    bases, so the minimal expansion is the smallest singular value of ``∧ᵖ R``.

    Parameters
    ----------
    model:
        The vector field
    x0:
        Start of the segment
    T:
        Length of the segment
    F0:
        Seed subspace (columns)
    p:
        Exterior power, ``1 <= p <= dim F``; defaults to ``dim F`` (determinant)
    n_samples:
        Number of sample times on ``[0, T]``
    integrator:
        ``rtol``, ``atol`` and ``method``

    Returns
    -------
    VolumeExpansionReport:
        The fitted constants, the series and the verdict

    """
    n = model.dim
    frame = orth(as_columns(F0, n))
    dim_f = frame.shape[1]
    p = dim_f if p is None else int(p)
    if not 1 <= p <= dim_f:
        raise BadDimension(f"p={p} outside [1, {dim_f}]")
    times = np.linspace(0.0, T, n_samples)
    x = np.asarray(x0, dtype=float)
    r_acc, log_scale = np.eye(dim_f), 0.0
    log_volume = np.zeros(n_samples)
    for i in range(1, n_samples):
        segment = tangent_cocycle(model, x, times[i] - times[i - 1], verify=False, **integrator)
        x = segment.end_point
        frame, r_step = np.linalg.qr(segment.matrix @ frame)
        signs = np.where(np.diag(r_step) < 0, -1.0, 1.0)
        frame, r_step = frame * signs, signs[:, None] * r_step
        r_acc = r_step @ r_acc
        scale = float(np.abs(r_acc).max())
        r_acc /= scale
        log_scale += math.log(scale)
        if p == dim_f:
            log_volume[i] = float(np.sum(np.log(np.abs(np.diag(r_acc))))) + p * log_scale
        else:
            smallest = np.linalg.svd(compound_matrix(r_acc, p), compute_uv=False)[-1]
            log_volume[i] = math.log(smallest) + p * log_scale

    fit = fit_exponential_rate(times, log_volume)
    expanding = fit.slope > 0 and fit.significant(SIGNIFICANCE)
    return VolumeExpansionReport(
        p=p,
        dim_f=dim_f,
        constant=float(np.exp(np.min(log_volume - fit.slope * times))),
        rate=fit.slope,
        stderr=fit.stderr,
        times=times,
        log_volume=log_volume,
        verdict=Verdict.PASS if expanding else Verdict.FAILS,
    )


@dataclass
class ElementCertificate(MSONable):
    """Star-certificate record of one critical element.

    Attributes
    ----------
    element_id: str
        ``"equilibrium[i]"`` or ``"periodic_orbit[j]"``.
    kind: str
        ``"equilibrium"`` or ``"periodic_orbit"``.
    index: int
        Index of the element.
    verdict: Verdict
        ``PASS``, ``FAILS`` or ``UNVERIFIABLE``.
    form: NDArray | None
        The form used.
    separation: SeparationLevel | None
        Separation verdict (None when the form is definite).
    positivity: float | None
        Minimum eigenvalue of ``J'`` (equilibria).
    monotonicity: MonotonicityLevel | None
        Period-map linear Poincaré flow verdict (periodic orbits).
    degenerate: str | None
        ``"sink"`` or ``"source"`` for orbits whose normal spectrum is one-sided.
    note: str
        Reason for a failure or the recorded contraction/expansion.

    """

    element_id: str
    kind: str
    index: int
    verdict: Verdict
    form: npt.NDArray | None = None
    separation: SeparationLevel | None = None
    positivity: float | None = None
    monotonicity: MonotonicityLevel | None = None
    degenerate: str | None = None
    note: str = ""


@dataclass
class StarCertificate(MSONable):
    """Conjunction of the element certificates.

    Attributes
    ----------
    elements: list[ElementCertificate]
        Element records in identifier order.
    verdict: Verdict
        ``FAILS`` if an element fails, else ``UNVERIFIABLE`` if one could not
        be certified, else ``PASS``.

    """

    elements: list
    verdict: Verdict

    def element(self, element_id: str) -> ElementCertificate:
        """Look up an element record by identifier."""
        for cert in self.elements:
            if cert.element_id == element_id:
                return cert
        raise KeyError(element_id)


def _overall(verdicts: Iterable[Verdict]) -> Verdict:
    verdicts = list(verdicts)
    if Verdict.FAILS in verdicts:
        return Verdict.FAILS
    if Verdict.UNVERIFIABLE in verdicts:
        return Verdict.UNVERIFIABLE
    return Verdict.PASS


def _equilibrium_certificate(
    model: VectorFieldModel, eq: Equilibrium, element_id: str, form: FormLike | None, seed
) -> ElementCertificate:
    amat = model.jacobian(eq.point)
    base = {"element_id": element_id, "kind": "equilibrium", "index": eq.index}
    try:
        jform = as_form(form) if form is not None else adapted_form_search(amat, eq.index)
    except NotHyperbolic as exc:
        return ElementCertificate(**base, verdict=Verdict.FAILS, note=str(exc))
    except (IndexMismatch, NoCertificate) as exc:
        return ElementCertificate(**base, verdict=Verdict.UNVERIFIABLE, note=str(exc))

    positivity = singularity_form_positivity(ConstantFormField(jform), model, eq.point)
    separation = None
    if jform.is_indefinite:
        tau = 1.0 / max(spectral_norm(amat), 1e-12)
        separation = check_separation(jform, expm(tau * amat), seed=seed).level
    passed = positivity.positive and separation in (None, SeparationLevel.STRICTLY_SEPARATED)
    note = "" if passed else (
        "J' is not positive definite" if not positivity.positive else "not strictly separated"
    )
    return ElementCertificate(
        **base,
        verdict=Verdict.PASS if passed else Verdict.FAILS,
        form=jform.matrix,
        separation=separation,
        positivity=positivity.min_eigenvalue,
        note=note,
    )


def _orbit_certificate(
    model: VectorFieldModel, orbit: PeriodicOrbit, element_id: str, form: FormLike | None, seed
) -> ElementCertificate:
    base = {"element_id": element_id, "kind": "periodic_orbit", "index": orbit.index}
    if orbit.suspect:
        return ElementCertificate(**base, verdict=Verdict.UNVERIFIABLE, note="suspect orbit")
    if not orbit.hyperbolic:
        return ElementCertificate(**base, verdict=Verdict.FAILS, note="nonhyperbolic orbit")
    moduli = np.abs(np.asarray(orbit.multipliers))
    degenerate = None
    if np.all(moduli < 1):
        degenerate = "sink"
    elif np.all(moduli > 1):
        degenerate = "source"
    try:
        jform = (
            as_form(form)
            if form is not None
            else floquet_adapted_form(orbit.monodromy, model(orbit.anchor))
        )
    except (NoCertificate, ValueError) as exc:
        return ElementCertificate(**base, verdict=Verdict.UNVERIFIABLE, note=str(exc))

    field_ = ConstantFormField(jform)
    report = check_separation_along_orbit(
        field_, model, orbit.anchor, orbit.period, times=[0.0, orbit.period], seed=seed
    )
    cert = {**base, "form": jform.matrix, "separation": report.level, "degenerate": degenerate}
    strict = report.level is SeparationLevel.STRICTLY_SEPARATED

    if degenerate == "sink":
        note = f"period map contracts the normal directions by {moduli.max():.6g}"
        return ElementCertificate(
            **cert, verdict=Verdict.PASS if strict else Verdict.FAILS, note=note
        )
    if degenerate == "source":
        note = f"period map expands the normal directions by {moduli.min():.6g}"
        return ElementCertificate(
            **cert, verdict=Verdict.PASS if strict else Verdict.FAILS, note=note
        )
    try:
        lpf = linear_poincare_flow(field_, model, orbit.anchor, orbit.period)
        monotone = is_j_monotone(lpf.start.normal_form, lpf.operator)
    except (JSepError, ValueError) as exc:
        return ElementCertificate(**cert, verdict=Verdict.UNVERIFIABLE, note=str(exc))
    passed = strict and monotone is MonotonicityLevel.STRICTLY_MONOTONE
    return ElementCertificate(
        **cert,
        verdict=Verdict.PASS if passed else Verdict.FAILS,
        monotonicity=monotone,
        note="" if passed else "period-map linear Poincaré flow is not strictly monotone",
    )


def star_certificate(
    model: VectorFieldModel,
    equilibria: Iterable[Equilibrium] = (),
    orbits: Iterable[PeriodicOrbit] = (),
    forms: dict[str, FormLike] | None = None,
    seed: int | None = 0,
) -> StarCertificate:
    """Certify the form-side star conditions on located critical elements.

    Equilibria need ``J' > 0`` and strict separation of a short-time flow map;
    periodic orbits need strict separation of the period map and a strictly
    J-monotone period-map linear Poincaré flow. Sinks and sources record the
    contraction or expansion of the period map instead of the latter.

    Parameters
    ----------
    model:
        The vector field
    equilibria:
        Located equilibria
    orbits:
        Located periodic orbits
    forms:
        Forms by element identifier; missing entries are searched for
    seed:
        Seed of the separation samplers

    Returns
    -------
    StarCertificate:
        Element records and the overall verdict

    """
    forms = forms or {}
    elements = []
    for i, eq in enumerate(equilibria):
        element_id = f"equilibrium[{i}]"
        elements.append(_equilibrium_certificate(model, eq, element_id, forms.get(element_id), seed))
    for j, orbit in enumerate(orbits):
        element_id = f"periodic_orbit[{j}]"
        elements.append(_orbit_certificate(model, orbit, element_id, forms.get(element_id), seed))
    for cert in elements:
        logger.info("%s: %s %s", cert.element_id, cert.verdict.value, cert.note)
    return StarCertificate(elements=elements, verdict=_overall(c.verdict for c in elements))


@dataclass
class HomogeneityReport(MSONable):
    """Indices of the located critical elements.

    Attributes
    ----------
    orbit_indices: list[int]
        Index of each periodic orbit.
    singularity_indices: list[int]
        ``Ind(σ)`` of each equilibrium.
    homogeneous: bool
        All orbit indices are equal (vacuous without orbits).
    index: int | None
        The common orbit index, or the declared one.
    matches_declared: bool | None
        Orbit indices equal the declared index (None when nothing was declared).
    differences: list[int]
        ``Ind(σ) - Ind`` per equilibrium.
    dominates: list[bool]
        ``Ind(σ) >= Ind`` per equilibrium.
    sectional: list[bool]
        ``Ind(σ) = Ind + 1`` per equilibrium.
    codimension_one: list[bool]
        ``Ind(σ)`` is 1 or ``n - 1``.
    notes: list[str]
        Human-readable remarks.

    """

    orbit_indices: list
    singularity_indices: list
    homogeneous: bool
    index: int | None = None
    matches_declared: bool | None = None
    differences: list = field(default_factory=list)
    dominates: list = field(default_factory=list)
    sectional: list = field(default_factory=list)
    codimension_one: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        """Homogeneous with every singularity satisfying ``Ind(σ) >= Ind``."""
        return self.homogeneous and all(self.dominates)


def homogeneity_report(
    model: VectorFieldModel,
    equilibria: Iterable[Equilibrium] = (),
    orbits: Iterable[PeriodicOrbit] = (),
    declared_index: int | None = None,
) -> HomogeneityReport:
    """Compare the indices of located orbits and singularities.

    Parameters
    ----------
    model:
        The vector field
    equilibria:
        Located equilibria
    orbits:
        Located periodic orbits
    declared_index:
        Expected orbit index ``Ind``

    Returns
    -------
    HomogeneityReport:
        Index comparisons; always produced

    """
    orbit_idx = [int(o.index) for o in orbits]
    sing_idx = [int(e.index) for e in equilibria]
    notes = []
    homogeneous = len(set(orbit_idx)) <= 1
    if not orbit_idx:
        notes.append("no periodic orbits located; homogeneity holds vacuously")
    if not homogeneous:
        notes.append(f"orbit indices differ: {sorted(set(orbit_idx))}")
    common = orbit_idx[0] if orbit_idx and homogeneous else None
    reference = declared_index if declared_index is not None else common
    matches = None
    if declared_index is not None:
        matches = all(i == declared_index for i in orbit_idx)

    report = HomogeneityReport(
        orbit_indices=orbit_idx,
        singularity_indices=sing_idx,
        homogeneous=homogeneous,
        index=reference,
        matches_declared=matches,
        notes=notes,
    )
    if reference is None:
        return report
    n = model.dim
    for k, ind in enumerate(sing_idx):
        report.differences.append(ind - reference)
        report.dominates.append(ind >= reference)
        report.sectional.append(ind == reference + 1)
        report.codimension_one.append(ind in (1, n - 1))
        if ind < reference:
            notes.append(f"equilibrium[{k}] has Ind(σ)={ind} < Ind={reference}")
    return report


@dataclass
class ExponentBoundsReport(MSONable):
    """Lyapunov exponents against averaged pseudo-Euclidean singular values.

    Attributes
    ----------
    chi_minus: NDArray
        The ``q`` lowest exponents, descending.
    chi_plus: NDArray
        The ``p`` highest exponents, ascending.
    log_r_minus: NDArray
        Time averages of ``log r⁻_i`` (``r⁻_1`` largest), per unit time.
    log_r_plus: NDArray
        Time averages of ``log r⁺_i`` (``r⁺_1`` smallest), per unit time.
    minus_slack: NDArray
        ``Σ_{i<=k} log r⁻_i - Σ_{i<=k} χ⁻_i`` for ``k = 1..k1``.
    plus_slack: NDArray
        ``Σ_{i<=k} χ⁺_i - Σ_{i<=k} log r⁺_i`` for ``k = 1..k2``.
    dt: float
        Final step length.
    converged: bool
        Both the step refinement and the exponent estimate converged.
    tolerance: float
        Slack below which a converged inequality counts as violated (negated).

    """

    chi_minus: npt.NDArray
    chi_plus: npt.NDArray
    log_r_minus: npt.NDArray
    log_r_plus: npt.NDArray
    minus_slack: npt.NDArray
    plus_slack: npt.NDArray
    dt: float
    converged: bool
    tolerance: float = 1e-8

    @property
    def holds(self) -> bool | None:
        """Both inequality families hold; None when not converged."""
        if not self.converged:
            return None
        slacks = np.concatenate([self.minus_slack, self.plus_slack])
        return bool(np.all(slacks >= -self.tolerance))


def _averaged_log_singular_values(
    form_field: QuadraticFormField,
    model: VectorFieldModel,
    x0: npt.NDArray,
    T: float,
    n_steps: int,
    integrator: dict,
) -> tuple[npt.NDArray, npt.NDArray]:
    dt = T / n_steps
    x = x0
    frame_s = lagrange_diagonalize(form_field.at(x))
    ref = frame_s.reference
    sum_minus = np.zeros(frame_s.index_q)
    sum_plus = np.zeros(model.dim - frame_s.index_q)
    for step in range(n_steps):
        segment = tangent_cocycle(model, x, dt, verify=False, **integrator)
        frame_t = lagrange_diagonalize(form_field.at(segment.end_point))
        operator = frame_s.transport(segment.matrix, frame_t)
        try:
            polar = polar_decompose(ref, operator)
        except NotSeparated as exc:
            raise NotSeparatedOnStep(
                f"Step {step} ([{step * dt:.6g}, {(step + 1) * dt:.6g}]) is not separated: {exc}",
                step=step,
                witness=exc.witness,
            ) from exc
        sum_minus += np.log(polar.r_minus)
        sum_plus += np.log(polar.r_plus)
        x, frame_s = segment.end_point, frame_t
    return sum_minus / T, sum_plus / T


def wojtkowski_bounds_check(
    form_field: QuadraticFormField,
    model: VectorFieldModel,
    x0: npt.ArrayLike,
    T: float,
    k1: int,
    k2: int,
    dt: float = 0.1,
    max_halvings: int = 3,
    change_tol: float = 1e-3,
    seed: int | None = None,
    lyapunov_tolerance: float = 0.01,
    require_convergence: bool = False,
    **integrator,
) -> ExponentBoundsReport:
    """Compare Lyapunov exponents with Birkhoff averages of ``log r±``.

    The inequalities checked are, for ``k <= k1 <= q`` and ``k <= k2 <= p``,
    ``χ⁻_1 + ... + χ⁻_k <= Σ avg log r⁻_i`` and
    ``χ⁺_1 + ... + χ⁺_k >= Σ avg log r⁺_i``.

    Parameters
    ----------
    form_field:
        A field strictly separating along the orbit
    model:
        The vector field
    x0:
        Start of the orbit
    T:
        Averaging window
    k1, k2:
        Number of negative and positive terms
    dt:
        Initial step of the per-step polar decompositions
    max_halvings:
        Refinement cap for ``dt``
    change_tol:
        Step refinement stops once the averages change by less than this
    seed:
        Seed of the Lyapunov initial frame
    lyapunov_tolerance:
        Drift tolerance of the exponent estimate
    require_convergence:
        Raise NotConverged when a diagnostic fails
    integrator:
        ``rtol``, ``atol`` and ``method``

    Returns
    -------
    ExponentBoundsReport:
        Exponents, averages and cumulative slacks

    """
    point = np.asarray(x0, dtype=float)
    q = form_field.index_q
    p = model.dim - q
    if not 1 <= k1 <= q or not 1 <= k2 <= p:
        raise BadDimension(f"Need 1 <= k1 <= {q} and 1 <= k2 <= {p}, got k1={k1}, k2={k2}")
    if not T > 0:
        raise ValueError("Averaging window must be positive")

    n_steps = max(round(T / dt), 1)
    avg_minus, avg_plus = _averaged_log_singular_values(
        form_field, model, point, T, n_steps, integrator
    )
    step_converged = False
    for _ in range(max_halvings):
        n_steps *= 2
        finer_minus, finer_plus = _averaged_log_singular_values(
            form_field, model, point, T, n_steps, integrator
        )
        change = max(
            np.abs(finer_minus - avg_minus).max(initial=0.0),
            np.abs(finer_plus - avg_plus).max(initial=0.0),
        )
        avg_minus, avg_plus = finer_minus, finer_plus
        logger.debug("Bounds step %.4g: averages changed by %.2e", T / n_steps, change)
        if change < change_tol:
            step_converged = True
            break

    spectrum: LyapunovSpectrum = lyapunov_exponents(
        model, point, T, seed=seed, tolerance=lyapunov_tolerance, **integrator
    )
    chi_plus = spectrum.exponents[:p][::-1]
    chi_minus = spectrum.exponents[p:]
    minus_slack = np.cumsum(avg_minus[:k1]) - np.cumsum(chi_minus[:k1])
    plus_slack = np.cumsum(chi_plus[:k2]) - np.cumsum(avg_plus[:k2])
    converged = step_converged and spectrum.converged
    if require_convergence and not converged:
        raise NotConverged("Exponent bounds did not converge", spectrum)
    report = ExponentBoundsReport(
        chi_minus=chi_minus,
        chi_plus=chi_plus,
        log_r_minus=avg_minus,
        log_r_plus=avg_plus,
        minus_slack=minus_slack,
        plus_slack=plus_slack,
        dt=T / n_steps,
        converged=converged,
        tolerance=max(1e-8, spectrum.drift),
    )
    if report.holds is False:
        logger.warning("Exponent bounds violated: slacks %s, %s", minus_slack, plus_slack)
    return report
