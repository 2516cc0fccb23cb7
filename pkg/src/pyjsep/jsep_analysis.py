"""Cone analysis of a single linear operator relative to a quadratic form.

Separation verdicts with S-procedure certificates, the polar decomposition
``L = RU`` and its singular spectrum ``r±``, monotonicity, Kühne pencil
bounds and volume expansion rates ``σ_d``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

import numpy as np
from monty.json import MSONable
from scipy.linalg import eig, orth
from scipy.optimize import brentq, minimize, minimize_scalar

from pyjsep.errors import (
    BadDimension,
    IntegrityWarning,
    NotNonnegativeOnNullCone,
    NotSeparated,
    Singular,
)
from pyjsep.pseudo_metric import as_form, lagrange_diagonalize
from pyjsep.utils import sample_unit_sphere, spectral_norm, symmetric_part

if TYPE_CHECKING:
    import numpy.typing as npt

    from pyjsep.pseudo_metric import FormLike, QuadraticForm

__all__ = [
    "CompositionReport",
    "MonotonicityLevel",
    "PencilBounds",
    "PolarDecomposition",
    "SeparationLevel",
    "SeparationVerdict",
    "check_separation",
    "composition_bounds",
    "is_j_monotone",
    "kuhne_bounds",
    "monotonicity_from_spectrum",
    "polar_decompose",
    "reversed_separation",
    "sigma_d",
    "weakest",
]

logger = logging.getLogger(__name__)

SEPARATION_TOL = 1e-9
MONOTONE_TOL = 1e-9
CLUSTER_REL_GAP = 1e-8
POSITIVITY_FLOOR = 1e-13


class SeparationLevel(str, Enum):
    """Ordered separation levels, weakest first."""

    NOT_SEPARATED = "not_separated"
    SEPARATED = "separated"
    STRICTLY_SEPARATED = "strictly_separated"

    @property
    def rank(self) -> int:
        """Position in the weakest-first ordering."""
        return list(SeparationLevel).index(self)


def weakest(levels: Iterable[SeparationLevel]) -> SeparationLevel:
    """Return the weakest of several separation levels."""
    return min(levels, key=lambda level: level.rank)


@dataclass
class SeparationVerdict(MSONable):
    """Outcome of :func:`check_separation`.

    Attributes
    ----------
    level: SeparationLevel
        The separation level.
    certificate: float | None
        ``λ >= 0`` with ``LᵀJL - λJ`` positive (semi)definite.
    margin: float
        ``max_λ min-eig(LᵀJL - λJ)`` relative to the operator scale.
    witness: NDArray | None
        A unit vector ``v`` with ``J(v) >= 0`` and ``J(Lv) <= 0``.
    sampled_minimum: float
        Smallest relative ``J(Lv)`` over sampled unit vectors with ``J(v) >= 0``.

    """

    level: SeparationLevel
    certificate: float | None = None
    margin: float = float("nan")
    witness: npt.NDArray | None = None
    sampled_minimum: float = float("nan")

    @property
    def is_strict(self) -> bool:
        """True for strict separation."""
        return self.level is SeparationLevel.STRICTLY_SEPARATED

    @property
    def is_separated(self) -> bool:
        """True for separation, strict or not."""
        return self.level is not SeparationLevel.NOT_SEPARATED


def _min_eig(mat: npt.NDArray) -> float:
    return float(np.linalg.eigvalsh(symmetric_part(mat))[0])


def _cone_candidates(jform: QuadraticForm, count: int, seed: int | None) -> npt.NDArray:
    """Sampled unit vectors plus frame and null directions, as rows."""
    frame = lagrange_diagonalize(jform)
    neg, pos = frame.negative_subspace, frame.positive_subspace
    special = [frame.basis[:, i] for i in range(jform.dim)]
    for i in range(neg.shape[1]):
        for j in range(pos.shape[1]):
            special.extend([neg[:, i] + pos[:, j], neg[:, i] - pos[:, j]])
    special_arr = np.array(special)
    special_arr /= np.linalg.norm(special_arr, axis=1, keepdims=True)
    return np.vstack([special_arr, sample_unit_sphere(jform.dim, count, seed)])


def _refine_witness(
    jmat: npt.NDArray, gram: npt.NDArray, start: npt.NDArray
) -> npt.NDArray:
    """Locally minimize ``J(Lv)`` over unit vectors with ``J(v) >= 0``."""
    constraints = [
        {"type": "eq", "fun": lambda v: v @ v - 1.0, "jac": lambda v: 2 * v},
        {"type": "ineq", "fun": lambda v: v @ jmat @ v, "jac": lambda v: 2 * jmat @ v},
    ]
    res = minimize(
        lambda v: v @ gram @ v,
        start,
        jac=lambda v: 2 * gram @ v,
        constraints=constraints,
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 200},
    )
    vec = res.x / np.linalg.norm(res.x)
    if vec @ jmat @ vec < -1e-12 or vec @ gram @ vec > start @ gram @ start:
        return start
    return vec


def check_separation(
    form: FormLike,
    operator: npt.ArrayLike,
    tol: float = SEPARATION_TOL,
    n_samples: int = 2000,
    seed: int | None = 0,
) -> SeparationVerdict:
    """Decide whether ``L`` maps ``C+ ∪ C0`` into ``C+``.

    The decision uses the S-procedure: ``L`` is strictly separating iff some
    ``λ >= 0`` makes ``LᵀJL - λJ`` positive definite. The concave function
    ``λ -> min-eig(LᵀJL - λJ)`` is maximized by a bounded golden-section
    search and the result is cross-checked against sampled unit vectors.

    Parameters
    ----------
    form:
        An indefinite non-degenerate form
    operator:
        The linear operator ``L``
    tol:
        Relative tolerance of the zero band
    n_samples:
        Number of random unit vectors in the cross-check
    seed:
        Seed of the cross-check sampler

    Returns
    -------
    SeparationVerdict:
        Level, certificate ``λ`` and, when not separated, a witness

    """
    jform = as_form(form)
    if not jform.is_indefinite:
        raise ValueError("Separation checks need an indefinite form")
    jmat = jform.matrix
    lmat = np.asarray(operator, dtype=float)
    gram = symmetric_part(lmat.T @ jmat @ lmat)
    scale = max(spectral_norm(gram), jform.norm)
    lam_hi = 2.0 * spectral_norm(gram) / float(np.abs(jform.eigenvalues).min()) + 1.0

    def lowest(lam: float) -> float:
        return _min_eig(gram - lam * jmat)

    res = minimize_scalar(
        lambda lam: -lowest(lam),
        bounds=(0.0, lam_hi),
        method="bounded",
        options={"xatol": 1e-12 * lam_hi, "maxiter": 1000},
    )
    best_lam = max((0.0, float(res.x), lam_hi), key=lowest)
    margin = lowest(best_lam) / scale
    logger.debug("S-procedure: λ=%.6g margin=%.3e", best_lam, margin)

    if margin > tol:
        level = SeparationLevel.STRICTLY_SEPARATED
    elif margin >= -tol:
        level = SeparationLevel.SEPARATED
    else:
        level = SeparationLevel.NOT_SEPARATED

    candidates = _cone_candidates(jform, n_samples, seed)
    jv = np.einsum("ij,jk,ik->i", candidates, jmat, candidates)
    jlv = np.einsum("ij,jk,ik->i", candidates, gram, candidates)
    admissible = jv >= 0.0
    sampled = jlv[admissible] / scale
    best = int(np.flatnonzero(admissible)[np.argmin(sampled)])
    sampled_min = float(sampled.min())

    if level is not SeparationLevel.NOT_SEPARATED and sampled_min < -tol:
        warnings.warn(
            f"Sampling found J(Lv)={sampled_min:.3e} < 0 on the closed positive "
            "cone although the S-procedure certified separation; downgrading",
            IntegrityWarning,
            stacklevel=2,
        )
        level = SeparationLevel.NOT_SEPARATED

    if level is SeparationLevel.NOT_SEPARATED:
        witness = _refine_witness(jmat, gram, candidates[best])
        if witness @ gram @ witness > 0:
            logger.warning("No cone-swapping witness found by local refinement")
        return SeparationVerdict(
            level=level, margin=margin, witness=witness, sampled_minimum=sampled_min
        )
    return SeparationVerdict(
        level=level, certificate=best_lam, margin=margin, sampled_minimum=sampled_min
    )


def reversed_separation(form: FormLike, operator: npt.ArrayLike, **kwargs) -> SeparationVerdict:
    """Check ``L⁻¹`` against the time-reversal form ``-J``."""
    lmat = np.asarray(operator, dtype=float)
    return check_separation(-as_form(form), np.linalg.inv(lmat), **kwargs)


@dataclass
class PolarDecomposition(MSONable):
    """Factorization ``L = RU`` of a J-separated operator.

    Attributes
    ----------
    R: NDArray
        J-symmetric factor with positive spectrum.
    U: NDArray
        J-isometry.
    r_minus: NDArray
        Eigenvalues of ``R`` on J-negative eigenvectors, descending.
    r_plus: NDArray
        Eigenvalues of ``R`` on J-positive eigenvectors, ascending.

    """

    R: npt.NDArray
    U: npt.NDArray
    r_minus: npt.NDArray
    r_plus: npt.NDArray
    residuals: dict = field(default_factory=dict)

    @property
    def r_lower(self) -> float:
        """``r_-``, the largest of ``r_minus`` (0 when ``q = 0``)."""
        return float(self.r_minus[0]) if len(self.r_minus) else 0.0

    @property
    def r_upper(self) -> float:
        """``r_+``, the smallest of ``r_plus`` (inf when ``p = 0``)."""
        return float(self.r_plus[0]) if len(self.r_plus) else float("inf")


def polar_decompose(
    form: FormLike, operator: npt.ArrayLike, tol: float = SEPARATION_TOL
) -> PolarDecomposition:
    """Compute ``L = RU`` with ``R = (L L⁺)^{1/2}``.

    The computation runs in the adapted frame of ``J``. The values ``r`` are
    read off the unsquared eigenproblem ``[[0, L⁺], [L, 0]]``, whose
    eigenvalues are ``±r``, so strongly contracting directions keep their
    relative accuracy. Eigenvectors sharing a value are re-diagonalized
    against ``J`` so that each carries a definite sign.

    Parameters
    ----------
    form:
        A non-degenerate form
    operator:
        An invertible J-separated operator
    tol:
        Relative tolerance on imaginary parts and J-signs

    Returns
    -------
    PolarDecomposition:
        Factors and the singular spectrum ``r±``

    """
    jform = as_form(form)
    lmat = np.asarray(operator, dtype=float)
    svals = np.linalg.svd(lmat, compute_uv=False)
    if svals[-1] <= 1e-12 * svals[0]:
        raise Singular("Operator is not invertible")

    frame = lagrange_diagonalize(jform)
    basis = frame.basis
    n = jform.dim
    ref = np.asarray(frame.signature_pattern, dtype=float)
    lt = np.linalg.solve(basis, lmat @ basis)
    adj = ref[:, None] * lt.T * ref[None, :]
    block = np.block([[np.zeros((n, n)), adj], [lt, np.zeros((n, n))]])

    evals, evecs = np.linalg.eig(block)
    order = np.argsort(-evals.real, kind="stable")[:n]
    evals, evecs = evals[order], evecs[n:, order]
    top = float(np.abs(evals).max())
    if np.any(np.abs(evals.imag) > tol * top):
        raise NotSeparated("L L⁺ has a non-real eigenvalue")
    evals, evecs = evals.real, evecs.real
    if np.any(evals <= POSITIVITY_FLOOR * top):
        raise NotSeparated("L L⁺ has a non-positive eigenvalue")

    order = np.argsort(evals)
    groups: list[list[int]] = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        if evals[cur] - evals[prev] <= CLUSTER_REL_GAP * top:
            groups[-1].append(int(cur))
        else:
            groups.append([int(cur)])

    roots, vectors, signs = [], [], []
    for group in groups:
        span = orth(evecs[:, group])
        if span.shape[1] != len(group):
            raise NotSeparated("L L⁺ is not diagonalizable")
        gram = symmetric_part(span.T @ (ref[:, None] * span))
        gvals, gvecs = np.linalg.eigh(gram)
        if np.abs(gvals).min() < tol:
            raise NotSeparated("Eigenvector of L L⁺ lies on the null cone")
        value = float(np.mean(evals[group]))
        for gval, gvec in zip(gvals, gvecs.T):
            roots.append(value)
            vectors.append(span @ gvec)
            signs.append(np.sign(gval))
    roots_arr = np.asarray(roots)
    vec_mat = np.column_stack(vectors)
    signs_arr = np.asarray(signs)
    if int(np.sum(signs_arr < 0)) != frame.index_q:
        raise NotSeparated("J-signs of the eigenvectors of L L⁺ do not match the index")

    r_minus = np.sort(roots_arr[signs_arr < 0])[::-1]
    r_plus = np.sort(roots_arr[signs_arr > 0])
    if len(r_minus) and len(r_plus) and r_minus[0] > r_plus[0] * (1 + tol):
        raise NotSeparated(
            f"Singular spectrum is not separated: r_-={r_minus[0]:.6g} > r_+={r_plus[0]:.6g}"
        )

    rt = vec_mat @ np.diag(roots_arr) @ np.linalg.inv(vec_mat)
    ut = np.linalg.solve(rt, lt)
    inv_basis = np.linalg.inv(basis)
    r_op = basis @ rt @ inv_basis
    u_op = basis @ ut @ inv_basis

    jmat = jform.matrix
    lnorm = spectral_norm(lmat)
    residuals = {
        "reconstruction": spectral_norm(lmat - r_op @ u_op) / lnorm,
        "isometry": spectral_norm(u_op.T @ jmat @ u_op - jmat) / jform.norm,
        "j_symmetry": spectral_norm(jmat @ r_op - r_op.T @ jmat)
        / (jform.norm * spectral_norm(r_op)),
    }
    if max(residuals.values()) > 1e-8:
        warnings.warn(
            f"Polar decomposition residuals above 1e-8: {residuals}",
            IntegrityWarning,
            stacklevel=2,
        )
    return PolarDecomposition(
        R=r_op, U=u_op, r_minus=r_minus, r_plus=r_plus, residuals=residuals
    )


class MonotonicityLevel(str, Enum):
    """Monotonicity of an operator relative to a form."""

    NOT_MONOTONE = "not_monotone"
    MONOTONE = "monotone"
    STRICTLY_MONOTONE = "strictly_monotone"


def monotonicity_from_spectrum(
    r_lower: float, r_upper: float, tol: float = MONOTONE_TOL
) -> MonotonicityLevel:
    """Classify ``r_- <= 1 <= r_+`` from the extreme singular values."""
    if r_lower < 1 - tol and r_upper > 1 + tol:
        return MonotonicityLevel.STRICTLY_MONOTONE
    if r_lower <= 1 + tol and r_upper >= 1 - tol:
        return MonotonicityLevel.MONOTONE
    return MonotonicityLevel.NOT_MONOTONE


def is_j_monotone(
    form: FormLike, operator: npt.ArrayLike, tol: float = MONOTONE_TOL
) -> MonotonicityLevel:
    """Return the monotonicity level of ``L``.

    ``L`` is (strictly) J-monotone iff ``r_- <= 1 <= r_+`` (``r_- < 1 < r_+``).

    """
    polar = polar_decompose(form, operator)
    return monotonicity_from_spectrum(polar.r_lower, polar.r_upper, tol)


@dataclass
class PencilBounds(MSONable):
    """Kühne bounds of a symmetric form ``F`` relative to ``J``.

    Attributes
    ----------
    r_lower: float
        ``sup_{C-} F(v)/J(v)``.
    r_upper: float
        ``inf_{C+} F(v)/J(v)``.
    method: str
        ``"pencil"`` for generalized eigenvalues, ``"bracket"`` for the
        root-bracketing fallback.

    """

    r_lower: float
    r_upper: float
    method: str = "pencil"


def _null_cone_minimum(
    jform: QuadraticForm, fmat: npt.NDArray, count: int, seed: int | None
) -> npt.NDArray:
    """Null vector of ``J`` with the smallest value of ``F``."""
    frame = lagrange_diagonalize(jform)
    neg, pos = frame.negative_subspace, frame.positive_subspace
    cands = []
    for i in range(neg.shape[1]):
        for j in range(pos.shape[1]):
            cands.extend([neg[:, i] + pos[:, j], neg[:, i] - pos[:, j]])
    rng = np.random.default_rng(seed)
    for _ in range(count):
        a = rng.standard_normal(neg.shape[1])
        b = rng.standard_normal(pos.shape[1])
        cands.append(neg @ (a / np.linalg.norm(a)) + pos @ (b / np.linalg.norm(b)))
    cand_arr = np.array(cands)
    values = np.einsum("ij,jk,ik->i", cand_arr, fmat, cand_arr)
    values /= np.einsum("ij,ij->i", cand_arr, cand_arr)
    return cand_arr[int(np.argmin(values))]


def kuhne_bounds(
    form: FormLike,
    bilinear: npt.ArrayLike,
    tol: float = SEPARATION_TOL,
    seed: int | None = 0,
) -> PencilBounds:
    """Largest interval ``[r_-, r_+]`` with ``F(v) >= r J(v)`` for all ``v``.

    Parameters
    ----------
    form:
        An indefinite form ``J``
    bilinear:
        Symmetric matrix of ``F``, non-negative on the null cone of ``J``
    tol:
        Relative tolerance
    seed:
        Seed of the null-cone sampler used to report a witness

    Returns
    -------
    PencilBounds:
        The bounds ``r_lower <= r_upper``

    """
    jform = as_form(form)
    if not jform.is_indefinite:
        raise ValueError("Kühne bounds need an indefinite form")
    jmat = jform.matrix
    fmat = np.asarray(bilinear, dtype=float)
    if np.abs(fmat - fmat.T).max() > 1e-12 * max(np.abs(fmat).max(), 1.0):
        raise ValueError("F must be symmetric")
    fmat = symmetric_part(fmat)
    scale = max(spectral_norm(fmat), jform.norm)

    def lowest(r: float) -> float:
        return _min_eig(fmat - r * jmat)

    rho = 2.0 * spectral_norm(fmat) / float(np.abs(jform.eigenvalues).min()) + 1.0
    res = minimize_scalar(
        lambda r: -lowest(r),
        bounds=(-rho, rho),
        method="bounded",
        options={"xatol": 1e-12 * rho, "maxiter": 1000},
    )
    r_star = float(res.x)
    if lowest(r_star) < -tol * scale:
        witness = _null_cone_minimum(jform, fmat, 2000, seed)
        raise NotNonnegativeOnNullCone(
            f"F is negative on the null cone: F(w)={witness @ fmat @ witness:.3e}",
            witness=witness,
        )

    evals, evecs = eig(fmat, jmat)
    lower, upper = -np.inf, np.inf
    pencil_ok = bool(np.all(np.isfinite(evals)))
    if pencil_ok:
        for lam, vec in zip(evals, evecs.T):
            if abs(lam.imag) > 1e-9 * max(abs(lam), 1.0):
                pencil_ok = False
                break
            v = vec.real
            jnorm = float(v @ jmat @ v) / float(v @ v)
            if abs(jnorm) < tol * jform.norm:
                pencil_ok = False
                break
            if jnorm > 0:
                upper = min(upper, float(lam.real))
            else:
                lower = max(lower, float(lam.real))
    if pencil_ok:
        slack = -1e-7 * scale
        pencil_ok = lower <= upper + 1e-9 * scale and min(lowest(lower), lowest(upper)) >= slack
    if pencil_ok:
        return PencilBounds(r_lower=lower, r_upper=upper, method="pencil")

    logger.debug("Pencil eigenvalues unusable; bracketing roots of min-eig(F - rJ)")
    if lowest(r_star) <= tol * scale:
        return PencilBounds(r_lower=r_star, r_upper=r_star, method="bracket")
    step = 1.0
    while lowest(r_star + step) >= 0:
        step *= 2
    upper = brentq(lowest, r_star, r_star + step, xtol=1e-14 * max(rho, 1.0))
    step = 1.0
    while lowest(r_star - step) >= 0:
        step *= 2
    lower = brentq(lowest, r_star - step, r_star, xtol=1e-14 * max(rho, 1.0))
    return PencilBounds(r_lower=lower, r_upper=upper, method="bracket")


def sigma_d(form: FormLike, operator: npt.ArrayLike, d: int) -> float:
    """Volume expansion ``σ_d(L) = r_+^1 ... r_+^d``.

    Parameters
    ----------
    form:
        The quadratic form
    operator:
        A J-separated operator
    d:
        Dimension, ``1 <= d <= p``

    Returns
    -------
    float:
        Product of the ``d`` smallest values of ``r_plus``

    """
    polar = polar_decompose(form, operator)
    if not 1 <= d <= len(polar.r_plus):
        raise BadDimension(f"d={d} outside [1, {len(polar.r_plus)}]")
    return float(np.prod(polar.r_plus[:d]))


@dataclass
class CompositionReport(MSONable):
    """Singular values ``r_±^1`` of a product ``L1 L2`` and of its factors.

    Attributes
    ----------
    r_plus: tuple[float, float, float]
        ``r_+^1`` of ``L1 L2``, ``L1`` and ``L2``.
    r_minus: tuple[float, float, float]
        ``r_-^1`` of ``L1 L2``, ``L1`` and ``L2``.
    plus_slack: float
        ``r_+^1(L1 L2) - r_+^1(L1) r_+^1(L2)``, non-negative.
    minus_slack: float
        ``r_-^1(L1) r_-^1(L2) - r_-^1(L1 L2)``, non-negative.

    """

    r_plus: tuple
    r_minus: tuple
    plus_slack: float
    minus_slack: float

    def holds(self, tol: float = 1e-9) -> bool:
        """True when both composition inequalities hold up to ``tol``."""
        return self.plus_slack >= -tol and self.minus_slack >= -tol


def composition_bounds(
    form: FormLike, first: npt.ArrayLike, second: npt.ArrayLike
) -> CompositionReport:
    """Compare the singular spectrum of ``L1 L2`` with those of its factors."""
    l1 = np.asarray(first, dtype=float)
    l2 = np.asarray(second, dtype=float)
    prod_ = polar_decompose(form, l1 @ l2)
    p1 = polar_decompose(form, l1)
    p2 = polar_decompose(form, l2)
    return CompositionReport(
        r_plus=(prod_.r_upper, p1.r_upper, p2.r_upper),
        r_minus=(prod_.r_lower, p1.r_lower, p2.r_lower),
        plus_slack=prod_.r_upper - p1.r_upper * p2.r_upper,
        minus_slack=p1.r_lower * p2.r_lower - prod_.r_lower,
    )
