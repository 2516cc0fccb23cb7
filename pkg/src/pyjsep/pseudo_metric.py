"""Pseudo-Euclidean linear algebra.

Non-degenerate quadratic forms ``J``, their adapted frames, the cones
``C+``, ``C-`` and ``C0``, pseudo-orthogonalization, J-complements and
pseudo-adjoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Union

import numpy as np
from monty.json import MSONable
from scipy.linalg import null_space, orth

from pyjsep.errors import DegenerateForm, DegenerateSubspace, NullPivot, ZeroVector
from pyjsep.utils import as_columns, symmetric_part

if TYPE_CHECKING:
    import numpy.typing as npt

__all__ = [
    "AdaptedFrame",
    "ConeClass",
    "ConeKind",
    "QuadraticForm",
    "as_form",
    "classify",
    "is_j_isometry",
    "is_non_negative_direction",
    "j_complement",
    "lagrange_diagonalize",
    "pseudo_adjoint",
    "pseudo_gram_schmidt",
    "signature",
]

logger = logging.getLogger(__name__)

DEGENERACY_REL_TOL = 1e-10
SYMMETRY_REL_TOL = 1e-12
CLASSIFY_TOL = 1e-9


class QuadraticForm(MSONable):
    """Non-degenerate symmetric bilinear form ``J`` on R^n.

    The object is immutable: arithmetic returns new forms.

    """

    def __init__(self, matrix: npt.ArrayLike, degeneracy_tol: float | None = None):
        """Initialize the QuadraticForm object.

        Parameters
        ----------
        matrix:
            Real symmetric ``n x n`` matrix (symmetric to 1e-12 relative error)
        degeneracy_tol:
            Smallest admissible ``|eigenvalue|``; defaults to 1e-10 times the
            largest ``|eigenvalue|``

        """
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"A quadratic form needs a square matrix, got {mat.shape}")
        scale = max(float(np.abs(mat).max(initial=0.0)), 1.0)
        if np.abs(mat - mat.T).max(initial=0.0) > SYMMETRY_REL_TOL * scale:
            raise ValueError("Matrix of a quadratic form must be symmetric")
        mat = symmetric_part(mat)
        eigvals = np.linalg.eigvalsh(mat)
        largest = float(np.abs(eigvals).max(initial=0.0))
        if degeneracy_tol is None:
            degeneracy_tol = DEGENERACY_REL_TOL * largest
        if largest == 0.0 or np.any(np.abs(eigvals) < degeneracy_tol):
            raise DegenerateForm(
                f"Form has |eigenvalue| {np.abs(eigvals).min():.3e} "
                f"below the degeneracy tolerance {degeneracy_tol:.3e}"
            )
        mat.setflags(write=False)
        eigvals.setflags(write=False)
        self.matrix = mat
        self.degeneracy_tol = float(degeneracy_tol)
        self._eigenvalues = eigvals

    @property
    def dim(self) -> int:
        """Dimension ``n`` of the underlying space."""
        return self.matrix.shape[0]

    @property
    def index_q(self) -> int:
        """Number of negative squares."""
        return int(np.sum(self._eigenvalues < 0))

    @property
    def p(self) -> int:
        """Number of positive squares, ``n - q``."""
        return self.dim - self.index_q

    @property
    def eigenvalues(self) -> npt.NDArray:
        """Eigenvalues in ascending order."""
        return self._eigenvalues

    @property
    def norm(self) -> float:
        """Spectral norm, the largest ``|eigenvalue|``."""
        return float(np.abs(self._eigenvalues).max())

    @property
    def is_indefinite(self) -> bool:
        """True when both cones ``C+`` and ``C-`` are non-trivial."""
        return 0 < self.index_q < self.dim

    def __call__(self, v: npt.ArrayLike) -> float:
        """Evaluate ``J(v) = <Jv, v>``."""
        vec = np.asarray(v, dtype=float)
        return float(vec @ self.matrix @ vec)

    def bilinear(self, v: npt.ArrayLike, w: npt.ArrayLike) -> float:
        """Evaluate ``(v, w) = <Jv, w>``."""
        return float(np.asarray(v, dtype=float) @ self.matrix @ np.asarray(w, dtype=float))

    def congruent(self, basis: npt.ArrayLike) -> QuadraticForm:
        """Return the form ``QᵀJQ`` expressed in the columns of ``basis``."""
        q_mat = np.asarray(basis, dtype=float)
        return QuadraticForm(q_mat.T @ self.matrix @ q_mat)

    def __mul__(self, factor: float) -> QuadraticForm:
        """Scale the form by a non-zero factor.

        Parameters
        ----------
        factor:
            The factor to multiply the form by

        Returns
        -------
        QuadraticForm:
            The new QuadraticForm object

        """
        return QuadraticForm(self.matrix * factor)

    __rmul__ = __mul__

    def __truediv__(self, factor: float) -> QuadraticForm:
        """Divide the form by a non-zero factor."""
        return QuadraticForm(self.matrix / factor)

    def __neg__(self) -> QuadraticForm:
        """Time-reversal form ``-J``; swaps the positive and negative cones."""
        return QuadraticForm(-self.matrix)

    def __repr__(self) -> str:
        return f"QuadraticForm(dim={self.dim}, index_q={self.index_q})"


FormLike = Union[QuadraticForm, "npt.ArrayLike"]


def as_form(form: FormLike) -> QuadraticForm:
    """Coerce a matrix or a QuadraticForm into a QuadraticForm."""
    if isinstance(form, QuadraticForm):
        return form
    return QuadraticForm(form)


@dataclass
class AdaptedFrame(MSONable):
    """Basis in which a form reads ``diag(-1, ..., -1, +1, ..., +1)``.

    Attributes
    ----------
    basis: NDArray
        Columns ``v_1 .. v_n``; the first ``q`` span the standard negative
        subspace, the remaining ``p`` the standard positive one.
    signature_pattern: list[int]
        The ``±1`` diagonal, negatives first.

    """

    basis: npt.NDArray
    signature_pattern: list[int]

    def __post_init__(self):
        """Coerce the stored arrays."""
        self.basis = np.array(self.basis, dtype=float)
        self.signature_pattern = [int(s) for s in self.signature_pattern]
        if self.basis.shape != (len(self.signature_pattern),) * 2:
            raise ValueError("Basis and signature pattern have mismatched sizes")
        if sorted(self.signature_pattern) != self.signature_pattern:
            raise ValueError("Signature pattern must list negative entries first")

    @property
    def index_q(self) -> int:
        """Number of ``-1`` entries."""
        return self.signature_pattern.count(-1)

    @property
    def reference(self) -> npt.NDArray:
        """The diagonal reference matrix ``diag(signature_pattern)``."""
        return np.diag(np.asarray(self.signature_pattern, dtype=float))

    @property
    def negative_subspace(self) -> npt.NDArray:
        """Columns spanning the standard negative subspace."""
        return self.basis[:, : self.index_q]

    @property
    def positive_subspace(self) -> npt.NDArray:
        """Columns spanning the standard positive subspace."""
        return self.basis[:, self.index_q :]

    def coordinates(self, v: npt.ArrayLike) -> npt.NDArray:
        """Coordinates of ``v`` in the adapted basis."""
        return np.linalg.solve(self.basis, np.asarray(v, dtype=float))

    def transport(self, operator: npt.ArrayLike, target: AdaptedFrame) -> npt.NDArray:
        """Matrix of ``operator`` from this frame to the ``target`` frame."""
        return np.linalg.solve(target.basis, np.asarray(operator, dtype=float) @ self.basis)

    def residual(self, form: FormLike) -> float:
        """Max-norm residual of the congruence identity."""
        jmat = as_form(form).matrix
        return float(np.abs(self.basis.T @ jmat @ self.basis - self.reference).max())


class ConeKind(str, Enum):
    """Cone membership of a non-zero vector."""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    ZERO = "zero"


@dataclass(frozen=True)
class ConeClass(MSONable):
    """Result of :func:`classify`.

    Attributes
    ----------
    kind: ConeKind
        Which cone the vector lies in.
    margin: float
        ``J(v) / <v, v>``.

    """

    kind: ConeKind
    margin: float


def signature(form: FormLike) -> tuple[int, int]:
    """Return ``(p, q)``, the numbers of positive and negative squares.

    Parameters
    ----------
    form:
        A QuadraticForm or a symmetric matrix

    Returns
    -------
    tuple[int, int]:
        ``(p, q)`` with ``p + q = n``

    """
    jform = as_form(form)
    return jform.p, jform.index_q


def lagrange_diagonalize(form: FormLike) -> AdaptedFrame:
    """Build a frame in which ``form`` has entries from ``{-1, 1}`` only.

    Eigenvectors ``u_i`` of ``J`` are rescaled to ``u_i / |λ_i|^{1/2}``; columns
    are ordered negatives first and signed so their largest entry is positive.

    Parameters
    ----------
    form:
        A non-degenerate form

    Returns
    -------
    AdaptedFrame:
        Frame with ``basisᵀ J basis = diag(signature_pattern)``

    """
    jform = as_form(form)
    eigvals, eigvecs = np.linalg.eigh(jform.matrix)
    pivots = np.argmax(np.abs(eigvecs), axis=0)
    signs = np.sign(eigvecs[pivots, np.arange(jform.dim)])
    eigvecs = eigvecs * np.where(signs == 0, 1.0, signs)
    basis = eigvecs / np.sqrt(np.abs(eigvals))
    pattern = [-1 if lam < 0 else 1 for lam in eigvals]
    return AdaptedFrame(basis=basis, signature_pattern=pattern)


def classify(form: FormLike, v: npt.ArrayLike, tol: float = CLASSIFY_TOL) -> ConeClass:
    """Decide which cone ``v`` lies in.

    The zero band is ``tol * ||J|| * <v, v>``, so the verdict does not change
    under ``v -> c v`` or ``J -> c J`` for ``c > 0``.

    Parameters
    ----------
    form:
        The quadratic form
    v:
        A non-zero vector
    tol:
        Relative width of the zero band

    Returns
    -------
    ConeClass:
        Cone membership and the margin ``J(v)/<v, v>``

    """
    jform = as_form(form)
    vec = np.asarray(v, dtype=float)
    norm2 = float(vec @ vec)
    if norm2 == 0.0:
        raise ZeroVector("Cannot classify the zero vector")
    margin = jform(vec) / norm2
    band = tol * jform.norm
    if margin > band:
        kind = ConeKind.POSITIVE
    elif margin < -band:
        kind = ConeKind.NEGATIVE
    else:
        kind = ConeKind.ZERO
    return ConeClass(kind=kind, margin=margin)


def is_non_negative_direction(
    form: FormLike, direction: npt.ArrayLike, tol: float = CLASSIFY_TOL
) -> bool:
    """Return True when ``J(X) >= 0`` up to the relative zero band."""
    jform = as_form(form)
    vec = np.asarray(direction, dtype=float)
    return jform(vec) >= -tol * jform.norm * float(vec @ vec)


def pseudo_gram_schmidt(
    form: FormLike, basis: npt.ArrayLike, tol: float = DEGENERACY_REL_TOL
) -> npt.NDArray:
    """Orthonormalize ``basis`` with respect to the J-bilinear form.

    Parameters
    ----------
    form:
        The quadratic form
    basis:
        Linearly independent vectors, as matrix columns
    tol:
        Relative null-pivot threshold on ``|(w, w)| / (||J|| |w|^2)``

    Returns
    -------
    NDArray:
        Columns ``u_i`` with ``(u_i, u_j) = ±δ_ij``

    """
    jform = as_form(form)
    vectors = as_columns(basis, jform.dim)
    out: list[npt.NDArray] = []
    norms: list[float] = []
    for idx in range(vectors.shape[1]):
        v = vectors[:, idx]
        w = v.copy()
        for u, s in zip(out, norms):
            w = w - s * jform.bilinear(u, v) * u
        length = float(np.linalg.norm(w))
        if length <= 1e-12 * max(float(np.linalg.norm(v)), 1.0):
            raise ValueError(f"Vector {idx} is linearly dependent on its predecessors")
        jnorm = jform(w)
        if abs(jnorm) < tol * jform.norm * length**2:
            raise NullPivot(f"Vector {idx} has vanishing J-norm {jnorm:.3e}")
        out.append(w / np.sqrt(abs(jnorm)))
        norms.append(float(np.sign(jnorm)))
    return np.column_stack(out)


def j_complement(
    form: FormLike, subspace: npt.ArrayLike, tol: float = DEGENERACY_REL_TOL
) -> npt.NDArray:
    """Return an orthonormal basis of ``E⊥ = {v : <J e, v> = 0 for all e in E}``.

    Parameters
    ----------
    form:
        The quadratic form
    subspace:
        Spanning vectors of ``E`` (matrix columns, or a single vector)
    tol:
        Relative threshold below which ``J|E`` counts as degenerate

    Returns
    -------
    NDArray:
        ``n x (n - dim E)`` matrix with orthonormal columns

    """
    jform = as_form(form)
    spanning = as_columns(subspace, jform.dim)
    q_mat = orth(spanning)
    if q_mat.shape[1] != spanning.shape[1]:
        raise ValueError("Spanning set of the subspace is linearly dependent")
    restricted = np.linalg.eigvalsh(symmetric_part(q_mat.T @ jform.matrix @ q_mat))
    if np.abs(restricted).min() < tol * jform.norm:
        raise DegenerateSubspace("J restricted to the subspace is degenerate")
    return null_space(q_mat.T @ jform.matrix)


def pseudo_adjoint(form: FormLike, operator: npt.ArrayLike) -> npt.NDArray:
    """Return ``L⁺ = J⁻¹ Lᵀ J``, so that ``(Lv, w) = (v, L⁺w)``."""
    jmat = as_form(form).matrix
    lmat = np.asarray(operator, dtype=float)
    return np.linalg.solve(jmat, lmat.T @ jmat)


def is_j_isometry(
    form: FormLike, operator: npt.ArrayLike, tol: float = DEGENERACY_REL_TOL
) -> bool:
    """Return True when ``||Uᵀ J U - J|| <= tol * ||J||``."""
    jform = as_form(form)
    umat = np.asarray(operator, dtype=float)
    residual = np.linalg.norm(umat.T @ jform.matrix @ umat - jform.matrix, ord=2)
    return bool(residual <= tol * jform.norm)
