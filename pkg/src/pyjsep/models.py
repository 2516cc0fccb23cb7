"""Vector-field models: the field X and its Jacobian DX."""

from __future__ import annotations

import logging
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING, Any

import numpy as np
from monty.json import MSONable

if TYPE_CHECKING:
    import numpy.typing as npt

__all__ = [
    "MODEL_FAMILIES",
    "LinearModel",
    "LorenzModel",
    "PlanarLimitCycleModel",
    "PolynomialModel",
    "TimeReversedModel",
    "VectorFieldModel",
    "model_from_spec",
]

logger = logging.getLogger(__name__)


class VectorFieldModel(MSONable, metaclass=ABCMeta):
    """An autonomous vector field on R^n with an analytic Jacobian.

    Models are immutable; subclasses store their constructor arguments as
    attributes of the same name.

    """

    family: str = ""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the phase space."""

    @abstractmethod
    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        """Return ``X(x)``."""

    @abstractmethod
    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        """Return ``DX(x)``."""

    @property
    def parameters(self) -> dict[str, Any]:
        """Constructor arguments, as stored in scenario files."""
        return {k: v for k, v in self.as_dict().items() if not k.startswith("@")}

    def __call__(self, x: npt.ArrayLike) -> npt.NDArray:
        """Return ``X(x)``."""
        return self.evaluate(np.asarray(x, dtype=float))

    def trace_jacobian(self, x: npt.ArrayLike) -> float:
        """Divergence of the field at ``x``."""
        return float(np.trace(self.jacobian(np.asarray(x, dtype=float))))

    def reversed(self) -> TimeReversedModel:
        """Return the field ``-X``, whose flow is the time reversal of this one."""
        return TimeReversedModel(base=self)

    def self_test(self, seed: int = 0, n_points: int = 5, scale: float = 2.0) -> float:
        """Compare the Jacobian with central differences at random points.

        Parameters
        ----------
        seed:
            Seed for the test points
        n_points:
            Number of random points
        scale:
            Standard deviation of the test points

        Returns
        -------
        float:
            Largest relative discrepancy found

        """
        rng = np.random.default_rng(seed)
        worst = 0.0
        for x in rng.standard_normal((n_points, self.dim)) * scale:
            analytic = self.jacobian(x)
            numeric = np.empty_like(analytic)
            for j in range(self.dim):
                h = 1e-6 * max(1.0, abs(x[j]))
                step = np.zeros(self.dim)
                step[j] = h
                numeric[:, j] = (self.evaluate(x + step) - self.evaluate(x - step)) / (2 * h)
            err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1.0)
            worst = max(worst, float(err))
        logger.debug("%s self-test: worst relative Jacobian error %.2e", self.family, worst)
        return worst


class LinearModel(VectorFieldModel):
    """Linear field ``X(x) = A x``."""

    family = "linear"

    def __init__(self, matrix: npt.ArrayLike):
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"Linear model needs a square matrix, got {mat.shape}")
        mat.setflags(write=False)
        self.matrix = mat

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        return self.matrix @ x

    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        return self.matrix.copy()


class LorenzModel(VectorFieldModel):
    """The Lorenz system ``(σ(y - x), x(ρ - z) - y, xy - βz)``."""

    family = "lorenz"

    def __init__(self, sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0):
        self.sigma = float(sigma)
        self.rho = float(rho)
        self.beta = float(beta)

    @property
    def dim(self) -> int:
        return 3

    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        return np.array(
            [
                self.sigma * (x[1] - x[0]),
                x[0] * (self.rho - x[2]) - x[1],
                x[0] * x[1] - self.beta * x[2],
            ]
        )

    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        return np.array(
            [
                [-self.sigma, self.sigma, 0.0],
                [self.rho - x[2], -1.0, -x[0]],
                [x[1], x[0], -self.beta],
            ]
        )


class PlanarLimitCycleModel(VectorFieldModel):
    """Planar Hopf normal form with a decoupled contracting axis.

    ``ẋ = -y + x(1 - r²)``, ``ẏ = x + y(1 - r²)``, ``ż = -κ z``; the unit circle
    is a periodic orbit of period 2π. ``κ = 0`` makes the axis neutral.

    """

    family = "planar_limit_cycle"

    def __init__(self, z_rate: float = 1.0):
        self.z_rate = float(z_rate)

    @property
    def dim(self) -> int:
        return 3

    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        radial = 1.0 - x[0] ** 2 - x[1] ** 2
        return np.array(
            [-x[1] + x[0] * radial, x[0] + x[1] * radial, -self.z_rate * x[2]]
        )

    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        px, py = x[0], x[1]
        return np.array(
            [
                [1.0 - 3 * px**2 - py**2, -1.0 - 2 * px * py, 0.0],
                [1.0 - 2 * px * py, 1.0 - px**2 - 3 * py**2, 0.0],
                [0.0, 0.0, -self.z_rate],
            ]
        )


class PolynomialModel(VectorFieldModel):
    """User polynomial field given as a list of monomial terms.

    Each term is ``[component, coefficient, exponents]``: it adds
    ``coefficient * prod(x_k ** exponents[k])`` to ``X_component``.

    """

    family = "polynomial"

    def __init__(self, dim: int, terms: list):
        self._dim = int(dim)
        parsed = []
        for term in terms:
            component, coefficient, exponents = term
            exps = tuple(int(e) for e in exponents)
            if len(exps) != self._dim or min(exps, default=0) < 0:
                raise ValueError(f"Bad exponents {exponents} for a {dim}-dimensional field")
            if not 0 <= int(component) < self._dim:
                raise ValueError(f"Component {component} out of range")
            parsed.append((int(component), float(coefficient), exps))
        self.terms = parsed

    @property
    def dim(self) -> int:
        return self._dim

    def as_dict(self) -> dict:
        d = super().as_dict()
        d["terms"] = [[c, a, list(e)] for c, a, e in self.terms]
        return d

    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        out = np.zeros(self._dim)
        for component, coefficient, exps in self.terms:
            out[component] += coefficient * np.prod(np.power(x, exps))
        return out

    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        out = np.zeros((self._dim, self._dim))
        for component, coefficient, exps in self.terms:
            for j, e in enumerate(exps):
                if e == 0:
                    continue
                reduced = list(exps)
                reduced[j] = e - 1
                out[component, j] += coefficient * e * np.prod(np.power(x, reduced))
        return out


class TimeReversedModel(VectorFieldModel):
    """The field ``-X`` of a base model."""

    family = "reversed"

    def __init__(self, base: VectorFieldModel):
        self.base = base

    @property
    def dim(self) -> int:
        return self.base.dim

    def evaluate(self, x: npt.NDArray) -> npt.NDArray:
        return -self.base.evaluate(x)

    def jacobian(self, x: npt.NDArray) -> npt.NDArray:
        return -self.base.jacobian(x)

    def reversed(self) -> VectorFieldModel:  # type: ignore[override]
        return self.base


MODEL_FAMILIES: dict[str, type[VectorFieldModel]] = {
    cls.family: cls
    for cls in (LinearModel, LorenzModel, PlanarLimitCycleModel, PolynomialModel)
}


def model_from_spec(family: str, parameters: dict | None = None) -> VectorFieldModel:
    """Build a builtin model from its family name and parameters.

    Parameters
    ----------
    family:
        One of ``linear``, ``lorenz``, ``planar_limit_cycle``, ``polynomial``
    parameters:
        Keyword arguments of the model constructor

    Returns
    -------
    VectorFieldModel:
        The model

    """
    try:
        cls = MODEL_FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"Unknown model family {family!r}; expected one of {sorted(MODEL_FAMILIES)}"
        ) from None
    try:
        return cls(**(parameters or {}))
    except TypeError as exc:
        raise ValueError(f"Bad parameters for {family!r}: {exc}") from exc
