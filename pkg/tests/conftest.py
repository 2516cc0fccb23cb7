"""Shared fixtures for tests."""

from dataclasses import dataclass

import numpy as np
import pytest
from scipy.linalg import expm

from pyjsep.models import LinearModel, LorenzModel, PlanarLimitCycleModel


@pytest.fixture(scope="session")
def test_dir():
    from pathlib import Path

    module_dir = Path(__file__).resolve().parent.parent
    test_dir = module_dir / "test_files"
    return test_dir.resolve()


@pytest.fixture(scope="session")
def lorenz():
    return LorenzModel(sigma=10.0, rho=28.0, beta=8.0 / 3.0)


@pytest.fixture(scope="session")
def diagonal_model():
    """Linear saddle with spectrum (-2, -1, 1)."""
    return LinearModel(np.diag([-2.0, -1.0, 1.0]))


@pytest.fixture(scope="session")
def limit_cycle():
    return PlanarLimitCycleModel(z_rate=1.0)


def standard_form(q, n):
    """diag(-1, ..., -1, 1, ..., 1) with q negative entries."""
    return np.diag([-1.0] * q + [1.0] * (n - q))


def random_isometry(rng, q, n, scale=0.5):
    """Random J-isometry for J = standard_form(q, n), as the exponential of a J-skew matrix."""
    gen = rng.standard_normal((n, n)) * scale
    gen[:q, :q] = gen[:q, :q] - gen[:q, :q].T
    gen[q:, q:] = gen[q:, q:] - gen[q:, q:].T
    gen[q:, :q] = gen[:q, q:].T
    return expm(gen)


def random_triangular_hyperbolic(rng, n, q):
    """Upper-triangular matrix with q negative and n - q positive, well separated diagonal entries."""
    mags = 0.3 + 0.4 * rng.permutation(n) + rng.uniform(0.0, 0.1, n)
    amat = np.triu(rng.standard_normal((n, n)) * 0.5, 1)
    amat[np.diag_indices(n)] = np.concatenate([-mags[:q], mags[q:]])
    return amat


def random_symmetric_form(rng, n, q):
    """Random non-degenerate symmetric matrix with q negative eigenvalues."""
    basis = np.linalg.qr(rng.standard_normal((n, n)))[0]
    mags = rng.uniform(0.2, 5.0, n)
    signs = np.array([-1.0] * q + [1.0] * (n - q))
    return basis @ np.diag(signs * mags) @ basis.T


@dataclass
class BruteForce:
    """Dense sampling oracles for the separation and pencil questions."""

    n_samples: int = 10_000
    seed: int = 42

    def unit_vectors(self, n):
        rng = np.random.default_rng(self.seed)
        pts = rng.standard_normal((self.n_samples, n))
        return pts / np.linalg.norm(pts, axis=1, keepdims=True)

    def separation_minimum(self, jmat, lmat):
        """Smallest J(Lv)/|Lv|^2 over sampled unit v with J(v) >= 0."""
        vs = self.unit_vectors(len(jmat))
        jv = np.einsum("ij,jk,ik->i", vs, jmat, vs)
        images = vs[jv >= 0] @ np.asarray(lmat).T
        vals = np.einsum("ij,jk,ik->i", images, jmat, images)
        return float((vals / np.einsum("ij,ij->i", images, images)).min())

    def pencil_bounds(self, jmat, fmat):
        """(sup over C- of F/J, inf over C+ of F/J) on sampled unit vectors."""
        vs = self.unit_vectors(len(jmat))
        jv = np.einsum("ij,jk,ik->i", vs, jmat, vs)
        fv = np.einsum("ij,jk,ik->i", vs, fmat, vs)
        neg, pos = jv < -1e-3, jv > 1e-3
        return float((fv[neg] / jv[neg]).max()), float((fv[pos] / jv[pos]).min())


@pytest.fixture(scope="session")
def brute_force():
    return BruteForce()
