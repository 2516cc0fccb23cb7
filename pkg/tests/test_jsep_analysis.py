import numpy as np
import pytest
from conftest import random_isometry, random_symmetric_form, standard_form
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from pyjsep.errors import NotNonnegativeOnNullCone, NotSeparated, Singular
from pyjsep.jsep_analysis import (
    MonotonicityLevel,
    SeparationLevel,
    check_separation,
    composition_bounds,
    is_j_monotone,
    kuhne_bounds,
    monotonicity_from_spectrum,
    polar_decompose,
    reversed_separation,
    sigma_d,
    weakest,
)
from pyjsep.pseudo_metric import QuadraticForm, is_j_isometry

J2 = np.diag([-1.0, 1.0])
BOOST = np.array([[np.cosh(0.7), np.sinh(0.7)], [np.sinh(0.7), np.cosh(0.7)]])
QUARTER_TURN = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_weakest():
    levels = [SeparationLevel.STRICTLY_SEPARATED, SeparationLevel.SEPARATED]
    assert weakest(levels) is SeparationLevel.SEPARATED
    assert weakest(levels + [SeparationLevel.NOT_SEPARATED]) is SeparationLevel.NOT_SEPARATED


def test_check_separation_diagonal():
    lmat = np.diag([0.5, 2.0])
    verdict = check_separation(J2, lmat)
    assert verdict.level is SeparationLevel.STRICTLY_SEPARATED
    assert verdict.is_strict
    lam = verdict.certificate
    assert lam >= 0
    assert np.linalg.eigvalsh(lmat.T @ J2 @ lmat - lam * J2).min() > 0
    # the documented certificate works as well
    assert np.linalg.eigvalsh(lmat.T @ J2 @ lmat - J2) == pytest.approx([0.75, 3.0])


def test_check_separation_isometry():
    verdict = check_separation(J2, BOOST)
    assert verdict.level is SeparationLevel.SEPARATED
    assert verdict.is_separated and not verdict.is_strict


def test_check_separation_rotation():
    verdict = check_separation(J2, QUARTER_TURN)
    assert verdict.level is SeparationLevel.NOT_SEPARATED
    w = verdict.witness
    jform = QuadraticForm(J2)
    assert jform(w) >= -1e-9
    assert jform(QUARTER_TURN @ w) <= 1e-9


def test_check_separation_definite():
    with pytest.raises(ValueError, match="indefinite"):
        check_separation(np.eye(2), np.eye(2))


@settings(deadline=None, max_examples=50)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=5),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_separation_matches_sampling_hyp(n, rng_seed, brute_force):
    rng = np.random.default_rng(rng_seed)
    q = int(rng.integers(1, n))
    jmat = random_symmetric_form(rng, n, q)
    lmat = rng.standard_normal((n, n)) + 2 * np.eye(n)
    verdict = check_separation(jmat, lmat, seed=rng_seed % 1000)
    sampled = brute_force.separation_minimum(jmat, lmat)
    if verdict.level is SeparationLevel.STRICTLY_SEPARATED:
        assert sampled > -1e-9
    elif verdict.level is SeparationLevel.NOT_SEPARATED:
        # the witness swaps the cones
        w = verdict.witness
        assert w @ jmat @ w >= -1e-8
        assert (lmat @ w) @ jmat @ (lmat @ w) <= 1e-8


@settings(deadline=None, max_examples=50)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=4),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_time_reversal_duality_hyp(n, rng_seed):
    rng = np.random.default_rng(rng_seed)
    q = int(rng.integers(1, n))
    jmat = standard_form(q, n)
    rates = np.concatenate([rng.uniform(-3, -0.5, q), rng.uniform(0.5, 3, n - q)])
    conj = random_isometry(rng, q, n, scale=0.3)
    lmat = conj @ np.diag(np.exp(rates)) @ np.linalg.inv(conj)
    forward = check_separation(jmat, lmat)
    backward = reversed_separation(jmat, lmat)
    assert forward.is_strict == backward.is_strict


def test_polar_decompose_examples():
    polar = polar_decompose(J2, np.diag([0.5, 2.0]))
    assert polar.R == pytest.approx(np.diag([0.5, 2.0]))
    assert polar.U == pytest.approx(np.eye(2), abs=1e-12)
    assert polar.r_minus == pytest.approx([0.5])
    assert polar.r_plus == pytest.approx([2.0])
    assert polar.r_lower == pytest.approx(0.5)
    assert polar.r_upper == pytest.approx(2.0)

    polar = polar_decompose(J2, BOOST)
    assert polar.R == pytest.approx(np.eye(2), abs=1e-9)
    assert polar.U == pytest.approx(BOOST, abs=1e-9)
    assert polar.r_minus == pytest.approx([1.0])
    assert polar.r_plus == pytest.approx([1.0])

    with pytest.raises(NotSeparated):
        polar_decompose(J2, QUARTER_TURN)
    with pytest.raises(Singular):
        polar_decompose(J2, np.diag([1.0, 0.0]))


def test_polar_decompose_strong_contraction():
    polar = polar_decompose(J2, np.diag([1e-10, 3.0]))
    assert polar.r_minus == pytest.approx([1e-10], rel=1e-6)
    assert polar.r_plus == pytest.approx([3.0])


@settings(deadline=None)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=5),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_polar_decompose_hyp(n, rng_seed):
    rng = np.random.default_rng(rng_seed)
    q = int(rng.integers(1, n))
    jmat = standard_form(q, n)
    r_minus = np.sort(rng.uniform(0.2, 0.9, q))[::-1]
    r_plus = np.sort(rng.uniform(1.1, 4.0, n - q))
    frame = random_isometry(rng, q, n)
    r_true = frame @ np.diag(np.concatenate([r_minus, r_plus])) @ np.linalg.inv(frame)
    u_true = random_isometry(rng, q, n)
    lmat = r_true @ u_true

    polar = polar_decompose(jmat, lmat)
    assert max(polar.residuals.values()) <= 1e-8
    assert polar.r_minus == pytest.approx(r_minus, abs=1e-8)
    assert polar.r_plus == pytest.approx(r_plus, abs=1e-8)
    assert polar.R == pytest.approx(r_true, abs=1e-7)
    assert is_j_isometry(jmat, polar.U, tol=1e-8)


def test_is_j_monotone():
    assert is_j_monotone(J2, np.diag([0.5, 2.0])) is MonotonicityLevel.STRICTLY_MONOTONE
    assert is_j_monotone(J2, np.eye(2)) is MonotonicityLevel.MONOTONE
    assert is_j_monotone(J2, 0.5 * BOOST) is MonotonicityLevel.NOT_MONOTONE


def test_monotonicity_from_spectrum():
    assert monotonicity_from_spectrum(0.5, 2.0) is MonotonicityLevel.STRICTLY_MONOTONE
    assert monotonicity_from_spectrum(1.0, 2.0) is MonotonicityLevel.MONOTONE
    assert monotonicity_from_spectrum(1.5, 2.0) is MonotonicityLevel.NOT_MONOTONE


def test_kuhne_bounds():
    bounds = kuhne_bounds(J2, np.diag([1.0, 4.0]))
    assert bounds.r_lower == pytest.approx(-1.0)
    assert bounds.r_upper == pytest.approx(4.0)

    bounds = kuhne_bounds(J2, J2)
    assert bounds.r_lower == pytest.approx(1.0, rel=1e-6)
    assert bounds.r_upper == pytest.approx(1.0, rel=1e-6)

    with pytest.raises(NotNonnegativeOnNullCone) as exc:
        kuhne_bounds(J2, -np.eye(2))
    w = exc.value.witness
    assert abs(w[0]) == pytest.approx(abs(w[1]), abs=1e-3)


@settings(deadline=None, max_examples=50)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=4),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_kuhne_matches_sampling_hyp(n, rng_seed, brute_force):
    rng = np.random.default_rng(rng_seed)
    q = int(rng.integers(1, n))
    jmat = standard_form(q, n)
    # F = R^T J R for a separated R is non-negative on the null cone
    frame = random_isometry(rng, q, n, scale=0.3)
    spec = np.concatenate([rng.uniform(0.2, 0.9, q), rng.uniform(1.1, 3.0, n - q)])
    fmat = frame.T @ jmat @ np.diag(spec**2) @ frame
    fmat = 0.5 * (fmat + fmat.T)
    bounds = kuhne_bounds(jmat, fmat)
    lower, upper = brute_force.pencil_bounds(jmat, fmat)
    assert bounds.r_lower >= lower - 1e-6
    assert bounds.r_upper <= upper + 1e-6
    assert np.linalg.eigvalsh(fmat - bounds.r_lower * jmat).min() >= -1e-6
    assert np.linalg.eigvalsh(fmat - bounds.r_upper * jmat).min() >= -1e-6


def test_sigma_d():
    j3 = np.diag([-1.0, 1.0, 1.0])
    assert sigma_d(j3, np.diag([0.5, 2.0, 3.0]), 2) == pytest.approx(6.0)
    assert sigma_d(J2, np.eye(2), 1) == pytest.approx(1.0)


@settings(deadline=None)
@seed(1337)
@given(rng_seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_composition_hyp(rng_seed):
    rng = np.random.default_rng(rng_seed)
    q, n = 1, 3
    jmat = standard_form(q, n)

    def separated():
        spec = np.concatenate([rng.uniform(0.2, 0.9, q), rng.uniform(1.1, 3.0, n - q)])
        frame = random_isometry(rng, q, n, scale=0.3)
        return frame @ np.diag(spec) @ np.linalg.inv(frame) @ random_isometry(rng, q, n)

    l1, l2 = separated(), separated()
    report = composition_bounds(jmat, l1, l2)
    assert report.holds(tol=1e-9)
    assert report.plus_slack > -1e-9
    assert sigma_d(jmat, l1 @ l2, 2) >= sigma_d(jmat, l1, 2) * sigma_d(jmat, l2, 2) * (1 - 1e-8)
