import json
import warnings

import numpy as np
import pytest
from conftest import random_triangular_hyperbolic
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from monty.json import MontyDecoder, MontyEncoder
from scipy.linalg import expm

from pyjsep import flow_engine
from pyjsep.errors import (
    BadDimension,
    IntegrityWarning,
    NoConvergence,
    NoDenseOutput,
    NonTransverseSection,
)
from pyjsep.flow_engine import (
    Section,
    find_equilibria,
    find_periodic_orbit,
    floquet_analysis,
    integrate,
    lyapunov_exponents,
    orbit_samples,
    section_returns,
    tangent_cocycle,
    wedge_cocycle,
)
from pyjsep.models import LinearModel, LorenzModel, PlanarLimitCycleModel, PolynomialModel

BUILTIN_ORBITS = [
    (LorenzModel(), [-3.0, 2.0, 25.0]),
    (PlanarLimitCycleModel(z_rate=1.0), [1.5, 0.2, 0.3]),
    (LinearModel([[0.0, 1.0], [-2.0, -0.3]]), [1.0, 0.0]),
    (PolynomialModel(2, [[0, 1.0, [1, 1]], [1, -0.5, [3, 0]], [1, 2.0, [0, 1]]]), [0.5, 0.2]),
]
BUILTIN_IDS = ["lorenz", "limit_cycle", "linear", "polynomial"]


def _roundtrip(obj):
    return json.loads(json.dumps(obj, cls=MontyEncoder), cls=MontyDecoder)


def test_integrate_decay():
    traj = integrate(LinearModel([[-1.0]]), [1.0], 1.0)
    assert traj.final_state == pytest.approx([np.exp(-1.0)], rel=1e-8)
    assert traj.stats["n_steps"] > 0
    assert traj.at(0.5) == pytest.approx([np.exp(-0.5)], rel=1e-6)

    back = integrate(LinearModel([[-1.0]]), [1.0], -1.0)
    assert back.final_state == pytest.approx([np.e], rel=1e-8)


def test_integrate_zero_time():
    traj = integrate(LinearModel([[-1.0]]), [2.0], 0.0)
    assert traj.final_state == pytest.approx([2.0])
    assert traj.stats["n_steps"] == 0


def test_integrate_rejects_bad_input():
    with pytest.raises(ValueError):
        integrate(LinearModel([[-1.0]]), [1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        integrate(LinearModel([[-1.0]]), [1.0], np.inf)


def test_orbit_samples():
    times, states = orbit_samples(LinearModel([[1.0]]), [1.0], 2.0, 5)
    assert times == pytest.approx(np.linspace(0, 2, 5))
    assert states[:, 0] == pytest.approx(np.exp(times), rel=1e-7)


def test_tangent_cocycle_linear():
    amat = np.array([[0.0, 1.0], [-2.0, -0.3]])
    seg = tangent_cocycle(LinearModel(amat), [1.0, 0.0], 1.5)
    assert seg.matrix == pytest.approx(expm(1.5 * amat), abs=1e-7)
    assert seg.trace_integral == pytest.approx(-0.45)
    assert seg.liouville_residual < 1e-6
    assert seg.cocycle_residual < 1e-6
    assert seg.matrix_at(0.5) == pytest.approx(expm(0.5 * amat), abs=1e-7)


def test_tangent_cocycle_zero_time():
    seg = tangent_cocycle(LinearModel(np.eye(2)), [1.0, 0.0], 0.0)
    assert seg.matrix == pytest.approx(np.eye(2))


def test_lorenz_liouville(lorenz):
    t = 0.3
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrityWarning)
        seg = tangent_cocycle(lorenz, [1.0, 1.0, 20.0], t)
    assert np.linalg.det(seg.matrix) == pytest.approx(np.exp(-41.0 * t / 3.0), rel=1e-6)


@pytest.mark.parametrize("model, x0", BUILTIN_ORBITS, ids=BUILTIN_IDS)
def test_liouville_builtin_models(model, x0):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrityWarning)
        seg = tangent_cocycle(model, x0, 0.5)
    assert seg.liouville_residual < 1e-6
    assert seg.cocycle_residual < 1e-5
    assert np.linalg.det(seg.matrix) == pytest.approx(np.exp(seg.trace_integral), rel=1e-6)


@pytest.mark.parametrize("model, x0", BUILTIN_ORBITS, ids=BUILTIN_IDS)
@settings(deadline=None, max_examples=15)
@seed(1337)
@given(
    s=st.floats(min_value=0.05, max_value=0.5),
    t=st.floats(min_value=0.05, max_value=0.5),
)
def test_cocycle_property_hyp(model, x0, s, t):
    first = tangent_cocycle(model, x0, s, verify=False)
    second = tangent_cocycle(model, first.end_point, t, verify=False)
    whole = tangent_cocycle(model, x0, s + t, verify=False)
    composed = second.matrix @ first.matrix
    assert np.linalg.norm(composed - whole.matrix) <= 1e-5 * np.linalg.norm(whole.matrix)


def test_restored_trajectory_has_no_interpolant():
    traj = integrate(LinearModel([[-1.0]]), [1.0], 1.0)
    restored = _roundtrip(traj)
    assert restored.final_state == pytest.approx(traj.final_state)
    assert restored.at(traj.times[1]) == pytest.approx(traj.states[1])
    assert restored.at(traj.times[[0, -1]]) == pytest.approx(traj.states[[0, -1]])
    with pytest.raises(NoDenseOutput):
        restored.at(0.5 * (traj.times[0] + traj.times[1]))
    with pytest.raises(NoDenseOutput):
        restored.at([traj.times[0], 0.5 * (traj.times[0] + traj.times[1])])


def test_restored_cocycle_has_no_interpolant():
    seg = tangent_cocycle(LinearModel(np.diag([-1.0, 2.0])), [1.0, 1.0], 1.0, verify=False)
    restored = _roundtrip(seg)
    assert restored.matrix == pytest.approx(seg.matrix)
    assert restored.matrix_at(1.0) == pytest.approx(seg.matrix)
    assert restored.matrix_at(0.0) == pytest.approx(np.eye(2))
    assert restored.state_at(0.0) == pytest.approx([1.0, 1.0])
    assert restored.state_at(1.0) == pytest.approx(seg.end_point)
    with pytest.raises(NoDenseOutput):
        restored.matrix_at(0.5)
    with pytest.raises(NoDenseOutput):
        restored.state_at(0.5)
    with pytest.raises(NoDenseOutput):
        restored.matrix_at(0.25)


def test_interpolation_error_recorded(lorenz):
    traj = integrate(lorenz, [1.0, 1.0, 20.0], 1.0)
    assert traj.stats["rejected_steps_estimate"] >= 0
    assert np.isfinite(traj.stats["interp_error"])
    assert 0.0 <= traj.stats["interp_error"] < 10.0
    assert integrate(lorenz, [1.0, 1.0, 20.0], 1.0, method="LSODA").stats[
        "rejected_steps_estimate"
    ] is None


def test_interpolation_error_warns(monkeypatch):
    monkeypatch.setattr(flow_engine, "_interpolation_error", lambda *args, **kwargs: 5.0)
    with pytest.warns(IntegrityWarning, match="Dense output"):
        traj = integrate(LinearModel([[-1.0]]), [1.0], 1.0)
    assert traj.stats["interp_error"] == 5.0


def test_wedge_cocycle():
    mat = np.diag([0.5, 2.0, 3.0])
    assert wedge_cocycle(mat, 1) == pytest.approx(mat)
    assert np.sort(np.diag(wedge_cocycle(mat, 2))) == pytest.approx([1.0, 1.5, 6.0])
    assert wedge_cocycle(mat, 3) == pytest.approx([[3.0]])
    with pytest.raises(BadDimension):
        wedge_cocycle(mat, 4)


@settings(deadline=None)
@seed(1337)
@given(
    p=st.integers(min_value=1, max_value=3),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_wedge_multiplicative_hyp(p, rng_seed):
    rng = np.random.default_rng(rng_seed)
    a, b = rng.standard_normal((2, 4, 4))
    assert wedge_cocycle(a @ b, p) == pytest.approx(
        wedge_cocycle(a, p) @ wedge_cocycle(b, p), abs=1e-9
    )


def test_lorenz_equilibria(lorenz):
    seeds = [[0.1, 0.1, 0.1], [8.0, 8.0, 27.0], [-8.0, -8.0, 27.0], [8.1, 8.1, 27.1]]
    found = find_equilibria(lorenz, seeds)
    assert len(found) == 3
    root = np.sqrt(72.0)
    points = sorted(tuple(np.round(eq.point, 8)) for eq in found)
    assert points[0] == pytest.approx((-root, -root, 27.0))
    assert points[1] == pytest.approx((0.0, 0.0, 0.0), abs=1e-8)
    assert points[2] == pytest.approx((root, root, 27.0))

    origin = next(eq for eq in found if np.linalg.norm(eq.point) < 1e-6)
    disc = np.sqrt(1201.0)
    expected = sorted([-8.0 / 3.0, (-11 - disc) / 2, (-11 + disc) / 2])
    assert origin.eigenvalues.real == pytest.approx(expected)
    assert origin.index == 2
    assert origin.hyperbolic
    for eq in found:
        if eq is not origin:
            assert eq.index == 1


def test_find_equilibria_failures():
    model = LinearModel([[0.0, 1.0], [0.0, 0.0]])
    found, failures = find_equilibria(
        LinearModel(np.diag([-1.0, 2.0])), [[1.0, 1.0]], return_failures=True
    )
    assert len(found) == 1 and failures == []
    # singular Jacobian: lstsq still reaches the kernel
    assert find_equilibria(model, [[3.0, 1.0]])[0].point[1] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        find_equilibria(model, [[0.0, 1.0]], damping=0.0)


def test_limit_cycle_orbit(limit_cycle):
    section = Section(normal=[0.0, 1.0, 0.0], offset=0.0, direction=1)
    orbit = find_periodic_orbit(limit_cycle, section, [1.05, 0.0, 0.02], 6.0)
    assert orbit.period == pytest.approx(2 * np.pi, rel=1e-8)
    assert np.abs(orbit.multipliers) == pytest.approx(
        [np.exp(-4 * np.pi), np.exp(-2 * np.pi)], rel=1e-4, abs=1e-8
    )
    assert orbit.index == 2
    assert orbit.hyperbolic and not orbit.suspect
    assert np.abs(orbit.flow_direction) == pytest.approx([0.0, 1.0, 0.0], abs=1e-6)


def test_floquet_suspect():
    orbit = floquet_analysis(LinearModel(np.diag([-1.0, -2.0])), [1.0, 0.0], 1.0)
    assert orbit.suspect
    assert not orbit.hyperbolic
    assert len(orbit.multipliers) == 2


def test_shooting_linear_fails():
    model = LinearModel(np.diag([-1.0, -2.0]))
    section = Section(normal=[1.0, 0.0], offset=1.0, direction=0)
    with pytest.raises(NoConvergence):
        find_periodic_orbit(model, section, [1.0, 0.5], 1.0, max_iter=10)


def test_shooting_tangent_section(limit_cycle):
    section = Section(normal=[1.0, 0.0, 0.0], offset=1.0)
    with pytest.raises(NonTransverseSection):
        find_periodic_orbit(limit_cycle, section, [1.0, 0.0, 0.0], 6.0)


def test_section_returns(limit_cycle):
    section = Section(normal=[0.0, 1.0, 0.0], direction=1)
    times, points = section_returns(limit_cycle, [0.0, -1.0, 0.0], section, 2, t_max=14.0)
    assert times == pytest.approx([np.pi / 2, 2.5 * np.pi], rel=1e-6)
    assert points[:, 0] == pytest.approx([1.0, 1.0], rel=1e-6)


def test_lyapunov_diagonal(diagonal_model):
    spectrum = lyapunov_exponents(diagonal_model, [0.1, 0.1, 0.1], 20.0)
    assert spectrum.exponents == pytest.approx([1.0, -1.0, -2.0], abs=1e-6)
    assert spectrum.converged
    assert spectrum.seed is None


def test_lyapunov_leading(diagonal_model):
    spectrum = lyapunov_exponents(diagonal_model, [0.1, 0.1, 0.1], 40.0, k=2, seed=4)
    assert spectrum.exponents == pytest.approx([1.0, -1.0], abs=0.1)
    with pytest.raises(BadDimension):
        lyapunov_exponents(diagonal_model, [0.1, 0.1, 0.1], 1.0, k=4)


@settings(deadline=None, max_examples=20)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=4),
    data=st.data(),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_lyapunov_reversed_flow_hyp(n, data, rng_seed):
    q = data.draw(st.integers(min_value=1, max_value=n - 1))
    model = LinearModel(random_triangular_hyperbolic(np.random.default_rng(rng_seed), n, q))
    x0 = np.full(n, 0.01)
    forward = lyapunov_exponents(model, x0, 10.0)
    backward = lyapunov_exponents(model.reversed(), x0, 10.0)
    assert forward.exponents == pytest.approx(np.sort(np.diag(model.matrix))[::-1], abs=1e-6)
    assert backward.exponents == pytest.approx(-forward.exponents[::-1], abs=1e-6)


@pytest.mark.slow
def test_lorenz_periodic_orbit(lorenz):
    section = Section(normal=[0.0, 0.0, 1.0], offset=27.0, direction=-1)
    orbit = find_periodic_orbit(lorenz, section, [-13.7636, -19.5788, 27.0], 1.5587)
    assert orbit.period == pytest.approx(1.5587, abs=1e-3)
    assert orbit.index == 1
    assert orbit.hyperbolic


@pytest.mark.slow
def test_lorenz_lyapunov(lorenz):
    spectrum = lyapunov_exponents(
        lorenz, [1.0, 1.0, 20.0], 200.0, seed=1, transient=10.0, tolerance=0.1
    )
    assert spectrum.exponents[0] == pytest.approx(0.9, abs=0.1)
    assert spectrum.exponents.sum() == pytest.approx(-41.0 / 3.0, abs=0.05)
