import numpy as np
import pytest
from conftest import random_isometry, standard_form
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from pyjsep.cone_field import (
    ConstantFormField,
    CylindricalFormField,
    FunctionFormField,
    MonotoneVerdict,
    adapted_form_search,
    check_lpf_strict_monotone,
    check_separation_along_orbit,
    floquet_adapted_form,
    form_derivative,
    form_derivative_operator,
    linear_poincare_flow,
    poincare_project,
    singularity_form_positivity,
)
from pyjsep.errors import (
    IndexMismatch,
    NonAdmissibleDirection,
    NotEquilibrium,
    NotHyperbolic,
    OutsideDomain,
    SingularPoint,
    ZeroVector,
)
from pyjsep.flow_engine import integrate
from pyjsep.jsep_analysis import SeparationLevel
from pyjsep.models import LinearModel

SADDLE = LinearModel(np.diag([-1.0, 1.0]))
ROTATION = LinearModel([[0.0, -1.0], [1.0, 0.0]])
J2 = ConstantFormField(np.diag([-1.0, 1.0]))


def test_form_derivative_constant():
    assert form_derivative(J2, SADDLE, [0.3, 0.2], [1.0, 0.0]) == pytest.approx(2.0)
    assert form_derivative(J2, SADDLE, [0.3, 0.2], [1.0, 1.0]) == pytest.approx(4.0)
    assert form_derivative(J2, ROTATION, [0.0, 1.0], [1.0, 0.0]) == pytest.approx(0.0)
    with pytest.raises(ZeroVector):
        form_derivative(J2, SADDLE, [0.0, 0.0], [0.0, 0.0])


def test_form_derivative_numeric_field():
    # J_x = diag(-1, 1 + x_0^2); along X = (1, 0) the field derivative adds 2 x_0 on e_2
    drift = LinearModel(np.zeros((2, 2)))

    def func(x):
        return np.diag([-1.0, 1.0 + x[0] ** 2])

    numeric = FunctionFormField(func, dim=2, index_q=1)
    x = np.array([0.5, 0.0])
    assert numeric.derivative(x, [1.0, 0.0]) == pytest.approx(np.diag([0.0, 1.0]), abs=1e-7)
    assert form_derivative(numeric, drift, x, [1.0, 0.0]) == pytest.approx(0.0)


def test_scaled_fields():
    assert (-J2).index_q == 1
    assert (2.0 * J2).matrix([0.0, 0.0]) == pytest.approx(np.diag([-2.0, 2.0]))
    op = form_derivative_operator(-J2, SADDLE, [0.1, 0.1])
    assert op == pytest.approx(np.diag([-2.0, -2.0]))


def test_cylindrical_domain():
    field = CylindricalFormField()
    assert field.index_q == 2
    assert field.matrix([2.0, 0.0, 1.0]) == pytest.approx(np.diag([-1.0, 1.0, -1.0]))
    with pytest.raises(OutsideDomain):
        field.matrix([0.0, 0.0, 1.0])


def test_singularity_form_positivity(lorenz, diagonal_model):
    origin = np.zeros(3)
    jform = adapted_form_search(lorenz.jacobian(origin), 2)
    assert singularity_form_positivity(ConstantFormField(jform), lorenz, origin).positive

    good = singularity_form_positivity(
        ConstantFormField(np.diag([-1.0, -1.0, 1.0])), diagonal_model, origin
    )
    assert good.positive and good.min_eigenvalue == pytest.approx(2.0)
    assert good.verdict == "positive_definite"

    bad = singularity_form_positivity(
        ConstantFormField(np.diag([1.0, -1.0, 1.0])), diagonal_model, origin
    )
    assert not bad.positive and bad.verdict == "fails"
    assert np.abs(bad.witness) == pytest.approx([1.0, 0.0, 0.0])

    flat = singularity_form_positivity(
        ConstantFormField(np.diag([-1.0, 1.0, 1.0])), LinearModel(np.zeros((3, 3))), origin
    )
    assert not flat.positive

    with pytest.raises(NotEquilibrium):
        singularity_form_positivity(ConstantFormField(jform), lorenz, [1.0, 1.0, 1.0])


def test_orbit_separation_saddle():
    report = check_separation_along_orbit(J2, SADDLE, [1.0, 1.0], 1.0)
    assert report.level is SeparationLevel.STRICTLY_SEPARATED
    assert report.grid_converged
    assert report.reversal_consistent
    assert report.witness is None
    assert np.all(report.margins > 0)


def test_orbit_separation_rotation():
    report = check_separation_along_orbit(J2, ROTATION, [1.0, 0.0], np.pi / 2)
    assert report.level is SeparationLevel.NOT_SEPARATED
    assert report.witness_interval[0] == pytest.approx(0.0)
    assert np.linalg.norm(report.witness) == pytest.approx(1.0)


def test_orbit_separation_grid():
    report = check_separation_along_orbit(J2, SADDLE, [1.0, 1.0], 1.0, times=[0.0, 0.25, 1.0])
    assert len(report.verdicts) == 2
    assert report.level is SeparationLevel.STRICTLY_SEPARATED

    zero = check_separation_along_orbit(J2, SADDLE, [1.0, 1.0], 0.0)
    assert zero.level is SeparationLevel.SEPARATED

    with pytest.raises(ValueError):
        check_separation_along_orbit(J2, SADDLE, [1.0, 1.0], 1.0, times=[0.0, 0.6, 0.5, 1.0])
    with pytest.raises(ValueError):
        check_separation_along_orbit(J2, SADDLE, [1.0, 1.0], -1.0)


def test_orbit_separation_limit_cycle(limit_cycle):
    report = check_separation_along_orbit(
        CylindricalFormField(), limit_cycle, [1.0, 0.0, 0.0], 1.0, density=4.0
    )
    assert report.level is SeparationLevel.STRICTLY_SEPARATED


@settings(deadline=None, max_examples=10)
@seed(1337)
@given(
    n=st.integers(min_value=2, max_value=3),
    data=st.data(),
    rng_seed=st.integers(min_value=0, max_value=2**32 - 1),
    noise=st.floats(min_value=0.0, max_value=1.0),
)
def test_orbit_separation_time_reversal_hyp(n, data, rng_seed, noise):
    q = data.draw(st.integers(min_value=1, max_value=n - 1))
    rng = np.random.default_rng(rng_seed)
    iso = random_isometry(rng, q, n, scale=0.3)
    rates = np.concatenate([-rng.uniform(0.3, 2.0, q), rng.uniform(0.3, 2.0, n - q)])
    amat = iso @ np.diag(rates) @ np.linalg.inv(iso) + noise * 0.5 * rng.standard_normal((n, n))
    model = LinearModel(amat)
    field = ConstantFormField(standard_form(q, n))
    x0 = rng.standard_normal(n)

    forward = check_separation_along_orbit(field, model, x0, 1.0, seed=1)
    end = integrate(model, x0, 1.0).final_state
    backward = check_separation_along_orbit(-field, model.reversed(), end, 1.0, seed=1)
    assert (forward.level is SeparationLevel.STRICTLY_SEPARATED) == (
        backward.level is SeparationLevel.STRICTLY_SEPARATED
    )


def test_poincare_project(limit_cycle):
    field = ConstantFormField(np.diag([-1.0, 1.0, -1.0]))
    proj = poincare_project(field, limit_cycle, [1.0, 0.0, 0.0])
    assert proj.direction == pytest.approx([0.0, 1.0, 0.0])
    assert np.abs(proj.normal_basis[1]) == pytest.approx([0.0, 0.0], abs=1e-12)
    assert proj.projector == pytest.approx(np.diag([1.0, 0.0, 1.0]))
    assert proj.normal_form.index_q == 2
    assert max(proj.residuals().values()) < 1e-12

    with pytest.raises(NonAdmissibleDirection):
        poincare_project(ConstantFormField(np.diag([1.0, -1.0, 1.0])), limit_cycle, [1.0, 0.0, 0.0])
    with pytest.raises(SingularPoint):
        poincare_project(field, limit_cycle, [0.0, 0.0, 0.0])


def test_linear_poincare_flow(limit_cycle):
    lpf = linear_poincare_flow(CylindricalFormField(), limit_cycle, [1.0, 0.0, 0.0], 2 * np.pi)
    assert lpf.operator.shape == (2, 2)
    moduli = np.sort(np.abs(np.linalg.eigvals(lpf.operator)))
    assert moduli == pytest.approx([np.exp(-4 * np.pi), np.exp(-2 * np.pi)], abs=1e-7)
    assert lpf.cocycle_residual < 1e-4

    still = linear_poincare_flow(CylindricalFormField(), limit_cycle, [1.0, 0.0, 0.0], 0.0)
    assert still.operator == pytest.approx(np.eye(2))


def test_lpf_monotone(limit_cycle):
    angles = np.linspace(0.0, 2 * np.pi, 9)[:-1]
    samples = np.column_stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)])
    report = check_lpf_strict_monotone(CylindricalFormField(), limit_cycle, samples, angles)
    assert report.verdict is MonotoneVerdict.STRICT
    assert report.global_minimum == pytest.approx(2.0)
    assert report.times == pytest.approx(angles)

    report = check_lpf_strict_monotone(CylindricalFormField(axial=1.0), limit_cycle, samples)
    assert report.verdict is MonotoneVerdict.FAILS
    assert report.global_minimum == pytest.approx(-2.0)
    assert np.abs(report.witness) == pytest.approx([0.0, 0.0, 1.0], abs=1e-9)


def test_adapted_form_search(lorenz):
    jform = adapted_form_search(np.diag([-1.0, 2.0]), 1)
    assert jform.matrix == pytest.approx(np.diag([-1.0, 1.0]))

    amat = lorenz.jacobian(np.zeros(3))
    jform = adapted_form_search(amat, 2)
    derivative = jform.matrix @ amat + amat.T @ jform.matrix
    assert np.linalg.eigvalsh(derivative).min() > 0
    assert jform.index_q == 2

    with pytest.raises(IndexMismatch):
        adapted_form_search(amat, 1)
    with pytest.raises(NotHyperbolic):
        adapted_form_search(np.diag([0.0, 1.0]), 0)


def test_adapted_form_search_defective():
    amat = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 3.0]])
    jform = adapted_form_search(amat, 2)
    derivative = jform.matrix @ amat + amat.T @ jform.matrix
    assert np.linalg.eigvalsh(derivative).min() > 0
    assert jform.index_q == 2


def test_floquet_adapted_form():
    monodromy = np.diag([np.exp(-4 * np.pi), 1.0, np.exp(-2 * np.pi)])
    jform = floquet_adapted_form(monodromy, [0.0, 1.0, 0.0])
    assert jform.matrix == pytest.approx(np.diag([-1.0, 1.0, -1.0]))

    source = floquet_adapted_form(np.diag([3.0, 1.0]), [0.0, 1.0])
    assert source.matrix == pytest.approx(np.diag([1.0, -1.0]))
