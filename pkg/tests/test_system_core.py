import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import solve_ivp

from cspkit.errors import DivergenceError, EvaluationDomainError, PreconditionError
from cspkit.mmh import h0_slope, mmh_system, MmhParams
from cspkit.system_core import (
    StatePoint, SystemDefinition, check_tangency_lemma, critical_point, eval_g, eval_jacobian,
    fast_spectrum, fd_jacobian, integrate, stable_step,
)


def linear_system(M):
    M = np.asarray(M, dtype=float)

    def g1(y, z, eps):
        return M[:1] @ np.concatenate([y, z])

    def g2(y, z, eps):
        return M[1:] @ np.concatenate([y, z])

    return SystemDefinition(1, 1, g1, g2, jacobian=lambda y, z, eps: M * [[eps], [1.0]])


def test_statepoint_is_read_only():
    p = StatePoint([1.0], [0.5])
    with pytest.raises(ValueError):
        p.y[0] = 2.0
    assert_allclose(p.vector, [1.0, 0.5])
    assert StatePoint.from_vector([3.0, 4.0, 5.0], 2).z.tolist() == [5.0]


def test_statepoint_rejects_nan():
    with pytest.raises(ValueError):
        StatePoint([np.nan], [0.0])


@pytest.mark.parametrize("x, eps, expected", [
    ((1.0, 0.5), 0.1, (-0.025, 0.0)),
    ((1.0, 0.9), 0.0, (0.0, -0.8)),
    ((2.0, 2.0 / 3.0), 0.0, (0.0, 0.0)),
])
def test_eval_g_mmh(mmh, x, eps, expected):
    assert_allclose(eval_g(mmh, x, eps), expected, atol=1e-15)


def test_eval_g_accepts_statepoint(mmh):
    assert_allclose(eval_g(mmh, StatePoint([1.0], [0.5]), 0.1), [-0.025, 0.0], atol=1e-15)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_eval_g_names_failing_component():
    bad = SystemDefinition(1, 1, lambda y, z, e: np.log(y), lambda y, z, e: -z)
    with pytest.raises(EvaluationDomainError, match="g1"):
        eval_g(bad, [-1.0, 0.0], 0.1)


def test_jacobian_example(mmh):
    assert_allclose(eval_jacobian(mmh, (1.0, 0.5), 0.01), [[-0.005, 0.015], [0.5, -2.0]], atol=1e-15)


def test_jacobian_of_linear_map_is_exact():
    M = np.array([[-0.3, 0.2], [1.5, -4.0]])
    sys = linear_system(M)
    assert np.array_equal(eval_jacobian(sys, (0.7, 0.1), 1.0), M)


@given(s=st.floats(0.1, 2.0), c=st.floats(-0.5, 1.5), eps=st.floats(0.0, 0.1))
@settings(max_examples=50, deadline=None)
def test_fd_jacobian_matches_analytic(s, c, eps):
    sys = mmh_system()
    numeric = fd_jacobian(lambda v: eval_g(sys, v, eps), np.array([s, c]))
    exact = eval_jacobian(sys, (s, c), eps)
    assert_allclose(numeric, exact, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("s, c, eps, expected", [(1.0, 0.5, 0.0, -2.0), (0.0, 0.0, 0.0, -1.0), (1.5, 0.2, 0.05, -2.5)])
def test_fast_spectrum_mmh(mmh, s, c, eps, expected):
    assert_allclose(fast_spectrum(mmh, [s], [c], eps), [expected])


def test_fast_spectrum_unit_decay():
    sys = SystemDefinition(1, 1, lambda y, z, e: -y, lambda y, z, e: -z)
    assert_allclose(fast_spectrum(sys, [0.3], [0.2], 0.0), [-1.0], rtol=1e-9)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.7])
def test_critical_point_is_h0(mmh, s):
    assert_allclose(critical_point(mmh, [s]), [s / (s + 1.0)], rtol=1e-13)


@pytest.mark.parametrize("y, slope", [(1.0, 0.25), (0.5, 1.0 / 2.25)])
def test_tangency_lemma_mmh(mmh, y, slope):
    assert check_tangency_lemma(mmh, [y], [[slope]]) <= 1e-6


def test_tangency_lemma_with_explicit_point(mmh):
    assert check_tangency_lemma(mmh, [1.0], [[0.25]], z=[0.5]) <= 1e-12


def test_tangency_lemma_decoupled_linear():
    sys = SystemDefinition(1, 1, lambda y, z, e: -y, lambda y, z, e: -z,
                           jacobian=lambda y, z, e: np.diag([-e, -1.0]))
    assert check_tangency_lemma(sys, [0.4], [[0.0]]) == 0.0


def test_tangency_lemma_rejects_off_manifold(mmh):
    with pytest.raises(PreconditionError):
        check_tangency_lemma(mmh, [1.0], [[0.25]], z=[0.9])


def test_tangency_lemma_detects_wrong_slope(mmh):
    assert check_tangency_lemma(mmh, [1.0], [[0.3]]) > 0.05


def test_integrate_frozen_slow_variable(mmh):
    traj = integrate(mmh, (1.0, 0.5), 0.0, 5.0, 0.01)
    assert np.all(traj.y == 1.0)
    assert_allclose(traj.z[-1], [0.5], atol=1e-14)


def test_integrate_fast_contraction_rate(mmh):
    traj = integrate(mmh, (1.0, 0.9), 0.0, 5.0, 0.01)
    gap = traj.z[:, 0] - 0.5
    assert_allclose(gap, 0.4 * np.exp(-2.0 * traj.times), atol=1e-8)


def test_integrate_exponential():
    sys = SystemDefinition(1, 1, lambda y, z, e: -y, lambda y, z, e: -z)
    traj = integrate(sys, (1.0, 1.0), 1.0, 1.0, 1e-3)
    assert traj.times[-1] == 1.0
    assert abs(traj.z[-1, 0] - np.exp(-1.0)) < 1e-8


def test_integrate_rk4_order():
    sys = SystemDefinition(1, 1, lambda y, z, e: -y, lambda y, z, e: -z)
    errs = [abs(integrate(sys, (1.0, 1.0), 1.0, 1.0, dt).z[-1, 0] - np.exp(-1.0)) for dt in (0.1, 0.05)]
    assert errs[0] / errs[1] >= 12.0


def test_integrate_against_solve_ivp(mmh):
    eps = 0.05
    traj = integrate(mmh, (1.2, 0.1), eps, 20.0, 0.01)
    ref = solve_ivp(lambda t, x: eval_g(mmh, x, eps), (0.0, 20.0), [1.2, 0.1], rtol=1e-12, atol=1e-12)
    assert_allclose(traj.xs[-1], ref.y[:, -1], atol=1e-9)


def test_integrate_hits_end_time_with_uneven_step(mmh):
    traj = integrate(mmh, (1.0, 0.5), 0.01, 1.0, 0.3)
    assert traj.times[-1] == 1.0
    assert len(traj) == 5


def test_integrate_divergence():
    sys = SystemDefinition(1, 1, lambda y, z, e: y, lambda y, z, e: z ** 2)
    with pytest.raises(DivergenceError):
        integrate(sys, (1.0, 1.0), 1.0, 10.0, 0.01)


@pytest.mark.parametrize("t_end, dt", [(0.0, 0.1), (1.0, 0.0), (-1.0, 0.1)])
def test_integrate_rejects_bad_times(mmh, t_end, dt):
    with pytest.raises(ValueError):
        integrate(mmh, (1.0, 0.5), 0.01, t_end, dt)


def test_stable_step(mmh):
    assert_allclose(stable_step(mmh, (1.0, 0.5), 0.0), 0.25)


def test_system_definition_validates_boxes():
    with pytest.raises(ValueError):
        SystemDefinition(1, 1, None, None, domain_K=((1.0,), (0.0,)))
    with pytest.raises(ValueError):
        SystemDefinition(0, 1, None, None)


def test_trajectory_states(mmh):
    traj = integrate(mmh, (1.0, 0.5), 0.01, 0.2, 0.1)
    assert isinstance(traj.states[0], StatePoint)
    assert traj.y.shape == (3, 1)


def test_mmh_params_validation():
    with pytest.raises(ValueError):
        MmhParams(kappa=0.5, lam=1.0)


def test_h0_slope_is_derivative(mmh_params):
    s = 0.8
    num = (critical_point(mmh_system(mmh_params), [s + 1e-6]) - critical_point(mmh_system(mmh_params), [s - 1e-6])) / 2e-6
    assert_allclose(num, h0_slope(s, mmh_params), rtol=1e-8)
