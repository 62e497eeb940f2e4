import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isocap import orlicz as orl
from isocap import semigroup as sg
from isocap.transitions import InequalityConstant

from conftest import builtin

SPECS = [("gaussian",), ("uniform_interval", -1.0, 1.0), ("p_exponential", 1.5),
         ("double_well",), ("power_alpha", 0.5)]


def _solver(spec, n=801, dt=2e-3):
    return sg.SemigroupSolver(builtin(*spec), grid_size=n, dt=dt)


SOLVERS = {s[0]: _solver(s) for s in SPECS}


def _test_fn(S, k=1):
    y = (S.nodes - S.nodes[0]) / (S.nodes[-1] - S.nodes[0])
    return np.cos(math.pi * k * y) + 0.3 * np.sin(2 * math.pi * y)


@pytest.mark.parametrize("name", list(SOLVERS))
def test_semigroup_invariants(name):
    S = SOLVERS[name]
    f = _test_fn(S)
    g = _test_fn(S, 3)
    t = 0.05
    pf = S.evolve_array(f, t)
    # conservation of the mean
    assert abs(S.integrate(pf) - S.integrate(f)) <= 1e-10
    # symmetry in L2(mu)
    assert S.integrate(pf * g) == pytest.approx(S.integrate(f * S.evolve_array(g, t)), abs=1e-10)
    # Jensen: (P f)^2 <= P (f^2)
    assert np.all(pf ** 2 <= S.evolve_array(f * f, t) + 1e-10)
    # composition P_s P_t = P_{s+t} on the time grid
    assert np.allclose(S.evolve_array(S.evolve_array(f, 0.02), 0.03), S.evolve_array(f, 0.05), atol=1e-12)
    # the L2 norm decreases along the flow
    norms = [S.integrate(p * p) for p in S.evolve_sweep(f, [0.0, 0.01, 0.05, 0.2])]
    assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))
    # positivity preservation for a nonnegative input
    chi = S.mollified_indicator(float(S.measure.quantile(0.3)))
    assert np.min(S.evolve_array(chi, t)) >= -sg.POSITIVITY_TOL


def test_identity_at_time_zero():
    S = SOLVERS["gaussian"]
    f = _test_fn(S)
    assert np.array_equal(S.evolve_array(f, 0.0), f)
    with pytest.raises(ValueError):
        S.evolve_array(f, -1.0)
    with pytest.raises(ValueError):
        S.evolve_array(f[:-1], 0.1)


def test_solver_validation(gaussian):
    with pytest.raises(ValueError):
        sg.SemigroupSolver(gaussian, theta=0.3)
    with pytest.raises(ValueError):
        sg.SemigroupSolver(gaussian, grid_size=2)
    with pytest.raises(ValueError):
        sg.SemigroupSolver(gaussian, dt=0.0)
    assert sg.SolverConfig().grid_size == 4001


def test_constants_are_fixed_points():
    S = SOLVERS["double_well"]
    one = np.ones(S.grid_size)
    assert np.allclose(S.evolve_array(one, 0.3), one, atol=1e-13)


def test_ou_identity_on_linear_function():
    # P_t x = e^{-t} x for the Ornstein-Uhlenbeck semigroup
    S = sg.SemigroupSolver(builtin("gaussian"), grid_size=4001, dt=1e-3)
    x = S.nodes
    px = S.evolve_array(x, 0.5)
    m = np.abs(x) <= 3
    assert np.max(np.abs(px[m] - math.exp(-0.5) * x[m])) < 1e-4
    lhs_err, rhs_err = sg.ou_linear_case(S, 0.5)
    assert lhs_err < 1e-4 and rhs_err < 1e-4


@pytest.mark.parametrize("name", ["gaussian", "uniform_interval", "p_exponential", "double_well"])
def test_gradient_estimate(name):
    S = SOLVERS[name]
    rep = sg.verify_gradient_estimate(S, _test_fn(S), [0.1, 0.5, 1.0])
    assert rep.verdict == "pass", rep.table()


def test_gradient_estimate_small_time_needs_small_step():
    # at t = 0.01 the time-stepping error dominates unless dt << t
    S = sg.SemigroupSolver(builtin("uniform_interval", -1.0, 1.0), grid_size=801, dt=1e-5)
    rep = sg.verify_gradient_estimate(S, _test_fn(S), [0.01])
    assert rep.verdict == "pass", rep.table()


def test_gradient_estimate_needs_semiconvexity():
    with pytest.raises(ValueError):
        sg.verify_gradient_estimate(SOLVERS["power_alpha"], np.zeros(801), [0.1])


@pytest.mark.parametrize("name", ["gaussian", "uniform_interval", "double_well"])
def test_dual_L1_bound(name):
    S = SOLVERS[name]
    chi = S.mollified_indicator(float(S.measure.quantile(0.6)))
    rep = sg.verify_dual_L1(S, chi, [0.01, 0.1, 0.4])
    assert rep.verdict == "pass", rep.table()


def test_decay_cross_check_at_q2():
    args = dict(D=0.7, dual=1.3, t=0.4)
    f2 = 0.25
    hi = sg.decay_rhs_high(2.0, args["D"], args["dual"], f2, 1.0, 0.0, args["t"])
    lo = sg.decay_rhs_low(2.0, args["D"], args["dual"], f2, 0.5, args["t"])
    assert hi == pytest.approx(lo, rel=1e-9)


def test_decay_input_checks():
    S = SOLVERS["gaussian"]
    f = S.centered(_test_fn(S))
    with pytest.raises(TypeError):
        sg.verify_decay_high_q(S, f, 2.0, orl.power(2.0), 0.5, [0.1])
    D = InequalityConstant("D", 0.1, 0.2, "test")
    with pytest.raises(ValueError):
        sg.verify_decay_high_q(S, f + 1.0, 2.0, orl.power(2.0), D, [0.1])
    with pytest.raises(ValueError):
        sg.verify_decay_low_q(S, f, 3.0, orl.power(3.0), D, [0.1])
    with pytest.raises(ValueError):
        sg.verify_decay_high_q(S, f, 1.5, orl.power(1.5), D, [0.1])


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_decay_holds_on_gaussian(q):
    S = SOLVERS["gaussian"]
    N = orl.power(q)
    f = S.centered(np.tanh(S.nodes))
    # Poincare-type constant for the Gaussian: a safe lower edge
    D = InequalityConstant("D", 0.1, 1.0, "test")
    fn = sg.verify_decay_high_q if q >= 2 else sg.verify_decay_low_q
    rep = fn(S, f, q, N, D, [0.05, 0.2, 1.0])
    assert rep.verdict == "pass", rep.table()


def test_spectral_gap():
    g = sg.spectral_gap(sg.SemigroupSolver(builtin("gaussian"), grid_size=2001))
    assert g.value == pytest.approx(1.0, rel=1e-4) and g.rel_change < 1e-4
    u = sg.spectral_gap(sg.SemigroupSolver(builtin("uniform_interval", -1.0, 1.0), grid_size=2001))
    assert u.value == pytest.approx(math.pi ** 2 / 4, rel=1e-5)
    assert u.poincare_constant == pytest.approx(math.pi / 2, rel=1e-5)
    assert math.isnan(sg.spectral_gap(SOLVERS["gaussian"], richardson=False).refined)


def test_isoperimetric_via_semigroup_is_a_lower_estimate():
    S = sg.SemigroupSolver(builtin("gaussian"), grid_size=4001, dt=1e-4)
    rho0 = 1 / math.sqrt(2 * math.pi)
    v = sg.isoperimetric_via_semigroup(S, 0.5, 0.01)
    assert 0 < v <= rho0
    assert v == pytest.approx(rho0 / math.sqrt(math.pi), rel=0.05)
    assert sg.isoperimetric_via_semigroup(S, 0.0, 0.01) == 0.0
    with pytest.raises(ValueError):
        sg.isoperimetric_via_semigroup(S, 1.5, 0.01)


@given(st.floats(0.05, 0.95), st.sampled_from([0.01, 0.1, 0.3]))
def test_indicator_identity(m, t):
    S = SOLVERS["gaussian"]
    lhs, rhs = sg.indicator_identity(S, m, t)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_sample_and_evolve_gridfunction():
    S = SOLVERS["gaussian"]
    g = S.sample(np.sin, np.cos)
    out = sg.evolve(S, g, 0.1)
    assert out.values.shape == S.nodes.shape
    assert S.gradient_l1(np.zeros(S.grid_size)) == 0.0
