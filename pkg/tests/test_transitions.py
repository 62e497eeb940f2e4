import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from isocap import orlicz as orl
from isocap import profiles as prof
from isocap import transitions as T

from conftest import builtin


# -- gamma and the lift -------------------------------------------------------

def test_gamma_values():
    assert T.gamma_const(1.0, 2.0) == 1.0
    assert T.gamma_const(1.0, 7.0) == 1.0
    # p = 4/3, p0 = 2: (2/(4/3) - 1)^{1/2} / (1 - 2/3)^{3/4}
    assert T.gamma_const(2.0, 4.0) == pytest.approx(0.5 ** 0.5 / (1 / 3) ** 0.75, rel=1e-14)
    assert T.gamma_const(2.0, 4.0) == pytest.approx(1.6119, abs=1e-4)
    with pytest.raises(ValueError):
        T.gamma_const(2.0, 2.0)
    with pytest.raises(ValueError):
        T.gamma_const(3.0, 2.0)


@pytest.mark.parametrize("eps", [1e-3, 1e-6])
def test_gamma_continuous_near_q0_one(eps):
    assert T.gamma_const(1.0 + eps, 3.0) == pytest.approx(1.0, abs=20 * eps * math.log(1 / eps))


def test_conjugate_exponent():
    assert T.conjugate_exponent(1.0) == math.inf
    assert T.conjugate_exponent(2.0) == 2.0
    with pytest.raises(ValueError):
        T.conjugate_exponent(0.5)


@pytest.mark.parametrize("q0,q", [(1.0, 2.0), (1.5, 3.0), (2.0, 4.0)])
def test_lift_constant_capacity_closed_form(q0, q):
    c, a, b = 0.7, 0.1, 0.5
    p, p0 = T.conjugate_exponent(q), T.conjugate_exponent(q0)
    beta = 0.0 if math.isinf(p0) else p / p0
    # int_a^b c^{-p} (s-a)^{-beta} ds = c^{-p} (b-a)^{1-beta} / (1-beta)
    integral = c ** -p * (b - a) ** (1 - beta) / (1 - beta)
    expected = 1.0 / (T.gamma_const(q0, q) * integral ** (1 / p))
    assert T.lift_capacity(q0, q, lambda s: np.full_like(s, c), a, b) == pytest.approx(expected, rel=1e-8)


def test_lift_degenerate():
    r = T.lift_capacity_detail(1.0, 2.0, lambda s: np.zeros_like(s), 0.1, 0.5)
    assert r.value == 0.0 and r.degenerate
    r = T.lift_capacity_detail(2.0, 2.0, lambda s: 0.3, 0.1, 0.5)
    assert r.value == 0.3
    with pytest.raises(ValueError):
        T.lift_capacity(1.0, 2.0, lambda s: s, 0.5, 0.5)


def test_lift_scalar_callable_is_accepted():
    v1 = T.lift_capacity(1.0, 2.0, lambda s: 1.0 + float(s), 0.1, 0.5)
    v2 = T.lift_capacity(1.0, 2.0, lambda s: 1.0 + s, 0.1, 0.5)
    assert v1 == pytest.approx(v2, rel=1e-14)


@pytest.mark.parametrize("spec", [("gaussian",), ("uniform_interval", -1.0, 1.0), ("p_exponential", 1.0)],
                         ids=lambda s: s[0])
@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_lift_from_cap1_is_sound(spec, q):
    mu = builtin(*spec)
    for t in (0.02, 0.1, 0.3):
        lift = T.lift_capacity(1.0, q, lambda s: T._cap_q0(mu, 1.0, s), t, 0.5)
        assert 0 < lift <= prof.capq_profile(mu, q, t) * (1 + 1e-9)


def test_lift_is_exact_for_q0_one_halfline():
    # with q0 = 1 and Cap_1(s, 1/2) = rho(Q(1-s)) the lift reproduces Cap_q exactly
    mu = builtin("gaussian")
    for q in (1.5, 2.0, 3.0):
        lift = T.lift_capacity(1.0, q, lambda s: T._cap_q0(mu, 1.0, s), 0.2, 0.5, n_panels=128)
        assert lift == pytest.approx(prof.capq_profile(mu, q, 0.2), rel=1e-6)


# -- capacity <-> Orlicz-Sobolev ------------------------------------------------

def test_bracket_values():
    b = T.cap_to_orlicz_bracket(2.0, orl.power(2.0), 1.0)
    assert (b.lower, b.upper) == (0.25, 1.0)
    b = T.cap_to_orlicz_bracket(2.0, orl.power(2.0), 0.0)
    assert (b.lower, b.upper) == (0.0, 0.0)
    b = T.cap_to_orlicz_bracket(1.0, orl.power(1.0), 0.8, sharp_q1=True)
    assert b.lower == b.upper == 0.8
    with pytest.raises(ValueError):
        T.cap_to_orlicz_bracket(2.0, orl.power(2.0), 1.0, sharp_q1=True)
    with pytest.raises(T.HypothesisError):
        T.cap_to_orlicz_bracket(2.0, orl.power(1.5), 1.0)
    # the weak form drops the monotonicity requirement
    assert T.cap_to_orlicz_bracket(2.0, orl.power(1.5), 1.0, weak=True).upper == 1.0
    with pytest.raises(ValueError):
        T.cap_to_orlicz_bracket(2.0, orl.power(2.0), -1.0)


def test_inequality_constant_validation():
    with pytest.raises(ValueError):
        T.InequalityConstant("x", 2.0, 1.0, "ref")


def test_orlicz_to_cap():
    assert T.orlicz_to_cap(2.0, orl.power(2.0), 1.0, 0.25) == pytest.approx(0.5)
    assert T.orlicz_to_cap(2.0, orl.power(2.0), 1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        T.orlicz_to_cap(2.0, orl.power(2.0), 1.0, 0.7)


def test_capacity_constant_uniform_closed_form(uniform):
    # Cap_2(t, 1/2) = (4 (1/2 - t))^{-1/2}, so Cap_2 / sqrt(t) is minimal at t = 1/4 with value 2
    cc = T.capacity_constant(uniform, orl.power(2.0), 2.0)
    assert not cc.at_edge
    assert cc.value == pytest.approx(2.0, rel=1e-8)
    assert cc.argmin == pytest.approx(0.25, abs=1e-4)


def test_capacity_constant_edge_is_certified_zero(gaussian):
    # the Gaussian has no q-log-Sobolev inequality for q < 2
    cc = T.capacity_constant(gaussian, orl.phi_q(1.5), 1.5)
    assert cc.at_edge and cc.value == 0.0 and cc.grid_value > 0


def test_bracket_synthetic_uniform(uniform):
    # D2 = 2 for (uniform, t^2, q = 2); the best median-centred constant lies
    # in [1/2, 2] and the probe minimum is an upper estimate of it
    N = orl.power(2.0)
    D2 = T.capacity_constant(uniform, N, 2.0).value
    br = T.cap_to_orlicz_bracket(2.0, N, D2)
    ratios = T.orlicz_sobolev_ratios(uniform, N, 2.0, T.probe_family(uniform, 2.0))
    best = float(ratios.min())
    assert br.lower <= best <= br.upper * (1 + 1e-3)
    # the mean-centred Poincare constant is pi/2, the median-centred one is at least that
    assert best >= math.pi / 2 * (1 - 1e-3)


# -- forward constant B and converse constant C ---------------------------------

@pytest.mark.parametrize("q", [1.25, 1.5, 2.0, 3.0, 5.0])
def test_forward_B_power_closed_form(q):
    # N = t^q: N^(t) = t^{1/q}, the integral tends to q - 1 as t -> 0
    p = q / (q - 1)
    assert T.forward_constant_B(orl.power(q), q) == pytest.approx(0.25 * (q - 1) ** (-1 / p), rel=1e-10)


def test_forward_B_phi2_against_quad():
    N = orl.phi_q(2.0)
    B = T.forward_constant_B(N, 2.0)
    B_coarse = T.forward_constant_B(N, 2.0, t_min=1e-100)
    assert B == pytest.approx(B_coarse, rel=1e-4)
    # independent check of one point of the supremum with scipy
    Na = lambda s: float(N.adjoint(s))      # noqa: E731
    for t in (1e-3, 1e-6):
        val, _ = integrate.quad(lambda y: Na(math.exp(y)) ** -2, math.log(t), math.log(0.5), epsrel=1e-12)
        bound = 0.25 * (Na(t) ** 2 * val) ** -0.5
        assert B <= bound * (1 + 1e-9)
    assert 0 < B < 0.25


def test_forward_B_guards():
    with pytest.raises(ValueError):
        T.forward_constant_B(orl.power(1.0), 1.0)
    with pytest.raises(T.HypothesisError):
        T.forward_constant_B(orl.power(1.5), 2.0)


def test_converse_C_values():
    assert T.converse_constant_C(orl.power(2.0), 2.0) == pytest.approx(1 / math.sqrt(2), rel=1e-6)
    N = orl.phi_q(2.0)
    C = T.converse_constant_C(N, 2.0)
    assert T.converse_constant_C(N, 2.0, n_t=4000) == pytest.approx(C, rel=1e-3)
    assert T.converse_constant_C(N, 2.0, c2=0.1) <= 0.1
    with pytest.raises(ValueError):
        T.converse_constant_C(N, 2.0, n_t=1)
    with pytest.raises(ValueError):
        T.converse_constant_C(orl.power(3.0), 3.0)


def test_chain_constants_positive_and_collapse_near_one():
    for q in (1.1, 1.5, 2.0, 3.0, 6.0):
        cs = T.semigroup_chain_constants(orl.power(q), q)
        assert cs.C > 0 and cs.verified
        assert cs.r == (2.0 if q <= 2 else q)
    assert T.semigroup_chain_constants(orl.power(1.1), 1.1).C < 1e-6
    assert not T.capacity_route_constants(orl.power(2.0), 2.0).verified


def test_K_const():
    assert T.K_const(0.0, 1.0) == 2.0
    assert T.K_const(1.0, 0.5) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert T.K_const(2.0, 0.25) >= 0.25
    with pytest.raises(ValueError):
        T.K_const(-1.0, 1.0)


@pytest.mark.parametrize("kappa", [0.0, 0.3, 5.0])
def test_K_integrals_against_quad(kappa):
    t = 0.7
    ref, _ = integrate.quad(lambda s: T.K_const(kappa, s) ** -0.5, 0, t, epsrel=1e-12, limit=200)
    assert T.inv_sqrt_K_integral(kappa, t) == pytest.approx(ref, rel=1e-9)
    ref, _ = integrate.quad(lambda s: T.K_const(kappa, s) ** 0.5, 0, t, epsrel=1e-12)
    assert T.K_power_integral(kappa, t, 0.5) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("spec,N,q", [
    (("gaussian",), orl.power(2.0), 2.0),
    (("uniform_interval", -1.0, 1.0), orl.power(1.5), 1.5),
    (("p_exponential", 1.5), orl.power(3.0), 3.0),
], ids=["gauss-2", "unif-1.5", "pexp-3"])
def test_converse_bounds_are_sound(spec, N, q):
    mu = builtin(*spec)
    D = T.cap_to_orlicz_bracket(q, N, T.capacity_constant(mu, N, q).value).lower
    t = np.linspace(0.01, 0.49, 25)
    iso = np.asarray(prof.iso_tilde(mu, t))
    for method in ("chain", "replay"):
        bound = np.asarray(T.converse_iso_bound(q, N, D, mu.kappa, t, method=method))
        assert np.all(bound <= iso * (1 + 1e-9)), method
        assert np.all(bound[t > 0] > 0)


def test_converse_kappa_zero_limit():
    N = orl.power(2.0)
    t = np.array([0.05, 0.2, 0.4])
    at0 = np.asarray(T.converse_iso_bound(2.0, N, 0.8, 0.0, t))
    near = np.asarray(T.converse_iso_bound(2.0, N, 0.8, 1e-12, t))
    assert np.allclose(near, at0, rtol=1e-9)
    r0 = np.asarray(T.replay_iso_bound(2.0, N, 0.8, 0.0, t))
    r1 = np.asarray(T.replay_iso_bound(2.0, N, 0.8, 1e-10, t))
    assert np.allclose(r1, r0, rtol=1e-4)
    assert T.converse_iso_bound(2.0, N, 0.8, math.inf, 0.2) == 0.0
    with pytest.raises(ValueError):
        T.converse_iso_bound(2.0, N, 0.8, 0.0, 0.2, method="nope")


@given(st.floats(0.05, 2.0), st.floats(0.0, 3.0))
def test_replay_monotone_in_D(D, kappa):
    N = orl.power(2.0)
    a = T.replay_iso_bound(2.0, N, D, kappa, 0.2)
    b = T.replay_iso_bound(2.0, N, 1.1 * D, kappa, 0.2)
    assert b >= a * (1 - 1e-9)


def test_two_point_dual_norm_symmetry():
    N = orl.power(2.0)
    # for N = t^2 the dual of L2 is L2 (up to the Luxemburg normalisation), symmetric in m
    assert T.two_point_dual_norm(0.3, N) == pytest.approx(T.two_point_dual_norm(0.7, N), rel=1e-6)


# -- forward check and the full cycle -------------------------------------------

@pytest.mark.parametrize("spec,q", [(("gaussian",), 1.5), (("uniform_interval", -1.0, 1.0), 1.5),
                                    (("gaussian",), 2.0)], ids=["gauss-1.5", "unif-1.5", "gauss-2"])
def test_forward_check_passes(spec, q):
    mu = builtin(*spec)
    rep = T.forward_theorem_check(mu, orl.power(q), q)
    assert rep.verdict == "pass", rep.table()
    assert {leg.name for leg in rep.legs} >= {"isoperimetric hypothesis", "forward probes [tail]"}


def test_forward_check_constant_function_and_hypothesis(gaussian):
    rep = T.forward_theorem_check(gaussian, orl.power(1.5), 2.0)
    assert rep.verdict == "hypothesis-fail"
    # an isoperimetric constant that is too large fails the premise, not the conclusion
    rep = T.forward_theorem_check(gaussian, orl.power(2.0), 2.0, D_iso=10.0)
    assert rep.verdict == "hypothesis-fail"
    # constants have zero deviation and zero gradient: 0 <= 0
    const = T.GridFunction(np.ones_like(gaussian.nodes), np.zeros_like(gaussian.nodes))
    assert orl.orlicz_norm(gaussian, const.values - 1.0, orl.power(2.0)) == 0.0
    assert T.lq_gradient_norm(gaussian, const, 2.0) == 0.0


def test_equivalence_report_gaussian():
    rep = T.equivalence_report(builtin("gaussian"), orl.power(2.0), 2.0)
    assert rep.verdict == "pass", rep.table()
    names = [leg.name for leg in rep.legs]
    assert names[0] == "I -> Cap_1" and "Cap_1 -> Cap_q lift" in names
    assert rep.environment["cycle_loss_factor"] >= 1.0


def test_equivalence_report_mu_alpha_hypothesis_fail(mu_alpha):
    rep = T.equivalence_report(mu_alpha, orl.power(2.0), 2.0)
    assert rep.verdict == "hypothesis-fail"
    assert rep.exit_code() == 2
    assert "cap1_and_lift_legs" in rep.environment


def test_probe_family_deterministic(gaussian):
    a = T.probe_family(gaussian, 2.0, seed=3)
    b = T.probe_family(gaussian, 2.0, seed=3)
    assert [p.label for p in a] == [p.label for p in b]
    assert all(np.array_equal(x.f.values, y.f.values) for x, y in zip(a, b))
    fams = {p.family for p in a}
    assert fams == {"tail", "random", "ramp", "extremal"}
