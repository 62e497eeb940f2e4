import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from isocap import profiles as prof

from conftest import builtin

LOG_CONCAVE = [("gaussian",), ("uniform_interval", -1.0, 1.0), ("p_exponential", 1.0),
               ("p_exponential", 4.0)]


def test_iso_values(gaussian, uniform):
    assert prof.iso_profile(gaussian, 0.5) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    assert prof.iso_profile(uniform, 0.3) == pytest.approx(0.5)
    assert prof.iso_tilde(gaussian, 0.1) == pytest.approx(stats.norm.pdf(stats.norm.ppf(0.1)), rel=1e-12)
    assert prof.iso_tilde(gaussian, 0.1) == pytest.approx(0.17550, abs=1e-5)
    assert prof.iso_tilde(gaussian, 0.0) == 0.0
    t = np.linspace(0.01, 0.5, 17)
    assert np.allclose(prof.iso_tilde(gaussian, t), prof.iso_profile(gaussian, t))


def test_mu_alpha_half_mass_set_has_no_boundary(mu_alpha):
    cand = prof.iso_candidate(mu_alpha, 0.5)
    assert cand.value == 0.0
    assert cand.endpoints in ((0.5, 1.0), (0.0, 0.5))


def test_mu_alpha_two_interval_search_beats_halflines(mu_alpha):
    left, right = (float(v) for v in prof._halfline(mu_alpha, 0.05))
    cand = prof.iso_candidate(mu_alpha, 0.05)
    assert cand.value < min(left, right)
    # the winner is an actual set: its boundary cost is reproduced exactly
    assert cand.value == pytest.approx(float(np.sum(prof._boundary_cost(mu_alpha, np.array(cand.endpoints)))))


def test_cap1_log_concave(gaussian, uniform):
    for t in (0.05, 0.2, 0.45):
        assert prof.cap1_profile(gaussian, t, 0.5) == pytest.approx(prof.iso_profile(gaussian, t))
    assert prof.cap1_profile(uniform, 0.1, 0.8) == pytest.approx(0.5)


@pytest.mark.parametrize("spec", LOG_CONCAVE, ids=lambda s: "-".join(map(str, s)))
def test_cap1_symmetry_and_sandwich(spec):
    mu = builtin(*spec)
    for a, b in ((0.05, 0.5), (0.1, 0.7), (0.3, 0.9)):
        assert prof.cap1_profile(mu, a, b) == pytest.approx(prof.cap1_profile(mu, 1 - b, 1 - a), abs=1e-9)
        dense = float(np.min(prof.iso_profile(mu, np.linspace(a, b, 2001))))
        assert prof.cap1_profile(mu, a, b) <= dense + 1e-12
        assert prof.cap1_profile(mu, a, b) >= dense - 1e-6


def test_cap1_corollary_consistency(gaussian):
    t = np.linspace(0.02, 0.5, 25)
    J = 0.9 * np.asarray(prof.iso_tilde(gaussian, t))
    cap = np.array([prof.cap1_profile(gaussian, s, 0.5) for s in t])
    assert np.all(cap >= J)


def test_cap1_non_log_concave_grid_oracle(double_well):
    for a, b in ((0.1, 0.5), (0.2, 0.8)):
        exact = prof.cap1_profile(double_well, a, b)
        oracle = prof.cap1_grid_oracle(double_well, a, b, 2048)
        assert oracle == pytest.approx(exact, rel=0.05)


def test_capq_halfline_closed_forms(uniform, gaussian):
    assert prof.capq_halfline(uniform, 2.0, 0.0, 0.5) == pytest.approx(1.0, rel=1e-12)
    ref, _ = integrate.quad(lambda x: math.exp(x * x / 2) * math.sqrt(2 * math.pi), 0, 1, epsabs=1e-14)
    assert prof.capq_halfline(gaussian, 2.0, 0.0, 1.0) == pytest.approx(ref ** -0.5, rel=1e-12)
    assert prof.capq_halfline(gaussian, 2.0, 0.3, 0.3) == math.inf
    assert prof.capq_halfline(gaussian, 2.0, 0.3, 0.3 + 1e-9) > 1e3


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_capq_profile_against_quad(gaussian, q):
    t = 0.25
    x_a = stats.norm.ppf(0.75)
    r = 1 / (q - 1)
    ref, _ = integrate.quad(lambda x: stats.norm.pdf(x) ** -r, 0.0, x_a, epsabs=0, epsrel=1e-13)
    expected = ref ** (-(q - 1) / q)
    assert prof.capq_profile(gaussian, q, t) == pytest.approx(expected, rel=1e-11)
    detail = prof.capq_detail(gaussian, q, t)
    assert detail.status == "ok"


def test_capq_uniform(uniform):
    assert prof.capq_profile(uniform, 2.0, 0.25) == pytest.approx(1.0, rel=1e-12)
    assert prof.capq_grid_oracle(uniform, 2.0, 0.25, 4096) == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_grid_oracle_agreement(gaussian, q):
    for t in (0.05, 0.2, 0.45):
        exact = prof.capq_profile(gaussian, q, t)
        assert prof.capq_grid_oracle(gaussian, q, t, 4096) == pytest.approx(exact, rel=0.02)


def test_grid_oracle_first_order_convergence(double_well):
    exact = prof.capq_profile(double_well, 2.0, 0.2)
    errs = [abs(prof.capq_grid_oracle(double_well, 2.0, 0.2, n) - exact) / exact for n in (512, 2048)]
    assert errs[1] <= max(errs[0] / 2, 1e-6)


def test_capq_small_inner_mass(gaussian):
    assert prof.capq_profile(gaussian, 2.0, 1e-4) < prof.capq_profile(gaussian, 2.0, 1e-2)
    assert prof.capq_grid_oracle(gaussian, 2.0, 1e-4, 4096) < 0.1


@given(st.floats(0.01, 0.49), st.floats(0.001, 0.2))
def test_capq_monotone_in_t(t, dt):
    mu = builtin("gaussian")
    t2 = min(t + dt, 0.5 - 1e-6)
    assert prof.capq_profile(mu, 2.0, t) <= prof.capq_profile(mu, 2.0, t2) * (1 + 1e-12)


def test_capq_mu_alpha_finite_across_zero(mu_alpha):
    v = prof.capq_profile(mu_alpha, 2.0, 0.1)
    assert 0 < v < math.inf
    assert prof.capq_grid_oracle(mu_alpha, 2.0, 0.1, 4096) == pytest.approx(v, rel=0.01)


def test_d_lin_estimate(gaussian, mu_alpha):
    val, where = prof.d_lin_estimate(gaussian, np.linspace(0.05, 0.5, 10))
    assert val == pytest.approx(2 / math.sqrt(2 * math.pi)) and where == 0.5
    assert prof.d_lin_estimate(mu_alpha, np.linspace(0.05, 0.5, 10))[0] == 0.0


def test_profile_table(gaussian):
    t = np.linspace(0.05, 0.45, 9)
    tab = prof.ProfileTable.build(gaussian, t, "cap_q", 2.0)
    assert tab(0.25) == pytest.approx(prof.capq_profile(gaussian, 2.0, 0.25), rel=2e-2)
    with pytest.raises(ValueError):
        prof.ProfileTable(t[::-1], tab.values, "cap_q", 2.0)
    with pytest.raises(ValueError):
        prof.ProfileTable(t, tab.values[::-1], "cap_q", 2.0)
    with pytest.raises(ValueError):
        prof.ProfileTable(t, tab.values, "weird")


def test_argument_checks(gaussian):
    with pytest.raises(ValueError):
        prof.iso_tilde(gaussian, 0.7)
    with pytest.raises(ValueError):
        prof.cap1_profile(gaussian, 0.6, 0.5)
    with pytest.raises(ValueError):
        prof.capq_profile(gaussian, 1.0, 0.2)
    with pytest.raises(ValueError):
        prof.CapacityQuery(0.2, 0.1, 2.0)
    assert prof.capq_grid_oracle(gaussian, 2.0, 0.5, 1024) == math.inf
