import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from isocap.quadrature import gauss_legendre_panels, integrate_panels, tanh_sinh


def test_panels_integrate_polynomials_exactly():
    breaks = np.array([-1.0, -0.2, 0.5, 2.0])
    x, w = gauss_legendre_panels(breaks, 8)
    for k in range(16):
        exact = (2.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
        assert np.dot(w, x ** k) == pytest.approx(exact, rel=1e-13, abs=1e-13)


def test_integrate_panels_matches_quad():
    f = lambda x: np.exp(-x * x) * np.cos(3 * x)  # noqa: E731
    ref, _ = integrate.quad(f, -4, 4, epsabs=1e-14)
    assert integrate_panels(f, np.linspace(-4, 4, 41)) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("power", [-0.5, -0.7, 0.3])
def test_tanh_sinh_endpoint_singularity(power):
    val, ok = tanh_sinh(lambda x: x ** power, 0.0, 1.0)
    assert ok
    assert val == pytest.approx(1.0 / (power + 1.0), rel=1e-8)


def test_tanh_sinh_flags_unresolved_singularity():
    val, ok = tanh_sinh(lambda x: x ** -0.95, 0.0, 1.0)
    assert not ok
    assert val == pytest.approx(20.0, rel=0.05)


@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_tanh_sinh_smooth_against_quad(scale, shift):
    f = lambda x: np.exp(-scale * (x - shift) ** 2)  # noqa: E731
    ref, _ = integrate.quad(f, -1.0, 2.0, epsabs=1e-15, epsrel=1e-13)
    val, ok = tanh_sinh(f, -1.0, 2.0)
    assert ok
    assert val == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_tanh_sinh_rejects_empty_interval():
    with pytest.raises(ValueError):
        tanh_sinh(np.exp, 1.0, 1.0)
