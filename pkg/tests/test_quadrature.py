import math

import numpy as np
import pytest

from amppr.quadrature import gauss_hermite, gauss_legendre, graded_legendre, rayleigh_rule


def test_gauss_legendre_polynomial_exactness():
    x, w = gauss_legendre(-1.0, 3.0, 8)
    # exact for degree <= 15
    assert np.sum(w * x**15) == pytest.approx((3.0**16 - 1.0) / 16, rel=1e-13)


def test_graded_rule_resolves_narrow_peak():
    scale = 1e-6
    x, w = graded_legendre(scale, math.pi / 2, 256)
    got = np.sum(w / np.sqrt(x * x + scale * scale))
    exact = math.asinh((math.pi / 2) / scale)
    assert got == pytest.approx(exact, rel=1e-12)


def test_graded_rule_falls_back_to_plain():
    a = graded_legendre(5.0, 1.0, 16)
    b = gauss_legendre(0.0, 1.0, 16)
    assert np.array_equal(a[0], b[0])


def test_gauss_hermite_moments():
    z, w = gauss_hermite(64)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.sum(w * z**2) == pytest.approx(1.0, abs=1e-13)
    assert np.sum(w * z**4) == pytest.approx(3.0, abs=1e-12)


def test_rayleigh_rule_moments():
    s, w = rayleigh_rule()
    u = s * s
    # u ~ Exp(1): E[u^k] = k!
    for k in range(6):
        assert np.sum(w * u**k) == pytest.approx(math.factorial(k), rel=1e-13)
    # E[S] = sqrt(pi)/2 for the Rayleigh law with density 2 s exp(-s^2)
    assert np.sum(w * s) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-14)
