import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amppr import se
from amppr.se import SeConfig, SeOutcome, SePoint, se_map, se_run
from oracles import psi_elliptic

START = SePoint(0.1, 0.99)


def test_thresholds():
    d_amp, d_glob = se.thresholds()
    assert d_amp == pytest.approx(64 / math.pi**2 - 4, abs=1e-12)
    assert round(d_amp, 4) == 2.4846
    assert d_glob == 2


@given(a=st.floats(1e-3, 1.0), s=st.floats(1e-10, 1.0), delta=st.floats(1.5, 10))
@settings(max_examples=200, deadline=None)
def test_psi_against_elliptic_closed_form(a, s, delta):
    p = se_map(SePoint(a, s), delta)
    e1, e2 = psi_elliptic(a, s, delta)
    assert abs(p.alpha - e1) < 1e-12
    assert abs(p.sigma2 - e2) < 1e-12


def test_psi_on_alpha_zero_axis():
    for s in (0.01, 0.5, 1.0):
        p = se_map(SePoint(0.0, s), 3.0)
        assert p.alpha == 0
        assert p.sigma2 == pytest.approx(psi_elliptic(0.0, s, 3.0)[1], abs=1e-13)


def test_psi_at_origin_by_continuity():
    p = se_map(SePoint(0.0, 0.0), 2.5, 0.01)
    assert p.alpha == 0
    assert p.sigma2 == pytest.approx(4 / 2.5 + 4 * 0.01)


@given(phi=st.floats(-math.pi, math.pi), a=st.floats(0.01, 1), s=st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_phase_equivariance(phi, a, s):
    alpha = a * cmath.exp(1j * phi)
    rot = se_map(SePoint(alpha, s), 3.0)
    # the map sees only |alpha| and its phase; compare against the modulus actually stored
    base = se_map(SePoint(abs(alpha), s), 3.0)
    assert rot.sigma2 == base.sigma2
    assert abs(rot.alpha - cmath.exp(1j * cmath.phase(alpha)) * base.alpha) < 1e-15


def test_node_doubling_converged():
    grid = np.linspace(0.0, 1.0, 11)
    for a in grid:
        for s in grid:
            if a == 0 and s == 0:
                continue
            p = se_map(SePoint(a, s), 3.0, config=SeConfig(quad_nodes=256))
            q = se_map(SePoint(a, s), 3.0, config=SeConfig(quad_nodes=512))
            assert abs(p.alpha - q.alpha) < 1e-10
            assert abs(p.sigma2 - q.sigma2) < 1e-10


def test_quad_nodes_minimum():
    with pytest.raises(ValueError):
        SeConfig(quad_nodes=32)


def test_perfect_recovery_is_fixed_point():
    p = se_map(SePoint(1.0, 0.0), 3.0)
    assert p.alpha == pytest.approx(1.0, abs=1e-15)
    assert abs(p.sigma2) < 1e-14


@given(a=st.floats(0, 1), s=st.floats(0, 1), w=st.floats(0, 0.1))
@settings(max_examples=50, deadline=None)
def test_noise_term_is_additive(a, s, w):
    if a == 0 and s == 0:
        return
    clean = se._psi_abs(a, s, 3.0, 0.0, 256)[1]
    noisy = se._psi_abs(a, s, 3.0, w, 256)[1]
    assert noisy - clean == pytest.approx(4 * w, abs=1e-14)
    assert se_map(SePoint(a, s), 3.0, w).sigma2 >= 0


def test_clamp_policy():
    with pytest.warns(RuntimeWarning):
        assert se._clamp(np.array([-1e-15]))[0] == 0
    with pytest.raises(ArithmeticError):
        se._clamp(np.array([-1e-6]))


@pytest.mark.parametrize("delta", [2.49, 3.0, 4.0])
def test_converges_above_amp_threshold(delta):
    res = se_run(START, delta)
    assert res.outcome is SeOutcome.CONVERGED
    assert res.final.amse < 1e-9


@pytest.mark.parametrize("delta", [1.9, 2.0])
def test_fails_below_global_threshold(delta):
    res = se_run(START, delta)
    assert res.outcome is not SeOutcome.CONVERGED
    assert res.final.amse > 1e-3


def test_threshold_bracket():
    assert se_run(START, 2.49).converged
    assert not se_run(START, 2.48).converged


def test_run_from_origin_rejected():
    with pytest.raises(ValueError):
        se_run(SePoint(0, 0), 3.0)


def test_trajectory_length():
    res = se_run(START, 4.0)
    assert len(res.points) == res.iterations + 1
    assert len(se.se_trajectory(START, 4.0, iters=7)) == 8


def test_basin_small_grid_properties():
    g, alphas, sigmas = se.basin_grid(2.45, grid=(12, 12))
    assert g.shape == (12, 12)
    assert not g[0].any()
    assert alphas[0] == 0 and sigmas[-1] == 1
    # cellwise agreement with single runs on a few cells
    conf = se.BASIN_CONFIG
    for i, j in [(3, 4), (11, 0), (6, 11), (1, 1)]:
        assert se_run(SePoint(alphas[i], sigmas[j]), 2.45, config=conf).converged == g[i, j]


def test_noise_slope_close_to_closed_form():
    ns = se.noise_slope(4.0)
    assert ns.closed_form == 8.0
    assert ns.extrapolated == pytest.approx(8.0, rel=1e-3)
    for level, ratio in ns.ratios.items():
        assert ratio == pytest.approx(8.0, rel=0.02)


def test_noise_slope_rejects_low_delta():
    with pytest.raises(ValueError):
        se.noise_slope(2.4)
