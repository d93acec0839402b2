import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amppr import ampa
from amppr.ampa import (
    AmpConfig, SingularityError, Variant, continuation_mu, divergence, divergence_smooth,
    g_amp, g_smooth, initial_state, step_regularized, step_simplified,
)
from amppr.metrics import Outcome, phase_aligned_mse
from amppr.model import SignalModel, gen_instance
from amppr.spectral import decoupled_init


def wirtinger_fd_divergence(p, y, eps, h=1e-6):
    """(1/m) sum_a Re 1/2 (d/dp_R - i d/dp_I) g_eps(p_a, y_a) by central differences."""
    d_re = (g_smooth(p + h, y, eps) - g_smooth(p - h, y, eps)) / (2 * h)
    d_im = (g_smooth(p + 1j * h, y, eps) - g_smooth(p - 1j * h, y, eps)) / (2 * h)
    w = 0.5 * (d_re - 1j * d_im)
    return float(np.mean(w.real)), float(np.max(np.abs(w.imag)))


def test_g_amp_examples():
    assert g_amp(1.0 + 0j, 2.0) == 1.0
    assert g_amp(3j, 6.0) == pytest.approx(3j)
    p = np.array([1 + 2j, -3 + 0.5j])
    assert np.allclose(g_amp(p, np.abs(p)), 0)
    assert g_amp(0j, 2.0) == 0
    assert g_amp(0j, 2.0, zero_p_convention=1j) == 2j


def test_g_smooth_examples():
    assert g_smooth(0j, 3.0, 0.1) == 0
    assert g_smooth(1.0 + 0j, 2.0, 3.0) == pytest.approx(0.0)
    p = np.array([0.3 - 1j, 2 + 1j])
    y = np.array([1.0, 0.5])
    for eps in (1e-4, 1e-6, 1e-8):
        err = np.max(np.abs(g_smooth(p, y, eps) - g_amp(p, y)))
        assert err < 2 * eps
    with pytest.raises(ValueError):
        g_smooth(p, y, 0.0)


def test_divergence_examples():
    p = np.array([1 + 1j, -2j, 0.5])
    assert divergence(p, 2 * np.abs(p)) == pytest.approx(0)
    assert divergence(p, np.abs(p)) == pytest.approx(-0.5)
    assert divergence(np.array([1, 2], dtype=complex), np.array([1.0, 1.0])) == pytest.approx(-5 / 8)
    with pytest.raises(SingularityError, match="smoothed"):
        divergence(np.array([0j, 1]), np.ones(2))


def test_divergence_smooth_examples():
    y = np.array([1.0, 2.0, 0.5])
    eps = 0.01
    assert divergence_smooth(np.zeros(3), y, eps) == pytest.approx(np.mean(y) / math.sqrt(eps) - 1)
    p = np.array([1 + 1j, -0.7, 2j])
    for eps in (1e-4, 1e-6, 1e-8):
        assert abs(divergence_smooth(p, y, eps) - divergence(p, y)) < 10 * eps


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 40))
@settings(max_examples=60, deadline=None)
def test_divergence_smooth_finite_differences(seed, m):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.abs(rng.standard_normal(m)) * 2
    got = divergence_smooth(p, y, 0.1)
    fd, imag = wirtinger_fd_divergence(p, y, 0.1)
    assert abs(got - fd) <= 1e-5 * abs(fd)
    assert imag < 1e-6


def test_continuation_mu_examples():
    assert continuation_mu(-0.5, 3.0) == 0
    assert continuation_mu(0.0, 0.0) == 1
    assert continuation_mu(-0.25, 0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        continuation_mu(0.0, -0.5)


def test_noiseless_fixed_point(small_instance):
    inst = small_instance
    st0 = initial_state(inst, inst.signal)
    st1 = step_simplified(st0, inst, AmpConfig())
    assert st1.div == pytest.approx(-0.5, abs=1e-12)
    assert np.max(np.abs(st1.x - inst.signal)) < 1e-12
    assert np.max(np.abs(st1.g_prev)) < 1e-12


def test_first_step_from_zero_smoothed(small_instance):
    st0 = initial_state(small_instance, np.zeros(small_instance.n))
    st1 = step_simplified(st0, small_instance, AmpConfig(epsilon=1e-3))
    assert np.all(st1.p == 0) and np.all(st1.x == 0)


def test_first_step_from_zero_exact_is_singular(small_instance):
    st0 = initial_state(small_instance, np.zeros(small_instance.n))
    with pytest.raises(SingularityError):
        step_simplified(st0, small_instance, AmpConfig())


def _start(inst, seed=0):
    rng = np.random.default_rng(seed)
    x0 = inst.signal + 0.8 * (rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n))
    return initial_state(inst, x0)


def test_regularized_mu_zero_keeps_lambda_one(small_instance):
    st = _start(small_instance)
    for _ in range(3):
        st = step_regularized(st, small_instance, 0.0, AmpConfig(variant="regularized"))
        assert st.lam == 1.0


def test_regularized_large_mu_shrinks_to_zero(small_instance):
    st = _start(small_instance)
    st1 = step_regularized(st, small_instance, 1e12, AmpConfig(variant="regularized"))
    assert 0 < st1.lam < 1e-10
    assert np.linalg.norm(st1.x) < 1e-8 * np.linalg.norm(st.x)


def test_lambda_in_unit_interval(small_instance):
    st = _start(small_instance)
    for mu in (0.0, 0.3, 5.0):
        nxt = step_regularized(st, small_instance, mu, AmpConfig(variant="regularized"))
        assert 0 < nxt.lam <= 1


def continuation_gap(inst, x0, p0=None, steps=20):
    a = b = initial_state(inst, x0, p0)
    worst = 0.0
    for _ in range(steps):
        a = step_simplified(a, inst, AmpConfig())
        b = step_regularized(b, inst, None, AmpConfig(variant=Variant.AUTO_CONTINUATION))
        worst = max(worst, np.linalg.norm(a.x - b.x) / np.linalg.norm(a.x))
    return worst


def test_continuation_matches_simplified(small_instance):
    inst = small_instance
    si = decoupled_init(inst)
    assert continuation_gap(inst, si.x0, si.p0) < 1e-10


def test_stability_error_is_recorded():
    # A tiny start makes y/(2|p|) huge, so div > 0 and -div < 0 at once.
    inst = gen_instance(SignalModel(), 50, 3.0, 0.0, seed=1)
    x0 = 1e-6 * np.ones(inst.n)
    cfg = AmpConfig(variant="regularized", mu=0.0, max_iter=5)
    res = ampa.run(inst, x0, config=cfg)
    assert res.record.outcome is Outcome.FAIL
    assert "StabilityError" in res.record.reason


def test_singularity_is_recorded_as_divergence(small_instance):
    res = ampa.run(small_instance, np.zeros(small_instance.n), config=AmpConfig(max_iter=3))
    assert res.record.outcome is Outcome.DIVERGED
    assert "SingularityError" in res.record.reason


def test_truth_init_stays_exact(small_instance):
    res = ampa.run(small_instance, small_instance.signal, config=AmpConfig(max_iter=50, stop_mse=0.0))
    mse = res.record.column("mse")
    assert len(mse) == 51
    assert mse.max() < 1e-20


@given(phi=st.floats(0, 2 * math.pi))
@settings(max_examples=10, deadline=None)
def test_global_phase_equivariance(small_instance, phi):
    inst = small_instance
    rng = np.random.default_rng(7)
    x0 = inst.signal + rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n)
    p0 = inst.forward(x0) * 0.9
    u = np.exp(1j * phi)
    cfg = AmpConfig(max_iter=10, stop_mse=0.0)
    a = ampa.run(inst, x0, p0, cfg, keep_states=True).states
    b = ampa.run(inst, u * x0, u * p0, cfg, keep_states=True).states
    for sa, sb in zip(a, b):
        assert np.linalg.norm(sb.x - u * sa.x) <= 1e-12 * np.linalg.norm(sa.x)


def test_smoothing_converges_to_exact(small_instance):
    inst = small_instance
    rng = np.random.default_rng(4)
    x0 = inst.signal + 0.7 * (rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n))

    def traj(eps):
        cfg = AmpConfig(epsilon=eps, max_iter=8, stop_mse=0.0)
        return np.array([s.x for s in ampa.run(inst, x0, None, cfg, keep_states=True).states])

    exact = traj(0.0)
    epss = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    gaps = np.array([np.max(np.abs(traj(eps) - exact), axis=1) for eps in epss])  # (eps, t)
    # early iterates: already monotone over the coarse eps set
    for t in range(1, 5):
        assert gaps[0, t] > gaps[1, t] > gaps[2, t]
    # every iterate: monotone once eps <= 1e-5, and close at the finest eps
    for t in range(1, 9):
        assert np.all(np.diff(gaps[2:, t]) < 0)
    assert gaps[-1].max() < 1e-3


def test_spectral_mse_decreases_after_t3():
    monotone = 0
    for seed in range(10):
        inst = gen_instance(SignalModel(), 500, 4.0, 0.0, seed=seed)
        si = decoupled_init(inst)
        res = ampa.run(inst, si.x0, si.p0, AmpConfig(max_iter=40, stop_mse=1e-13))
        mse_n = res.record.column("mse_n")[3:]
        monotone += bool(np.all(np.diff(mse_n) <= 0))
    assert monotone >= 9


@pytest.mark.slow
def test_success_well_above_transition():
    ok = 0
    for seed in range(100):
        inst = gen_instance(SignalModel(), 1000, 3.0, 0.0, seed=seed)
        si = decoupled_init(inst)
        ok += ampa.run(inst, si.x0, si.p0, AmpConfig()).record.outcome is Outcome.SUCCESS
    assert ok >= 95


@pytest.mark.slow
def test_no_success_at_global_threshold():
    ok = 0
    for seed in range(10):
        inst = gen_instance(SignalModel(), 1000, 2.0, 0.0, seed=seed)
        rng = np.random.default_rng(seed)
        x0 = rng.standard_normal(inst.n) + 1j * rng.standard_normal(inst.n)
        ok += ampa.run(inst, x0, None, AmpConfig()).record.outcome is Outcome.SUCCESS
    assert ok == 0


def test_mse_record_matches_direct(small_instance):
    rng = np.random.default_rng(5)
    x0 = small_instance.signal + rng.standard_normal(small_instance.n)
    res = ampa.run(small_instance, x0, config=AmpConfig(max_iter=3, stop_mse=0.0), keep_states=True)
    for row, s in zip(res.record.rows, res.states):
        assert row[3] == pytest.approx(phase_aligned_mse(s.x, small_instance.signal)[0], rel=1e-10)
