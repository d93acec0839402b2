"""AMP.A iterations for amplitude-based phase retrieval.

Two recursions are provided:

* ``step_simplified``: p^t = A x^t - (2/delta) g(p^{t-1}, y),
  x^{t+1} = 2 [ -div_p(g_t) x^t + A^H g(p^t, y) ].
* ``step_regularized``: the mu-regularised form with the scalar trackers
  lambda_t and tau_t. With mu^t = continuation_mu(div_t, tau_t) it reduces
  algebraically to the simplified recursion.

Both switch to the smoothed nonlinearity g_eps when ``AmpConfig.epsilon > 0``.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .metrics import Outcome, SUCCESS_THRESHOLD, TrialRecord


class SingularityError(ValueError):
    """div_p(g) requested at p = 0 with the exact (non-smoothed) nonlinearity."""


class DivergenceError(ArithmeticError):
    """An iteration produced NaN or Inf."""


class StabilityError(ArithmeticError):
    """-div_p(g_t) <= 0 in the regularised recursion."""


class Variant(str, Enum):
    SIMPLIFIED = "simplified"
    REGULARIZED = "regularized"
    AUTO_CONTINUATION = "auto_continuation"


@dataclass(frozen=True)
class AmpConfig:
    variant: Variant = Variant.SIMPLIFIED
    mu: float = 0.0
    epsilon: float = 0.0
    max_iter: int = 1000
    zero_p_convention: complex = 0j
    stop_mse: float = 1e-13
    success_threshold: float = SUCCESS_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.variant is Variant.REGULARIZED and self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass(frozen=True, eq=False)
class AmpState:
    """Iterate x^t plus the memory needed to form p^t.

    ``g_prev`` is g(p^{t-1}, y), ``div`` is div_p(g_{t-1}), ``lam`` is
    lambda_{t-1} and ``tau`` is tau_t (the value used by the next step).
    ``p`` is the most recent p^{t-1} (zeros before the first step).
    """

    x: np.ndarray
    p: np.ndarray
    g_prev: np.ndarray
    lam: float = 1.0
    tau: float = 0.5
    div: float = -0.5
    iter: int = 0


def g_amp(p, y, zero_p_convention=0j):
    """g(p, y) = y p/|p| - p, elementwise; p/|p| := zero_p_convention at p = 0."""
    p = np.asarray(p)
    mag = np.abs(p)
    zero = mag == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(zero, zero_p_convention, p / np.where(zero, 1.0, mag))
    return y * phase - p


def g_smooth(p, y, eps):
    """g_eps(p, y) = y p / sqrt(|p|^2 + eps) - p."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    p = np.asarray(p)
    return y * p / np.sqrt(np.abs(p) ** 2 + eps) - p


def divergence(p, y):
    """(1/m) sum_a y_a / (2 |p_a|) - 1."""
    mag = np.abs(np.asarray(p))
    if np.any(mag == 0):
        raise SingularityError(
            "div_p(g) is singular at p = 0; use the smoothed variant (epsilon > 0)"
        )
    return float(np.mean(y / (2.0 * mag))) - 1.0


def divergence_smooth(p, y, eps):
    """(1/m) sum_a y_a (|p_a|^2/2 + eps) / (|p_a|^2 + eps)^{3/2} - 1.

    This is Re of the Wirtinger derivative (1/2)(d/dp_R - i d/dp_I) of g_eps,
    averaged over coordinates; the imaginary part vanishes identically.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a2 = np.abs(np.asarray(p)) ** 2
    return float(np.mean(y * (0.5 * a2 + eps) / (a2 + eps) ** 1.5)) - 1.0


def continuation_mu(div, tau):
    """mu^t = (1 + 2 div) / (1 + 2 tau)."""
    if not tau > -0.5:
        raise ValueError("tau must exceed -1/2")
    return (1.0 + 2.0 * div) / (1.0 + 2.0 * tau)


def _g_and_div(p, y, config):
    if config.epsilon > 0:
        return g_smooth(p, y, config.epsilon), divergence_smooth(p, y, config.epsilon)
    return g_amp(p, y, config.zero_p_convention), divergence(p, y)


def _check_finite(state):
    if not (
        np.isfinite(state.x).all()
        and np.isfinite(state.p).all()
        and np.isfinite(state.div)
    ):
        raise DivergenceError(f"non-finite iterate at t={state.iter}")
    return state


def initial_state(instance, x0, p0=None):
    """State for t = 0 with p^{-1} = 0, or with p^0 forced to ``p0``.

    A forced p^0 is encoded as the memory term that produces it:
    g_prev = (delta/2)(A x^0 - p^0). The scalars (lam, div) = (1, -1/2) make the
    Onsager coefficient equal 2/delta in both recursions, and tau_0 = 1/2.
    """
    x0 = np.array(x0, dtype=np.complex128)
    if x0.shape != (instance.n,):
        raise ValueError(f"x0 must have length n={instance.n}")
    if p0 is None:
        g_prev = np.zeros(instance.m, dtype=np.complex128)
    else:
        p0 = np.asarray(p0, dtype=np.complex128)
        if p0.shape != (instance.m,):
            raise ValueError(f"p0 must have length m={instance.m}")
        g_prev = 0.5 * instance.delta * (instance.forward(x0) - p0)
    return AmpState(
        x=x0,
        p=np.zeros(instance.m, dtype=np.complex128),
        g_prev=g_prev,
    )


def step_simplified(state, instance, config):
    y = instance.observations
    p = instance.forward(state.x) - (2.0 / instance.delta) * state.g_prev
    g, div = _g_and_div(p, y, config)
    x = 2.0 * (-div * state.x + instance.adjoint(g))
    # lam = -2 div is the lambda_t that the continuation choice of mu implies.
    return _check_finite(
        replace(state, x=x, p=p, g_prev=g, lam=-2.0 * div, div=div, iter=state.iter + 1)
    )


def step_regularized(state, instance, mu, config):
    """One step of the mu-regularised recursion.

    ``mu`` is a nonnegative float, or None to use continuation_mu(div_t, tau_t).
    """
    y = instance.observations
    delta = instance.delta
    onsager = state.lam / (-state.div)
    p = instance.forward(state.x) - (onsager / delta) * state.g_prev
    g, div = _g_and_div(p, y, config)
    if not np.isfinite(div):
        raise DivergenceError(f"non-finite divergence at t={state.iter}")
    if not -div > 0:
        raise StabilityError(f"-div_p(g_t) = {-div:.3g} <= 0 at t={state.iter}")
    mu_t = continuation_mu(div, state.tau) if mu is None else mu
    lam = -div / (-div + mu_t * (state.tau + 0.5))
    x = lam * (state.x + instance.adjoint(g) / (-div))
    tau = (state.tau + 0.5) / (-div) * lam / delta
    return _check_finite(
        replace(state, x=x, p=p, g_prev=g, lam=lam, tau=tau, div=div, iter=state.iter + 1)
    )


def step(state, instance, config):
    if config.variant is Variant.SIMPLIFIED:
        return step_simplified(state, instance, config)
    mu = None if config.variant is Variant.AUTO_CONTINUATION else config.mu
    return step_regularized(state, instance, mu, config)


@dataclass
class RunResult:
    record: TrialRecord
    state: AmpState
    states: list | None = None


def run(instance, x0, p0=None, config=AmpConfig(), seed=0, config_hash="",
        x_star=None, keep_states=False):
    """Iterate from (x0, p0) for up to ``config.max_iter`` steps.

    Stops early once the phase-aligned mse drops below ``config.stop_mse``.
    Divergence and stability failures end the run and are recorded on the
    returned record rather than raised.
    """
    x_star = instance.signal if x_star is None else x_star
    state = initial_state(instance, x0, p0)
    record = TrialRecord(seed=seed, config_hash=config_hash)
    mse = record.append(0, state.x, x_star)
    states = [state] if keep_states else None
    try:
        for _ in range(config.max_iter):
            if mse < config.stop_mse:
                break
            state = step(state, instance, config)
            mse = record.append(state.iter, state.x, x_star, state.div)
            if keep_states:
                states.append(state)
    except (DivergenceError, SingularityError) as exc:
        record.outcome = Outcome.DIVERGED
        record.reason = f"{type(exc).__name__}: {exc}"
        return RunResult(record, state, states)
    except StabilityError as exc:
        record.outcome = Outcome.FAIL
        record.reason = f"{type(exc).__name__}: {exc}"
        return RunResult(record, state, states)
    record.outcome = (
        Outcome.SUCCESS if record.final_mse < config.success_threshold else Outcome.FAIL
    )
    return RunResult(record, state, states)
