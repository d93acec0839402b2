"""Decoupled spectral initialisation for AMP.A.

The estimate direction is the principal eigenvector v of
D = A^H diag(T(y)) A. AMP.A is then started from x^0 = rho v and
p^0 = (1 - 2 tau T(y)) * A x^0, where tau solves phi_1(delta, tau) = 1/delta.
The phi moments are expectations over Z ~ CN(0, 1/delta) and Y = |Z| + W.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .quadrature import gauss_hermite, rayleigh_rule

# sup_y T(y) = 1 for t_opt, so 1 - 2 tau T(y) > 0 for every y iff tau <= 1/2
# (strictly positive for tau < 1/2; at tau = 1/2 it vanishes only as y -> inf).
TAU_MAX = 0.5

_HERMITE_NODES = 64


class EigenSolverError(ArithmeticError):
    pass


class StabilityError(ArithmeticError):
    """-div_p(h) <= 0 at the end of an AMP.S run."""


def t_opt(y, delta):
    """T(y) = (delta y^2 - 1) / (delta y^2 + sqrt(delta) - 1)."""
    if not delta > 1:
        raise ValueError("t_opt needs delta > 1")
    y2 = np.square(y)
    return (delta * y2 - 1.0) / (delta * y2 + math.sqrt(delta) - 1.0)


def _t_values(instance, T):
    y = instance.observations
    if T is None:
        return t_opt(y, instance.delta)
    return np.asarray(T(y), dtype=float)


@dataclass(frozen=True)
class Eigenpair:
    vector: np.ndarray
    value: float
    residual: float
    iterations: int


def _fix_phase(v, n):
    # Largest-modulus entry real positive, ||v||^2 = n.
    k = int(np.argmax(np.abs(v)))
    v = v * (np.conj(v[k]) / abs(v[k]))
    v = v * (math.sqrt(n) / np.linalg.norm(v))
    v[k] = v[k].real  # drop the rounding residue in the pivot's imaginary part
    return v


def principal_eigvec(instance, T=None, method="lanczos", max_iter=5000, tol=1e-8, seed=0):
    """Eigenvector of D = A^H diag(T(y)) A for its algebraically largest eigenvalue.

    D is applied matrix-free. ``method`` is ``"lanczos"`` (ARPACK, default)
    or ``"power"`` (shifted power iteration on D + sI). Either way the exit
    criterion is ||Dv - lambda v|| / (|lambda| ||v||) < tol; the result is
    normalised to ||v||^2 = n with its largest-modulus entry real positive.
    """
    t = _t_values(instance, T)
    n = instance.n
    matvecs = [0]

    def apply_d(v):
        matvecs[0] += 1
        return instance.adjoint(t * instance.forward(v))

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal((n, 2)).view(np.complex128)[:, 0]

    if method == "lanczos":
        op = LinearOperator((n, n), matvec=lambda v: apply_d(np.ravel(v)), dtype=np.complex128)
        try:
            vals, vecs = eigsh(op, k=1, which="LA", v0=v0, tol=tol * 1e-4, maxiter=max_iter)
        except ArpackNoConvergence as exc:
            raise EigenSolverError(f"Lanczos did not converge in {max_iter} restarts") from exc
        v = vecs[:, 0]
        lam = float(vals[0])
    elif method == "power":
        s = max(0.0, -float(np.min(t))) * (1.0 + 1.0 / math.sqrt(instance.delta)) ** 2 * 1.1
        v = v0 / np.linalg.norm(v0)
        res = math.inf
        for _ in range(max_iter):
            dv = apply_d(v)
            lam = float(np.vdot(v, dv).real)
            res = np.linalg.norm(dv - lam * v) / abs(lam) if lam != 0 else math.inf
            if res < tol:
                break
            w = dv + s * v
            v = w / np.linalg.norm(w)
        else:
            raise EigenSolverError(
                f"power iteration stopped at {max_iter} iterations, residual {res:.3g}"
            )
    else:
        raise ValueError(f"unknown method {method!r}")

    v = v / np.linalg.norm(v)
    dv = apply_d(v)
    lam = float(np.vdot(v, dv).real)
    res = float(np.linalg.norm(dv - lam * v) / abs(lam))
    if not res < tol:
        raise EigenSolverError(f"eigen-residual {res:.3g} exceeds {tol:g}")
    return Eigenpair(_fix_phase(v, n), lam, res, matvecs[0])


# ---------------------------------------------------------------------------
# phi moments


@dataclass(frozen=True)
class PhiMoments:
    phi1: float
    phi2: float
    phi3: float


def _y_grid(delta, sigma_w2, noise_model):
    # Returns (u, Y, weights) on a tensor grid; u = delta |Z|^2 ~ Exp(1).
    s, w = rayleigh_rule()
    r = s / math.sqrt(delta)
    if sigma_w2 == 0:
        return s * s, r, w
    z, wz = gauss_hermite(_HERMITE_NODES)
    if noise_model == "real":
        y = r[:, None] + math.sqrt(sigma_w2) * z[None, :]
        return (s * s)[:, None], y, w[:, None] * wz[None, :]
    if noise_model == "complex":
        # W = sqrt(sigma_w2 / 2)(z1 + i z2); Y = ||Z| + W|.
        c = math.sqrt(sigma_w2 / 2.0)
        re = r[:, None, None] + c * z[None, :, None]
        im = c * z[None, None, :]
        y = np.hypot(re, im)
        ww = w[:, None, None] * wz[None, :, None] * wz[None, None, :]
        return (s * s)[:, None, None], y, ww
    raise ValueError(f"unknown noise_model {noise_model!r}")


def phi_moments(delta, tau, sigma_w2=0.0, noise_model="real"):
    """phi_1 = E[(u-1) f], phi_2 = E[f^2], phi_3 = E[(u-1) f^2].

    Here u = delta |Z|^2 and f = 2 tau T(Y) / (1 - 2 tau T(Y)) with T = t_opt.
    The Rayleigh variable is integrated with a composite Gauss-Legendre rule
    in s = sqrt(u); real noise adds a Gauss-Hermite axis, complex noise two.
    tau = TAU_MAX is accepted: f stays finite because T(Y) < 1.
    """
    if not 0.0 <= tau <= TAU_MAX:
        raise ValueError(f"tau must lie in [0, tau_max = {TAU_MAX}], got {tau}")
    if not sigma_w2 >= 0:
        raise ValueError("sigma_w2 must be nonnegative")
    u, y, w = _y_grid(delta, sigma_w2, noise_model)
    t = t_opt(y, delta)
    f = 2.0 * tau * t / (1.0 - 2.0 * tau * t)
    f2 = f * f
    return PhiMoments(
        phi1=float(np.sum(w * (u - 1.0) * f)),
        phi2=max(float(np.sum(w * f2)), 0.0),
        phi3=float(np.sum(w * (u - 1.0) * f2)),
    )


# Noiseless phi_2(delta, 1/2) = 1/delta holds identically; treat the tau* root
# as sitting on the boundary whenever phi_2(tau_max) - 1/delta is this small.
_BOUNDARY_TOL = 1e-12


@lru_cache(maxsize=256)
def solve_tau(delta, sigma_w2=0.0, noise_model="real", xtol=1e-13):
    """(tau, tau_star): phi_1(tau) = 1/delta on (0, tau_star), phi_2(tau_star) = 1/delta."""
    if not delta > 2:
        raise ValueError("decoupled initialisation needs delta > 2")
    target = 1.0 / delta

    def h2(tau):
        return phi_moments(delta, tau, sigma_w2, noise_model).phi2 - target

    def h1(tau):
        return phi_moments(delta, tau, sigma_w2, noise_model).phi1 - target

    top = h2(TAU_MAX)
    if top <= _BOUNDARY_TOL:
        if top < -_BOUNDARY_TOL:
            raise ArithmeticError(
                f"phi_2 - 1/delta has no sign change on (0, {TAU_MAX}) (value {top:.3g})"
            )
        tau_star = TAU_MAX
    else:
        tau_star = bisect(h2, 0.0, TAU_MAX, xtol=xtol)
    if not h1(tau_star) > 0:
        raise ArithmeticError("phi_1 - 1/delta has no sign change on (0, tau_star)")
    tau = bisect(h1, 0.0, tau_star, xtol=xtol)
    return tau, tau_star


def predict_finding1(delta, sigma_w2=0.0, noise_model="real"):
    """(|alpha_0|^2, sigma_0^2) after decoupled spectral initialisation with rho^2 = 1.

    |alpha_0|^2 = (1 - delta phi_2) / (1 + delta phi_3) at the tau of solve_tau.
    """
    tau, _ = solve_tau(delta, sigma_w2, noise_model)
    ph = phi_moments(delta, tau, sigma_w2, noise_model)
    a2 = (1.0 - delta * ph.phi2) / (1.0 + delta * ph.phi3)
    if not 0.0 <= a2 <= 1.0:
        raise ArithmeticError(f"|alpha_0|^2 = {a2:.6g} is outside [0, 1]")
    return a2, 1.0 - a2


# ---------------------------------------------------------------------------
# initialisers


@dataclass(frozen=True, eq=False)
class SpectralInit:
    x0: np.ndarray
    p0: np.ndarray
    tau: float
    tau_star: float
    rho: float
    predicted_alpha0_sq: float
    predicted_sigma2_0: float


def default_rho(instance):
    return float(np.linalg.norm(instance.observations) / math.sqrt(instance.n))


def decoupled_init(instance, rho=None, tau=None, method="lanczos", seed=0):
    """x^0 = rho v and p^0 = (1 - 2 tau T(y)) * A x^0.

    ``rho`` defaults to ||y|| / sqrt(n) and ``tau`` to solve_tau at the
    instance's (delta, sigma_w2); the true noise variance is used. The
    predictions are the ``predict_finding1`` values, scaled by rho^2 when ``rho`` is
    given explicitly.
    """
    delta = instance.delta
    tau_fit, tau_star = solve_tau(delta, instance.sigma_w2, instance.noise_model)
    tau = tau_fit if tau is None else float(tau)
    v = principal_eigvec(instance, method=method, seed=seed).vector
    scale = 1.0
    if rho is None:
        rho = default_rho(instance)
    else:
        scale = float(rho) ** 2
    x0 = rho * v
    ax0 = instance.forward(x0)
    p0 = (1.0 - 2.0 * tau * t_opt(instance.observations, delta)) * ax0
    a2, s2 = predict_finding1(delta, instance.sigma_w2, instance.noise_model)
    return SpectralInit(
        x0=x0, p0=p0, tau=tau, tau_star=tau_star, rho=float(rho),
        predicted_alpha0_sq=scale * a2, predicted_sigma2_0=scale * s2,
    )


def blind_init(instance, rho=None, method="lanczos", seed=0):
    """Spectral x^0 with the uncorrected p^0 = A x^0 (i.e. tau = 0)."""
    return decoupled_init(instance, rho=rho, tau=0.0, method=method, seed=seed)


# ---------------------------------------------------------------------------
# AMP.S


@dataclass(frozen=True, eq=False)
class AmpsResult:
    x: np.ndarray
    p: np.ndarray
    tau: float
    residual: float
    iterations: int
    sign_flips: int


def amps_run(instance, T=None, iters=1000, seed=0, damping=0.5, tau_clip=0.49, tol=1e-12):
    """Message-passing counterpart of the power method, used as a cross-check.

    Iterates, with c_t = 2 T(y) / (1 - 2 tau_t T(y)) and h_t = c_t * p^t,

        tau_t   = (1/delta) / (-div_{t-1}) * sqrt(n) / ||r^{t-1}||
        p^t     = A x^t - tau_t h_{t-1}
        r^t     = x^t + A^H h_t / (-div_t),    -div_t = -mean(c_t)
        x^{t+1} = sqrt(n) r^t / ||r^t||

    tau_t is damped towards its previous value and clipped to [0, tau_clip];
    neither changes the fixed point, where p = A x - tau c * p. Starts from a
    seeded random x^0 with h_{-1} = 0 and tau_0 = 0. Returns (x^t, p^t, tau_t)
    from the last iteration, the relative fixed-point residual
    ||p - (A x - tau c p)|| / ||p||, and the number of steps with -div <= 0.
    """
    n = instance.n
    delta = instance.delta
    t = _t_values(instance, T)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2)).view(np.complex128)[:, 0]
    x *= math.sqrt(n) / np.linalg.norm(x)

    tau = 0.0
    p = instance.forward(x)
    c = 2.0 * t / (1.0 - 2.0 * tau * t)
    h = c * p
    nd = -float(np.mean(c))
    flips = int(nd <= 0)
    r = x + instance.adjoint(h) / nd
    nr = float(np.linalg.norm(r))
    res = math.inf
    it = 0
    for it in range(1, iters + 1):
        x = math.sqrt(n) / nr * r
        tau_f = (1.0 / delta) / nd * math.sqrt(n) / nr
        tau = float(np.clip((1.0 - damping) * tau_f + damping * tau, 0.0, tau_clip))
        p = instance.forward(x) - tau * h
        c = 2.0 * t / (1.0 - 2.0 * tau * t)
        h_new = c * p
        # p - (A x - tau h(p)) = tau (h_t - h_{t-1})
        res = tau * float(np.linalg.norm(h_new - h)) / float(np.linalg.norm(p))
        h = h_new
        nd = -float(np.mean(c))
        flips += int(nd <= 0)
        if not (np.isfinite(res) and np.isfinite(nd)):
            raise ArithmeticError(f"AMP.S produced non-finite values at t={it}")
        if res < tol:
            break
        r = x + instance.adjoint(h) / nd
        nr = float(np.linalg.norm(r))
    if not nd > 0:
        raise StabilityError(f"-div_p(h) = {nd:.3g} <= 0 at exit")
    return AmpsResult(x=x, p=p, tau=tau, residual=res, iterations=it, sign_flips=flips)
