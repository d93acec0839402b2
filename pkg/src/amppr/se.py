"""State evolution (SE) of AMP.A for the complex model.

The SE tracks the alignment alpha and the effective noise variance sigma^2 of
the iterates, x^t ~ alpha_t x* + sigma_t h, through the maps

    psi_1(alpha, s)  = e^{i arg alpha} int_0^{pi/2} |alpha| sin^2 t / sqrt(|alpha|^2 sin^2 t + s) dt
    psi_2(alpha, s)  = 4/delta (|alpha|^2 + s + 1)
                       - 4/delta int_0^{pi/2} (2|alpha|^2 sin^2 t + s) / sqrt(|alpha|^2 sin^2 t + s) dt
                       + 4 sigma_w^2
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .quadrature import gauss_legendre

DELTA_AMP = 64.0 / math.pi**2 - 4.0
DELTA_GLOBAL = 2.0

# Below this sqrt(sigma^2)/|alpha| a plain 256-node rule starts to miss the
# integrand's structure near theta = 0 (checked against closed forms).
_GRADE_BELOW = 0.01


def thresholds():
    """(delta_AMP, delta_global) = (64/pi^2 - 4, 2)."""
    return DELTA_AMP, DELTA_GLOBAL


@dataclass(frozen=True)
class SePoint:
    alpha: complex
    sigma2: float

    @property
    def amse(self):
        return amse(self)


@dataclass(frozen=True)
class SeConfig:
    quad_nodes: int = 256
    max_iter: int = 1000
    conv_tol_alpha: float = 1e-6
    conv_tol_sigma2: float = 1e-9
    fixed_point_tol: float = 1e-12

    def __post_init__(self):
        if self.quad_nodes < 64:
            raise ValueError("quad_nodes must be >= 64")


BASIN_CONFIG = SeConfig(max_iter=10_000)


class SeOutcome(str, Enum):
    CONVERGED = "converged_to_(1,0)"
    OTHER_FIXED_POINT = "converged_to_other_fixed_point"
    NOT_CONVERGED = "not_converged_within_budget"


def amse(point):
    """(1 - |alpha|)^2 + sigma^2."""
    return (1.0 - abs(point.alpha)) ** 2 + point.sigma2


def _integrals(a, s, quad_nodes):
    """Both theta-integrals for |alpha| = a and sigma^2 = s (arrays broadcast).

    The integrands vary on the scale theta ~ sqrt(s)/a near 0, which drops below
    the spacing of a plain Gauss-Legendre rule as the SE approaches (1, 0). The
    rule is therefore graded towards theta = 0 at that scale, separately for
    each (a, s).
    """
    a, s = np.broadcast_arrays(
        np.atleast_1d(np.asarray(a, dtype=float)),
        np.atleast_1d(np.asarray(s, dtype=float)),
    )
    shape = a.shape
    a = a.ravel()
    s = s.ravel()
    i1 = np.zeros(a.shape)
    i2 = np.zeros(a.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = np.where(a > 0, np.sqrt(s) / a, np.inf)
    # s = 0: the integrands reduce to sin(theta)/a and 2a sin(theta); done in
    # closed form so that a*a cannot underflow into 0 * inf.
    exact = (s == 0) & (a > 0)
    i1[exact] = 1.0 / a[exact]
    i2[exact] = 2.0 * a[exact]
    graded = (scale > 0) & (scale < _GRADE_BELOW)
    live = ~(s == 0)

    plain = np.flatnonzero(live & ~graded)
    if plain.size:
        th, w = gauss_legendre(0.0, math.pi / 2, quad_nodes)
        s2 = np.sin(th) ** 2
        ap, sp = a[plain], s[plain]
        inv = 1.0 / np.sqrt(np.multiply.outer(ap * ap, s2) + sp[:, None])
        j1 = inv @ (w * s2)
        i1[plain] = j1
        # int (2a^2 sin^2 + s)/den = 2a^2 int sin^2/den + s int 1/den
        i2[plain] = 2.0 * ap * ap * j1 + sp * (inv @ w)

    rows = np.flatnonzero(graded)
    if rows.size:
        # theta = scale * sinh(u), u on [0, asinh((pi/2)/scale)], row by row.
        xi, wi = gauss_legendre(0.0, 1.0, quad_nodes)
        sc = scale[rows, None]
        top = np.arcsinh((math.pi / 2) / sc)
        u = top * xi
        th = sc * np.sinh(u)
        w = top * wi * sc * np.cosh(u)
        s2 = np.sin(th) ** 2
        ag, sg = a[rows, None], s[rows, None]
        den = np.sqrt(ag * ag * s2 + sg)
        i1[rows] = (w * s2 / den).sum(axis=1)
        i2[rows] = (w * (2.0 * ag * ag * s2 + sg) / den).sum(axis=1)
    return i1.reshape(shape), i2.reshape(shape)


def _psi_abs(a, s, delta, sigma_w2, quad_nodes):
    # psi_1 for real |alpha| = a, and psi_2, vectorised over arrays.
    i1, i2 = _integrals(a, s, quad_nodes)
    psi1 = a * i1
    psi2 = 4.0 / delta * (a * a + s + 1.0) - 4.0 / delta * i2 + 4.0 * sigma_w2
    return psi1, psi2


def _clamp(psi2):
    psi2 = np.asarray(psi2, dtype=float)
    neg = psi2 < 0
    if np.any(neg):
        worst = float(np.min(psi2))
        if worst < -1e-12:
            raise ArithmeticError(f"psi_2 = {worst:.3g} is negative beyond round-off")
        warnings.warn(f"clamping psi_2 = {worst:.3g} to 0", RuntimeWarning, stacklevel=3)
        psi2 = np.where(neg, 0.0, psi2)
    return psi2


def se_map(point, delta, sigma_w2=0.0, config=SeConfig()):
    """One SE step (alpha, sigma^2) -> (psi_1, psi_2).

    psi_1 keeps the phase of alpha; at (0, 0) both integrals vanish.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    a = abs(point.alpha)
    s = float(point.sigma2)
    if s < 0:
        raise ValueError("sigma2 must be nonnegative")
    psi1, psi2 = _psi_abs(a, s, delta, sigma_w2, config.quad_nodes)
    psi2 = float(_clamp(psi2)[0])
    alpha = complex(point.alpha)
    phase = alpha / a if a > 0 else 1.0
    return SePoint(alpha=phase * float(psi1[0]), sigma2=psi2)


@dataclass
class SeResult:
    points: list
    outcome: SeOutcome

    @property
    def converged(self):
        return self.outcome is SeOutcome.CONVERGED

    @property
    def final(self):
        return self.points[-1]

    @property
    def iterations(self):
        return len(self.points) - 1


def _at_target(a, s, config):
    return abs(1.0 - a) < config.conv_tol_alpha and s < config.conv_tol_sigma2


def se_run(init, delta, sigma_w2=0.0, config=SeConfig()):
    """Iterate the SE from ``init`` and classify where it ends up.

    Stops as soon as the iterate is within tolerance of (1, 0), or when
    successive iterates differ by less than ``config.fixed_point_tol``.
    """
    if abs(init.alpha) == 0 and init.sigma2 == 0:
        raise ValueError("the SE is undefined from (alpha, sigma^2) = (0, 0)")
    points = [SePoint(complex(init.alpha), float(init.sigma2))]
    if sigma_w2 == 0 and _at_target(abs(init.alpha), init.sigma2, config):
        return SeResult(points, SeOutcome.CONVERGED)
    for _ in range(config.max_iter):
        prev = points[-1]
        cur = se_map(prev, delta, sigma_w2, config)
        points.append(cur)
        if _at_target(abs(cur.alpha), cur.sigma2, config):
            return SeResult(points, SeOutcome.CONVERGED)
        if (
            abs(cur.alpha - prev.alpha) < config.fixed_point_tol
            and abs(cur.sigma2 - prev.sigma2) < config.fixed_point_tol
        ):
            return SeResult(points, SeOutcome.OTHER_FIXED_POINT)
    return SeResult(points, SeOutcome.NOT_CONVERGED)


def se_trajectory(init, delta, sigma_w2=0.0, iters=20, config=SeConfig()):
    """Exactly ``iters`` SE steps from ``init`` (no stopping rule); iters + 1 points."""
    points = [SePoint(complex(init.alpha), float(init.sigma2))]
    for _ in range(iters):
        points.append(se_map(points[-1], delta, sigma_w2, config))
    return points


def basin_grid(delta, grid=(100, 100), config=BASIN_CONFIG):
    """Boolean map of SE initialisations that converge to (1, 0).

    Entry [i, j] is for alpha_0 = linspace(0, 1, grid[0])[i] and
    sigma_0^2 = linspace(0, 1, grid[1])[j]. All cells are iterated together;
    a cell leaves the active set once it is classified. The (0, 0) cell is
    excluded from the SE and reported False.
    """
    alphas = np.linspace(0.0, 1.0, grid[0])
    sigmas = np.linspace(0.0, 1.0, grid[1])
    a, s = np.meshgrid(alphas, sigmas, indexing="ij")
    a = a.ravel().copy()
    s = s.ravel().copy()
    result = np.zeros(a.shape, dtype=bool)
    active = ~((a == 0) & (s == 0))
    at = np.array([_at_target(ai, si, config) for ai, si in zip(a, s)])
    result[active & at] = True
    active &= ~at
    for _ in range(config.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        a1, s1 = _psi_abs(a[idx], s[idx], delta, 0.0, config.quad_nodes)
        s1 = _clamp(s1)
        hit = (np.abs(1.0 - a1) < config.conv_tol_alpha) & (s1 < config.conv_tol_sigma2)
        stuck = (np.abs(a1 - a[idx]) < config.fixed_point_tol) & (
            np.abs(s1 - s[idx]) < config.fixed_point_tol
        )
        a[idx] = a1
        s[idx] = s1
        result[idx[hit]] = True
        active[idx[hit | stuck]] = False
    return result.reshape(grid), alphas, sigmas


NOISE_LEVELS = (1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class NoiseSlope:
    extrapolated: float
    closed_form: float
    ratios: dict


def noise_slope(delta, config=SeConfig(max_iter=20_000, fixed_point_tol=1e-14),
                levels=NOISE_LEVELS, init=SePoint(1.0, 0.0)):
    """High-SNR slope of the AMSE at the noisy SE fixed point.

    For each noise level the SE is run to its fixed point and AMSE/sigma_w^2 is
    recorded; the two smallest levels are combined by Richardson extrapolation
    (assuming AMSE/sigma_w^2 = c0 + c1 sigma_w^2). The closed form
    4 / (1 - 2/delta) is returned alongside.
    """
    if not delta > DELTA_AMP:
        raise ValueError(f"delta must exceed delta_AMP = {DELTA_AMP:.6f}")
    ratios = {}
    for level in levels:
        res = se_run(init, delta, level, config)
        if res.outcome is SeOutcome.NOT_CONVERGED:
            raise ArithmeticError(f"SE did not reach a fixed point at sigma_w2={level:g}")
        ratios[level] = amse(res.final) / level
    h1, h2 = sorted(levels)[1], sorted(levels)[0]
    c0 = (h1 * ratios[h2] - h2 * ratios[h1]) / (h1 - h2)
    return NoiseSlope(extrapolated=c0, closed_form=4.0 / (1.0 - 2.0 / delta), ratios=ratios)
