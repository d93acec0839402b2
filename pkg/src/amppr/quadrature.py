"""Fixed-order quadrature rules shared by the state-evolution and spectral code."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(a, b, n):
    """Gauss-Legendre nodes and weights on the interval [a, b].

    Parameters
    ----------
    a, b : float
        Integration bounds.
    n : int
        Number of nodes.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Nodes on [a, b] and the matching weights.
    """
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (b + a), half * w


def graded_legendre(scale, b, n):
    """Gauss-Legendre rule on [0, b] graded towards 0 by a sinh map.

    Uses theta = scale * sinh(u) with u equispaced in Gauss-Legendre sense on
    [0, asinh(b / scale)]. Integrands that vary on a length ``scale`` near the
    origin (e.g. 1/sqrt(sin^2 theta + scale^2)) are then resolved with a fixed
    node count, however small ``scale`` is. For ``scale >= b`` this is close to
    a plain rule and we return the plain one.
    """
    if not scale > 0 or scale >= b:
        return gauss_legendre(0.0, b, n)
    top = np.arcsinh(b / scale)
    u, wu = gauss_legendre(0.0, top, n)
    return scale * np.sinh(u), wu * scale * np.cosh(u)


@lru_cache(maxsize=16)
def gauss_hermite(n):
    """Nodes and weights for E[f(Z)], Z ~ N(0, 1) (probabilists' Hermite)."""
    z, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / np.sqrt(2.0 * np.pi)
    z.flags.writeable = False
    w.flags.writeable = False
    return z, w


# Panel breakpoints in s = |Z| sqrt(delta) for integrals against the Rayleigh
# density 2 s exp(-s^2) on [0, inf). exp(-8.5^2) ~ 3e-32, so the truncated tail
# is negligible for integrands of polynomial growth.
_RAYLEIGH_BREAKS = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.5, 8.5)


@lru_cache(maxsize=8)
def rayleigh_rule(nodes_per_panel=32):
    """Composite Gauss-Legendre rule for E[f(S)], S with density 2 s exp(-s^2).

    S^2 ~ Exp(1), so this also integrates against exp(-u) through u = s^2;
    working in s keeps integrands smooth when they depend on sqrt(u).
    The density is folded into the returned weights.
    """
    ss, ws = [], []
    for a, b in zip(_RAYLEIGH_BREAKS[:-1], _RAYLEIGH_BREAKS[1:]):
        s, w = gauss_legendre(a, b, nodes_per_panel)
        ss.append(s)
        ws.append(w * 2.0 * s * np.exp(-s * s))
    s = np.concatenate(ss)
    w = np.concatenate(ws)
    s.flags.writeable = False
    w.flags.writeable = False
    return s, w
