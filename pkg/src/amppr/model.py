"""Problem instances for complex phase retrieval, y = |A x| + w.

Sensing matrices have iid CN(0, 1/m) entries and signals are rescaled so that
||x||^2 / n = 1 exactly.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

SCHEMA_VERSION = 1

NOISE_MODELS = ("real", "complex")


class SignalKind(str, Enum):
    COMPLEX_GAUSSIAN = "complex_gaussian"
    NONNEG_SPARSE = "nonneg_sparse"


@dataclass(frozen=True)
class SignalModel:
    kind: SignalKind = SignalKind.COMPLEX_GAUSSIAN
    sparsity: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        if self.kind is SignalKind.NONNEG_SPARSE and not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")


def _readonly(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One draw of (signal, matrix, noise) and the resulting observations.

    Arrays are read-only, so an instance can be shared between threads.
    ``noise_model`` is ``"real"`` for y = |Ax| + w with real Gaussian w, or
    ``"complex"`` for y = ||Ax| + w| with w ~ CN(0, sigma_w2).
    """

    n: int
    m: int
    delta: float
    sigma_w2: float
    signal: np.ndarray
    matrix: np.ndarray
    noise: np.ndarray
    observations: np.ndarray
    noise_model: str = "real"
    seed: int | None = None

    def forward(self, x):
        """A @ x."""
        return self.matrix @ x

    def adjoint(self, z):
        """A^H @ z, without materialising the conjugate transpose."""
        return (self.matrix.T @ np.conj(z)).conj()


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return int(n)


def gen_signal(model, n, seed, normalize=True):
    """Draw a signal of length ``n``.

    ``seed`` may be an int or a ``np.random.SeedSequence``. With ``normalize``
    the result satisfies ||x||^2 / n = 1.
    """
    n = _check_n(n)
    if not isinstance(model, SignalModel):
        model = SignalModel(model)
    rng = np.random.default_rng(seed)
    if model.kind is SignalKind.COMPLEX_GAUSSIAN:
        x = rng.standard_normal((n, 2)).view(np.complex128)[:, 0] / np.sqrt(2.0)
        if normalize:
            x *= np.sqrt(n) / np.linalg.norm(x)
        return x
    k = round(model.sparsity * n)
    if k < 1:
        raise ValueError(
            f"sparsity {model.sparsity} leaves no nonzero entry at n={n}"
        )
    x = np.zeros(n, dtype=np.complex128)
    x[rng.choice(n, size=k, replace=False)] = np.sqrt(n / k) if normalize else 1.0
    return x


def gen_matrix(m, n, rng):
    """iid CN(0, 1/m) entries: real and imaginary parts each N(0, 1/(2m))."""
    a = rng.standard_normal((m, 2 * n)).view(np.complex128)
    a *= np.sqrt(0.5 / m)
    return a


def gen_instance(model, n, delta, sigma_w2, seed, noise_model="real"):
    """Draw a full instance with m = round(delta * n) measurements.

    The seed is split into independent streams for the signal, the matrix and
    the noise, so the signal equals ``gen_signal(model, n, child_seed)``.
    The stored ``delta`` is m / n, not the requested ratio.
    """
    n = _check_n(n)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not sigma_w2 >= 0:
        raise ValueError(f"sigma_w2 must be nonnegative, got {sigma_w2}")
    if noise_model not in NOISE_MODELS:
        raise ValueError(f"noise_model must be one of {NOISE_MODELS}")
    m = round(delta * n)
    if m < 1:
        raise ValueError(f"delta*n rounds to m={m}")

    ss_signal, ss_matrix, ss_noise = np.random.SeedSequence(seed).spawn(3)
    x = gen_signal(model, n, ss_signal)
    a = gen_matrix(m, n, np.random.default_rng(ss_matrix))
    rng = np.random.default_rng(ss_noise)
    z = np.abs(a @ x)
    if noise_model == "real":
        w = np.sqrt(sigma_w2) * rng.standard_normal(m)
        y = z + w
    else:
        w = np.sqrt(sigma_w2 / 2.0) * rng.standard_normal((m, 2)).view(np.complex128)[:, 0]
        y = np.abs(z + w)
    return ProblemInstance(
        n=n,
        m=m,
        delta=m / n,
        sigma_w2=float(sigma_w2),
        signal=_readonly(x),
        matrix=_readonly(a),
        noise=_readonly(w),
        observations=_readonly(y),
        noise_model=noise_model,
        seed=seed,
    )


def snr(instance):
    """||A x||^2 / (m * sigma_w2); ``math.inf`` in the noiseless case."""
    if instance.sigma_w2 == 0:
        return math.inf
    ax = instance.forward(instance.signal)
    return float(np.vdot(ax, ax).real) / (instance.m * instance.sigma_w2)


def _flat(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.ascontiguousarray(a).view(np.float64).ravel().tolist()
    return a.astype(np.float64).ravel().tolist()


def _unflat(values, shape, complex_):
    a = np.asarray(values, dtype=np.float64)
    if complex_:
        return a.view(np.complex128).reshape(shape)
    return a.reshape(shape)


def dump_instance(instance, fp):
    """Write an instance as JSON; complex arrays become interleaved (re, im)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": instance.n,
        "m": instance.m,
        "delta": instance.delta,
        "sigma_w2": instance.sigma_w2,
        "noise_model": instance.noise_model,
        "seed": instance.seed,
        "signal": _flat(instance.signal),
        "matrix": _flat(instance.matrix),
        "noise": _flat(instance.noise),
        "observations": _flat(instance.observations),
    }
    json.dump(doc, fp)


def load_instance(fp):
    doc = json.load(fp)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported instance schema {doc.get('schema_version')}")
    n, m = doc["n"], doc["m"]
    return ProblemInstance(
        n=n,
        m=m,
        delta=doc["delta"],
        sigma_w2=doc["sigma_w2"],
        signal=_readonly(_unflat(doc["signal"], (n,), True)),
        matrix=_readonly(_unflat(doc["matrix"], (m, n), True)),
        noise=_readonly(_unflat(doc["noise"], (m,), doc["noise_model"] == "complex")),
        observations=_readonly(_unflat(doc["observations"], (m,), False)),
        noise_model=doc["noise_model"],
        seed=doc["seed"],
    )
