"""Alignment and error metrics for estimates that are defined up to a global phase."""

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SUCCESS_THRESHOLD = 1e-10

RECORD_COLUMNS = ("seed", "t", "abs_alpha_hat", "sigma2_hat", "mse", "div_value", "mse_n")


class Outcome(str, Enum):
    SUCCESS = "success"
    FAIL = "fail"
    DIVERGED = "diverged"


def _check_pair(x, x_star):
    x = np.asarray(x)
    x_star = np.asarray(x_star)
    if x.shape != x_star.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_star.shape}")
    nrm2 = float(np.vdot(x_star, x_star).real)
    if nrm2 == 0:
        raise ValueError("reference signal has zero norm")
    return x, x_star, nrm2


def alignment(x, x_star):
    """Return (alpha_hat, sigma2_hat) for the decomposition x = alpha x* + e.

    alpha_hat = x*^H x / ||x*||^2 and sigma2_hat = ||x - alpha_hat x*||^2 / ||x*||^2.
    """
    x, x_star, nrm2 = _check_pair(x, x_star)
    alpha = complex(np.vdot(x_star, x)) / nrm2
    r = x - alpha * x_star
    return alpha, float(np.vdot(r, r).real) / nrm2


def _mse_terms(x, x_star):
    # One pass for the per-iteration record: alpha, sigma2, phase-aligned mse.
    x, x_star, nrm2 = _check_pair(x, x_star)
    c = complex(np.vdot(x_star, x))
    alpha = c / nrm2
    r = x - alpha * x_star
    sigma2 = float(np.vdot(r, r).real) / nrm2
    # ||x - e^{i theta} x*||^2 = ||r||^2 + (|alpha| - 1)^2 ||x*||^2 since r is
    # orthogonal to x*; this keeps full relative precision near convergence.
    mse = sigma2 + (abs(alpha) - 1.0) ** 2
    return alpha, sigma2, mse, nrm2


def phase_aligned_mse(x, x_star):
    """min over theta of ||x - e^{i theta} x*||^2 / ||x*||^2, and the minimiser.

    The minimiser is the angle of x*^H x. When that inner product vanishes
    every theta is optimal and theta = 0 is returned.
    """
    x, x_star, nrm2 = _check_pair(x, x_star)
    c = complex(np.vdot(x_star, x))
    theta = float(np.angle(c)) if c != 0 else 0.0
    # Explicit residual; the expanded form ||x||^2 + ||x*||^2 - 2|c| cancels
    # down to ~1e-16 and cannot resolve converged runs.
    r = x - np.exp(1j * theta) * x_star
    return float(np.vdot(r, r).real) / nrm2, theta


@dataclass
class TrialRecord:
    """Per-iteration metrics of one solver run.

    ``rows`` holds tuples (t, abs_alpha_hat, sigma2_hat, mse, div_value, mse_n).
    ``mse`` is normalised by ||x*||^2 and ``mse_n`` by n.
    """

    seed: int
    config_hash: str = ""
    rows: list = field(default_factory=list)
    outcome: Outcome = Outcome.FAIL
    reason: str = ""

    def append(self, t, x, x_star, div_value=float("nan")):
        if self.rows and t <= self.rows[-1][0]:
            raise ValueError("rows must be strictly increasing in t")
        alpha, sigma2, mse, nrm2 = _mse_terms(x, x_star)
        mse_n = mse * nrm2 / len(x_star)
        self.rows.append((t, abs(alpha), sigma2, mse, float(div_value), mse_n))
        return mse

    @property
    def final_mse(self):
        return self.rows[-1][3] if self.rows else float("inf")

    def column(self, name):
        i = RECORD_COLUMNS.index(name) - 1
        return np.array([r[i] for r in self.rows])


def success(record, threshold=SUCCESS_THRESHOLD):
    """True iff the run did not diverge and its final mse is below ``threshold``."""
    if record.outcome is Outcome.DIVERGED:
        return False
    return record.final_mse < threshold


def fmt(v):
    """Decimal text with 17 significant digits (round-trips doubles)."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for rec in records:
            for row in rec.rows:
                w.writerow([fmt(rec.seed)] + [fmt(v) for v in row])
