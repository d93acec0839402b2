"""Plain amplitude-flow gradient descent, a stand-in comparison solver.

Minimises f(x) = 1/2 sum_a (y_a - |(Ax)_a|)^2 with the fixed step
eta = step_scale / max|y| along the gradient with respect to
(Re x, Im x), packed as the complex vector A^H (Ax - y * Ax/|Ax|).
"""

import numpy as np

from ..metrics import Outcome, SUCCESS_THRESHOLD, TrialRecord


def loss(instance, x):
    r = instance.observations - np.abs(instance.forward(x))
    return 0.5 * float(r @ r)


def gradient(instance, x):
    z = instance.forward(x)
    mag = np.abs(z)
    phase = np.divide(z, mag, out=np.zeros_like(z), where=mag > 0)
    return instance.adjoint(z - instance.observations * phase)


def amplitude_flow(instance, x0, step_scale=0.2, max_iter=1000, stop_mse=1e-13,
                   success_threshold=SUCCESS_THRESHOLD, seed=0, config_hash=""):
    """Run gradient descent from ``x0``; returns (record, final x, final loss)."""
    eta = step_scale / float(np.max(np.abs(instance.observations)))
    x = np.array(x0, dtype=np.complex128)
    x_star = instance.signal
    record = TrialRecord(seed=seed, config_hash=config_hash)
    mse = record.append(0, x, x_star)
    for t in range(1, max_iter + 1):
        if mse < stop_mse:
            break
        x = x - eta * gradient(instance, x)
        if not np.isfinite(x).all():
            record.outcome = Outcome.DIVERGED
            record.reason = f"non-finite iterate at t={t}"
            return record, x, float("nan")
        mse = record.append(t, x, x_star)
    record.outcome = Outcome.SUCCESS if record.final_mse < success_threshold else Outcome.FAIL
    return record, x, loss(instance, x)
