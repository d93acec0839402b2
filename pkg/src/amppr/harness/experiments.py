"""One function per CLI subcommand.

Each returns ``(tables, summary)`` where ``tables`` is a list of
``(stem, columns, rows, description)`` and ``summary`` a JSON-able dict.
Trials are independent and run through :func:`map_trials`; results are always
ordered by trial index, so outputs do not depend on scheduling.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import ampa, se, spectral
from ..metrics import RECORD_COLUMNS, Outcome
from ..model import SignalModel, gen_instance
from .baseline import amplitude_flow
from .config import trial_seed


def map_trials(fn, tasks, threads=1):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def snr_db_to_sigma_w2(snr_db, delta):
    """SNR = E||Ax||^2 / E||w||^2 = n / (m sigma_w2) = 1 / (delta sigma_w2)."""
    return 1.0 / (delta * 10.0 ** (snr_db / 10.0))


# ---------------------------------------------------------------------------
# per-trial workers (module-level so they can be pickled)


def make_init(instance, kind, seed):
    """(x0, p0 or None, predicted (alpha0_sq, sigma2_0) or None)."""
    n = instance.n
    if kind in ("decoupled_spectral", "blind_spectral"):
        tau = None if kind == "decoupled_spectral" else 0.0
        si = spectral.decoupled_init(instance, tau=tau)
        p0 = si.p0 if kind == "decoupled_spectral" else None
        return si.x0, p0, (si.predicted_alpha0_sq, si.predicted_sigma2_0)
    if kind == "ones":
        return np.ones(n, dtype=np.complex128), None, None
    if kind == "truth":
        return np.array(instance.signal), None, None
    if kind == "random":
        rng = np.random.default_rng([seed, 1])
        x0 = rng.standard_normal((n, 2)).view(np.complex128)[:, 0]
        return x0 * (math.sqrt(n) / np.linalg.norm(x0)), None, None
    raise ValueError(f"unknown init {kind!r}")


def _instance(task):
    model = SignalModel(task["signal"], task.get("sparsity", 0.1))
    return gen_instance(
        model, task["n"], task["delta"], task.get("sigma_w2", 0.0), task["seed"],
        noise_model=task.get("noise_model", "real"),
    )


def run_amp_trial(task):
    inst = _instance(task)
    x0, p0, pred = make_init(inst, task["init"], task["seed"])
    cfg = ampa.AmpConfig(
        variant=task.get("variant", "simplified"), mu=task.get("mu", 0.0),
        epsilon=task.get("eps", 0.0), max_iter=task["max_iter"],
        stop_mse=task.get("stop_mse", 1e-13),
        success_threshold=task.get("threshold", 1e-10),
    )
    res = ampa.run(inst, x0, p0, cfg, seed=task["seed"], config_hash=task.get("config_hash", ""))
    rec = res.record
    out = {
        "index": task["index"], "seed": task["seed"], "delta": task["delta"],
        "m_over_n": inst.delta, "outcome": rec.outcome.value, "reason": rec.reason,
        "final_mse": rec.final_mse, "iterations": rec.rows[-1][0], "prediction": pred,
    }
    if task.get("keep_rows"):
        out["rows"] = rec.rows
    return out


def run_baseline_trial(task):
    inst = _instance(task)
    x0, _, _ = make_init(inst, task["init"], task["seed"])
    rec, _, final_loss = amplitude_flow(
        inst, x0, step_scale=task["step_scale"], max_iter=task["max_iter"],
        success_threshold=task["threshold"], seed=task["seed"],
        config_hash=task.get("config_hash", ""),
    )
    return {
        "index": task["index"], "seed": task["seed"], "delta": task["delta"],
        "m_over_n": inst.delta, "outcome": rec.outcome.value, "reason": rec.reason,
        "final_mse": rec.final_mse,
        "iterations": rec.rows[-1][0], "final_loss": final_loss,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_se_run(cfg, ctx):
    init = se.SePoint(cfg["alpha0"], cfg["sigma2_0"])
    res = se.se_run(init, cfg["delta"], cfg["sigma_w2"], se.SeConfig(max_iter=cfg["max_iter"]))
    rows = [(t, abs(p.alpha), p.sigma2, p.amse) for t, p in enumerate(res.points)]
    cols = [
        ("t", "int", "SE iteration"),
        ("abs_alpha", "float", "|alpha_t|"),
        ("sigma2", "float", "sigma_t^2"),
        ("amse", "float", "(1 - |alpha_t|)^2 + sigma_t^2"),
    ]
    summary = {
        "outcome": res.outcome.value, "iterations": res.iterations,
        "final_amse": res.final.amse, "thresholds": list(se.thresholds()),
    }
    return [("se_trajectory", cols, rows, "SE trajectory")], summary


def cmd_basin(cfg, ctx):
    rows, counts, grids = [], {}, []
    conf = se.SeConfig(max_iter=cfg["max_iter"])
    for d in cfg["deltas"]:
        g, alphas, sigmas = se.basin_grid(d, tuple(cfg["grid"]), conf)
        grids.append((d, g))
        counts[str(d)] = int(g.sum())
        for i, a in enumerate(alphas):
            for j, s in enumerate(sigmas):
                rows.append((d, a, s, bool(g[i, j])))
    # nesting check: smaller delta => smaller basin
    ordered = sorted(grids, key=lambda p: p[0])
    nested = all(
        not np.any(lo & ~hi) for (_, lo), (_, hi) in zip(ordered[:-1], ordered[1:])
    )
    cols = [
        ("delta", "float", "oversampling ratio"),
        ("alpha0", "float", "initial alpha"),
        ("sigma2_0", "float", "initial sigma^2"),
        ("converged", "bool", "SE reaches (1, 0)"),
    ]
    summary = {"converged_cells": counts, "nested": nested,
               "alpha0_zero_all_false": all(not g[0].any() for _, g in grids)}
    return [("basin", cols, rows, "SE basin of attraction of (1, 0)")], summary


def _amp_tasks(cfg, ctx, n_trials, **extra):
    base = {k: cfg[k] for k in ("n", "signal", "sparsity", "max_iter", "init") if k in cfg}
    base.update(config_hash=ctx["config_hash"])
    base.update(extra)
    return [
        dict(base, index=i, seed=trial_seed(cfg["seed"], i)) for i in range(n_trials)
    ]


def _pad(rows, length):
    # Trials that stop early hold their last value.
    rows = list(rows)
    while len(rows) < length:
        last = rows[-1]
        rows.append((last[0] + 1,) + tuple(last[1:]))
    return rows


def cmd_sim(cfg, ctx):
    tasks = _amp_tasks(
        cfg, ctx, cfg["trials"], delta=cfg["delta"], sigma_w2=cfg["sigma_w2"],
        variant=cfg["variant"], mu=cfg["mu"], eps=cfg["eps"], stop_mse=cfg["stop_mse"],
        noise_model=cfg["noise_model"], keep_rows=True,
    )
    results = sorted(map_trials(run_amp_trial, tasks, ctx["threads"]), key=lambda r: r["index"])
    length = cfg["max_iter"] + 1
    trial_rows, stacks = [], []
    for r in results:
        for row in r["rows"]:
            trial_rows.append((r["seed"],) + tuple(row))
        stacks.append(np.array(_pad(r["rows"], length))[:length])
    stack = np.stack(stacks)
    mean = stack.mean(axis=0)

    delta = results[0]["m_over_n"]
    if results[0]["prediction"] is not None:
        a2, s2 = results[0]["prediction"]
        init = se.SePoint(math.sqrt(a2), s2)
        source = "finding1"
    else:
        init = se.SePoint(float(mean[0, 1]), float(mean[0, 2]))
        source = "measured_t0"
    pts = se.se_trajectory(init, delta, cfg["sigma_w2"], cfg["max_iter"])
    mean_rows = [
        (int(t), mean[t, 1], mean[t, 2], mean[t, 3], abs(p.alpha), p.sigma2, p.amse)
        for t, p in enumerate(pts)
    ]
    cols_trials = [(c, "int" if c in ("seed", "t") else "float", "") for c in RECORD_COLUMNS]
    cols_mean = [
        ("t", "int", "iteration"),
        ("abs_alpha_hat", "float", "mean over trials of |alpha_hat_t|"),
        ("sigma2_hat", "float", "mean over trials of sigma2_hat_t"),
        ("mse", "float", "mean phase-aligned mse"),
        ("se_abs_alpha", "float", "SE |alpha_t|"),
        ("se_sigma2", "float", "SE sigma_t^2"),
        ("se_amse", "float", "SE AMSE"),
    ]
    summary = {
        "outcomes": [r["outcome"] for r in results],
        "reasons": [r["reason"] for r in results],
        "se_init": {"alpha0": abs(init.alpha), "sigma2_0": init.sigma2, "source": source},
        "padding": "trials that stop early hold their final values",
    }
    tables = [
        ("trials", cols_trials, trial_rows, "per-trial, per-iteration metrics"),
        ("mean_vs_se", cols_mean, mean_rows, "trial means against SE prediction"),
    ]
    return tables, summary


def _rate_rows(results, solver):
    by_delta = {}
    for r in results:
        by_delta.setdefault(r["delta"], []).append(r)
    rows = []
    for d in sorted(by_delta):
        rs = by_delta[d]
        k = sum(r["outcome"] == Outcome.SUCCESS.value for r in rs)
        rows.append((solver, d, len(rs), k, k / len(rs)))
    return rows


_RATE_COLS = [
    ("solver", "str", "ampa or baseline"),
    ("delta", "float", "m / n"),
    ("trials", "int", "number of trials"),
    ("successes", "int", "trials with final mse below threshold"),
    ("success_rate", "float", "successes / trials"),
]

_TRIAL_COLS = [
    ("solver", "str", ""), ("delta", "float", ""), ("trial", "int", ""), ("seed", "int", ""),
    ("outcome", "str", ""), ("final_mse", "float", ""), ("iterations", "int", ""),
]


def _trial_rows(results, solver):
    return [
        (solver, r["delta"], r["index"], r["seed"], r["outcome"], r["final_mse"], r["iterations"])
        for r in results
    ]


def _sweep(cfg, ctx, worker, solver, **extra):
    tasks = []
    for di, d in enumerate(cfg["deltas"]):
        for t in _amp_tasks(cfg, ctx, cfg["trials"], delta=d, threshold=cfg["threshold"], **extra):
            t["index"] = di * cfg["trials"] + t["index"]
            tasks.append(t)
    results = sorted(map_trials(worker, tasks, ctx["threads"]), key=lambda r: r["index"])
    for r in results:
        r["index"] %= cfg["trials"]
    return results


def cmd_phase_transition(cfg, ctx):
    results = _sweep(cfg, ctx, run_amp_trial, "ampa")
    rows = _rate_rows(results, "ampa")
    trows = _trial_rows(results, "ampa")
    if cfg["include_baseline"]:
        b = _sweep(cfg, ctx, run_baseline_trial, "baseline", step_scale=0.2)
        rows += _rate_rows(b, "baseline")
        trows += _trial_rows(b, "baseline")
    tables = [
        ("success_rate", _RATE_COLS, rows, "success rate per delta"),
        ("trial_outcomes", _TRIAL_COLS, trows, "per-trial outcomes"),
    ]
    return tables, {"crossing": _crossing([(r[1], r[4]) for r in rows if r[0] == "ampa"])}


def _crossing(points, level=0.5):
    # Linear interpolation of the first upward crossing of ``level``.
    for (d0, s0), (d1, s1) in zip(points[:-1], points[1:]):
        if s0 < level <= s1:
            return d0 + (level - s0) * (d1 - d0) / (s1 - s0)
    return None


def cmd_noise_curve(cfg, ctx):
    delta = cfg["delta"]
    rows = []
    for k, snr in enumerate(cfg["snr_db"]):
        s2w = snr_db_to_sigma_w2(snr, delta)
        tasks = _amp_tasks(
            dict(cfg, init="decoupled_spectral", signal="complex_gaussian"), ctx, cfg["trials"],
            delta=delta, sigma_w2=s2w, stop_mse=0.0, noise_model=cfg["noise_model"],
        )
        results = sorted(map_trials(run_amp_trial, tasks, ctx["threads"]), key=lambda r: r["index"])
        mses = np.array([r["final_mse"] for r in results])
        m = results[0]["m_over_n"]
        a2, s2 = spectral.predict_finding1(m, s2w, cfg["noise_model"])
        pts = se.se_trajectory(se.SePoint(math.sqrt(a2), s2), m, s2w, cfg["max_iter"])
        se_amse = pts[-1].amse
        rows.append((
            snr, s2w, float(mses.mean()), float(mses.std()), 10 * math.log10(mses.mean()),
            se_amse, 10 * math.log10(se_amse), se_amse / s2w,
        ))
    cols = [
        ("snr_db", "float", "SNR in dB, SNR = 1/(delta sigma_w2)"),
        ("sigma_w2", "float", "noise variance"),
        ("mse_mean", "float", "mean final phase-aligned mse over trials"),
        ("mse_std", "float", "std of final mse over trials"),
        ("mse_db", "float", "10 log10 mse_mean"),
        ("se_amse", "float", "SE AMSE after max_iter iterations"),
        ("se_db", "float", "10 log10 se_amse"),
        ("se_amse_over_sigma_w2", "float", "SE AMSE / sigma_w2"),
    ]
    summary = {"closed_form_slope": 4.0 / (1.0 - 2.0 / delta), "snr_unit": "dB"}
    return [("noise_curve", cols, rows, "MSE against SNR")], summary


def cmd_baseline(cfg, ctx):
    results = _sweep(cfg, ctx, run_baseline_trial, "baseline", step_scale=cfg["step_scale"])
    rows = _rate_rows(results, "baseline")
    tables = [
        ("success_rate", _RATE_COLS, rows, "baseline success rate per delta"),
        ("trial_outcomes", _TRIAL_COLS, _trial_rows(results, "baseline"), "per-trial outcomes"),
    ]
    losses = [r["final_loss"] for r in results]
    return tables, {"step": f"{cfg['step_scale']} / max|y|", "final_losses": losses}


def load_achievability(path):
    """Read externally computed (delta, alpha0_sq) pairs; returns a list of pairs."""
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        return [(float(r["delta"]), float(r["alpha0_sq"])) for r in rd]


def cmd_spectral_predict(cfg, ctx):
    rows = []
    for d in cfg["deltas"]:
        tau, tau_star = spectral.solve_tau(d, cfg["sigma_w2"], cfg["noise_model"])
        a2, s2 = spectral.predict_finding1(d, cfg["sigma_w2"], cfg["noise_model"])
        rows.append((d, cfg["sigma_w2"], tau, tau_star, a2, s2))
    cols = [
        ("delta", "float", "m / n"),
        ("sigma_w2", "float", "noise variance"),
        ("tau", "float", "root of phi_1 = 1/delta"),
        ("tau_star", "float", "root of phi_2 = 1/delta (1/2 on the boundary)"),
        ("alpha0_sq", "float", "predicted |alpha_0|^2"),
        ("sigma2_0", "float", "predicted sigma_0^2"),
    ]
    summary = {}
    if cfg["achievability_csv"]:
        summary["achievability"] = load_achievability(cfg["achievability_csv"])
    return [("spectral_predict", cols, rows, "decoupled spectral predictions")], summary


COMMANDS = {
    "se-run": cmd_se_run,
    "basin": cmd_basin,
    "sim": cmd_sim,
    "phase-transition": cmd_phase_transition,
    "noise-curve": cmd_noise_curve,
    "baseline": cmd_baseline,
    "spectral-predict": cmd_spectral_predict,
}
