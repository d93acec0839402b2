"""Experiment configuration: defaults per command, validation, canonical hashing."""

import hashlib
import json
import math

import numpy as np

SCHEMA_VERSION = 1

INIT_KINDS = ("decoupled_spectral", "blind_spectral", "ones", "truth", "random")


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration (CLI exit code 2)."""


_COMMON = {"seed": 0}

DEFAULTS = {
    "se-run": {
        "delta": 4.0, "alpha0": 0.1, "sigma2_0": 0.99, "sigma_w2": 0.0, "max_iter": 1000,
    },
    "basin": {
        "deltas": [2.45, 2.40, 2.35], "grid": [100, 100], "max_iter": 10_000,
    },
    "sim": {
        "n": 2000, "delta": 4.0, "sigma_w2": 0.0, "trials": 10,
        "init": "decoupled_spectral", "signal": "complex_gaussian", "sparsity": 0.1,
        "variant": "simplified", "mu": 0.0, "eps": 0.0, "max_iter": 20,
        "stop_mse": 1e-13, "noise_model": "real",
    },
    "phase-transition": {
        "n": 1000, "deltas": [2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0], "trials": 100,
        "init": "decoupled_spectral", "signal": "complex_gaussian", "sparsity": 0.1,
        "max_iter": 1000, "threshold": 1e-10, "include_baseline": False,
    },
    "noise-curve": {
        "n": 2000, "delta": 4.0, "snr_db": [15, 20, 25, 30, 35, 40], "trials": 10,
        "max_iter": 100, "noise_model": "real",
    },
    "baseline": {
        "n": 1000, "deltas": [2.5], "trials": 20, "init": "random",
        "signal": "complex_gaussian", "sparsity": 0.1, "max_iter": 1000,
        "threshold": 1e-10, "step_scale": 0.2,
    },
    "spectral-predict": {
        "deltas": [2.5, 3.0, 4.0, 6.0], "sigma_w2": 0.0, "noise_model": "real",
        "achievability_csv": None,
    },
}


def _positive(name, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be a positive number, got {v!r}")


def _count(name, v):
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
        raise ConfigError(f"{name} must be a positive integer, got {v!r}")


def validate(command, cfg):
    if "n" in cfg:
        _count("n", cfg["n"])
    for key in ("trials", "max_iter"):
        if key in cfg:
            _count(key, cfg[key])
    if "delta" in cfg:
        _positive("delta", cfg["delta"])
    for d in cfg.get("deltas", []):
        _positive("deltas[]", d)
    if cfg.get("sigma_w2", 0) < 0:
        raise ConfigError("sigma_w2 must be nonnegative")
    if "init" in cfg and cfg["init"] not in INIT_KINDS:
        raise ConfigError(f"init must be one of {INIT_KINDS}, got {cfg['init']!r}")
    if command == "se-run":
        if not 0 <= cfg["sigma2_0"]:
            raise ConfigError("sigma2_0 must be nonnegative")
        if cfg["alpha0"] == 0 and cfg["sigma2_0"] == 0:
            raise ConfigError("the SE is undefined from (alpha0, sigma2_0) = (0, 0)")
    if command == "basin":
        g = cfg["grid"]
        if not (isinstance(g, list) and len(g) == 2):
            raise ConfigError("grid must be a pair [n_alpha, n_sigma2]")
        for k in g:
            _count("grid[]", k)
    if command in ("phase-transition", "baseline") and "decoupled_spectral" == cfg.get("init"):
        for d in cfg["deltas"]:
            if not d > 2:
                raise ConfigError("decoupled_spectral init needs every delta > 2")
    return cfg


def build(command, file_cfg=None, overrides=None, seed=None):
    """Merge defaults < config file < overrides < --seed and validate."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = dict(_COMMON)
    cfg.update(DEFAULTS[command])
    for src in (file_cfg or {}, overrides or {}):
        for k, v in src.items():
            if k == "schema_version":
                if v != SCHEMA_VERSION:
                    raise ConfigError(f"unsupported config schema_version {v!r}")
                continue
            if k == "command":
                if v != command:
                    raise ConfigError(f"config is for command {v!r}, not {command!r}")
                continue
            if k not in cfg:
                raise ConfigError(f"unknown parameter {k!r} for {command}")
            cfg[k] = v
    if seed is not None:
        cfg["seed"] = seed
    return validate(command, cfg)


def load_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def canonical(command, cfg):
    """Canonical JSON text: sorted keys, no whitespace, schema-versioned."""
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "params": cfg}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(command, cfg):
    return hashlib.sha256(canonical(command, cfg).encode()).hexdigest()[:16]


def trial_seed(master_seed, index):
    """Seed of trial ``index``: a SeedSequence hash of (master_seed, index).

    Any trial can be re-run on its own from this value.
    """
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
