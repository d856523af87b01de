"""Seeded Monte-Carlo sweeps over SNR for the blind and known-mask pipelines.

Trial ``t`` draws its scene from the stream ``(seed, t)`` and its noise from
``(seed, t, snr_index)``, so every trial can be regenerated on its own and the same
scene is reused across the SNR grid (paired comparisons).
"""

import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _csv
from .blind_deconv import SolverConfig
from .blind_ptycho import (
    fix_scale,
    measurement_residual,
    random_blind_scene,
    recover_mask,
    recover_multi_shift,
    recover_specimen_zero_shift,
    relative_error,
    shift_order,
)
from .errors import AliasingError, BlindPtychoError, ConfigError
from .measurement import add_noise, forward_full, forward_subsampled_freq_space, random_scene
from .rng import derive_seed, make_rng
from .wdd import wdd_recover

__all__ = [
    "MODES",
    "ExperimentConfig",
    "validate_config",
    "load_config_file",
    "run_sweep",
    "run_wdd_demo",
    "run_trial",
]

MODES = ("wdd-known-mask", "blind-zero-shift", "blind-multi-shift", "subsampled")
BLIND_MODES = ("blind-zero-shift", "blind-multi-shift")
ESTIMATORS = ("max", "min", "argmin", "noshift")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep settings.  ``kappa`` defaults to ``delta``; ``K``/``L`` apply to ``subsampled``."""

    d: int = 64
    delta: int = 6
    N: int = 4
    kappa: int | None = None
    snr_grid: tuple = (10.0, 20.0, 30.0, 40.0, 50.0)
    trials: int = 100
    iters: int = 1000
    seed: int = 0
    mode: str = "blind-multi-shift"
    out_dir: str = "results"
    K: int | None = None
    L: int | None = None
    workers: int = 1
    wall_time: bool = False


def _parse_snr(value):
    if isinstance(value, str):
        parts = [p.strip() for p in value.replace(";", ",").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def _coerce(cfg):
    """Convert string-valued fields (from config files / flags) to their types."""
    problems = []
    out = {}
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        try:
            if f.name == "snr_grid":
                value = _parse_snr(value)
            elif f.name in ("mode", "out_dir"):
                value = str(value)
            elif f.name == "wall_time":
                if isinstance(value, str):
                    value = value.strip().lower() in ("1", "true", "yes", "on")
                value = bool(value)
            elif value is not None and value != "":
                as_float = float(value)
                if as_float != int(as_float):
                    raise ValueError(f"{value!r} is not an integer")
                value = int(as_float)
            else:
                value = None
        except (TypeError, ValueError) as exc:
            problems.append(f"{f.name}: cannot parse {value!r} ({exc})")
        out[f.name] = value
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**out)


def validate_config(cfg):
    """Return a normalized copy of ``cfg`` or raise :class:`ConfigError` naming every problem."""
    cfg = _coerce(cfg)
    p = []
    for name in ("d", "delta", "N", "iters", "workers"):
        if getattr(cfg, name) is None or getattr(cfg, name) < 1:
            p.append(f"{name} must be a positive integer")
    if cfg.trials is None or cfg.trials < 0:
        p.append("trials must be a non-negative integer")
    if cfg.seed is None or cfg.seed < 0:
        p.append("seed must be a non-negative integer")
    if cfg.mode not in MODES:
        p.append(f"mode must be one of {', '.join(MODES)}")
    if not cfg.snr_grid:
        p.append("snr_grid must not be empty")
    for s in cfg.snr_grid:
        if math.isnan(s) or s == -math.inf:
            p.append(f"snr_grid entry {s} is not a finite dB value or +inf")
    if len(set(cfg.snr_grid)) != len(cfg.snr_grid):
        p.append("snr_grid contains duplicate values")
    if not cfg.out_dir:
        p.append("out_dir must be given")
    d, delta = cfg.d or 0, cfg.delta or 0
    if d >= 1 and delta >= 1:
        if delta > d:
            p.append(f"delta={delta} exceeds d={d}")
        elif 2 * delta - 1 > d:
            p.append(f"2*delta-1={2 * delta - 1} shifts do not fit in d={d}")
    kappa = delta if cfg.kappa is None else cfg.kappa
    if kappa < 1:
        p.append("kappa must be a positive integer")
    elif delta >= 1 and kappa > delta:
        p.append(f"kappa={kappa} exceeds delta={delta}")
    if cfg.mode in BLIND_MODES and cfg.N is not None and d >= 1 and cfg.N > d // 4:
        p.append(f"N={cfg.N} exceeds d/4={d // 4}")
    K = cfg.K if cfg.K is not None else (d // 2 if cfg.mode == "subsampled" else d)
    L = cfg.L if cfg.L is not None else d
    if cfg.mode in ("subsampled", "wdd-known-mask") and d >= 1:
        for name, value in (("K", K), ("L", L)):
            if value < 1 or d % value:
                p.append(f"{name}={value} must be a positive divisor of d={d}")
    if p:
        raise ConfigError(p)
    return replace(cfg, kappa=kappa, K=K, L=L)


def load_config_file(path):
    """``key=value`` lines (``#`` comments) into a dict of strings."""
    values = {}
    names = {f.name for f in fields(ExperimentConfig)}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in names:
                raise ConfigError(f"{path}:{lineno}: unrecognized line {raw.strip()!r}")
            values[key] = value.strip()
    return values


def _estimator_rows(est, scene):
    ex = [relative_error(v, scene.x) if v is not None else math.inf for v in est.x_est]
    em = [relative_error(v, scene.m) if v is not None else math.inf for v in est.m_est]
    ci, cj = est.chosen
    rows = []
    for target, errs in (("x", ex), ("m", em)):
        alive = [i for i, e in enumerate(errs) if math.isfinite(e)]
        picks = {
            "max": max(alive, key=lambda i: (errs[i], -i)),
            "min": min(alive, key=lambda i: (errs[i], i)),
            "argmin": ci if target == "x" else cj,
            "noshift": 0,
        }
        for name in ESTIMATORS:
            idx = picks[name]
            pair = (idx, cj) if target == "x" else (ci, idx)
            if name == "noshift":
                pair = (0, 0)
            rows.append((f"{name}-{target}", idx, errs[idx], float(est.residuals[pair])))
    return rows


def run_trial(cfg, trial):
    """All records for one trial across the SNR grid (list of tuples, TrialRecord order)."""
    tseed = derive_seed(cfg.seed, trial)
    solver = SolverConfig(max_iters=cfg.iters, record_history=False)
    scene = random_blind_scene(cfg.d, cfg.delta, cfg.N, make_rng(cfg.seed, trial))
    clean = forward_full(scene.scene())
    records = []
    for si, snr in enumerate(cfg.snr_grid):
        start = time.perf_counter()
        meas = add_noise(clean, snr, derive_seed(cfg.seed, trial, si))
        try:
            if cfg.mode == "blind-multi-shift":
                est = recover_multi_shift(meas, scene.C, cfg.delta, scene.m_norm, solver)
                body = _estimator_rows(est, scene)
                chosen = est.chosen
            else:
                x0 = recover_specimen_zero_shift(meas, scene.C, cfg.delta, scene.m_norm, solver)
                m0 = recover_mask(meas, x0, cfg.delta)
                x0, m0 = fix_scale(x0, m0, scene.m_norm)
                res = measurement_residual(meas, x0, m0)
                body = [("noshift-x", 0, relative_error(x0, scene.x), res),
                        ("noshift-m", 0, relative_error(m0, scene.m), res)]
                chosen = (0, 0)
        except (BlindPtychoError, np.linalg.LinAlgError):
            body = [("failed", "", None, None)]
            chosen = ("", "")
        elapsed = time.perf_counter() - start
        for estimator, idx, err, res in body:
            row = [trial, tseed, snr, estimator, idx, err, res, chosen[0], chosen[1]]
            if cfg.wall_time:
                row.append(elapsed)
            records.append(tuple(row))
    return records


TRIAL_COLUMNS = ["trial", "seed", "snr_db", "estimator", "index", "error", "residual",
                 "chosen_i", "chosen_j"]


def _prepare_out_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"out_dir {path!r} is not writable: {exc}") from exc


def _meta(cfg):
    meta = asdict(cfg)
    meta["snr_grid"] = " ".join(_csv.fmt(float(s)) for s in cfg.snr_grid)
    meta.pop("out_dir")
    meta.pop("workers")
    return meta


def _map_trials(cfg, fn):
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(fn, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        chunks = [fn(cfg, t) for t in range(cfg.trials)]
    rows = [r for chunk in chunks for r in chunk]
    # single writer, deterministic order: (snr, trial), estimators in emission order
    order = {s: i for i, s in enumerate(sorted(set(cfg.snr_grid)))}
    return sorted(rows, key=lambda r: (order[r[2]], r[0]))


def _summaries(rows, key_cols, err_col):
    groups = {}
    for r in rows:
        if r[err_col] is None:
            continue
        groups.setdefault(tuple(r[c] for c in key_cols), []).append(r[err_col])
    return [(*key, statistics.fmean(v), statistics.median(v), len(v))
            for key, v in groups.items()]


def run_sweep(cfg):
    """Run the configured sweep; returns the output directory.

    Writes ``trials.csv``, ``summary.csv`` and (multi-shift mode) ``histogram.csv``.
    Known-mask modes delegate to :func:`run_wdd_demo`.
    """
    cfg = validate_config(cfg)
    if cfg.mode not in BLIND_MODES:
        return run_wdd_demo(cfg)
    _prepare_out_dir(cfg.out_dir)
    rows = _map_trials(cfg, run_trial)
    columns = TRIAL_COLUMNS + (["wall_time_s"] if cfg.wall_time else [])
    meta = {"kind": "trials", **_meta(cfg)}
    _csv.write_table(os.path.join(cfg.out_dir, "trials.csv"), meta, columns, rows)

    summary = _summaries(rows, (2, 3), 5)
    failures = {}
    for r in rows:
        if r[3] == "failed":
            failures[r[2]] = failures.get(r[2], 0) + 1
    summary += [(snr, "failed", None, None, n) for snr, n in failures.items()]
    _csv.write_table(os.path.join(cfg.out_dir, "summary.csv"), {"kind": "summary", **_meta(cfg)},
                     ["snr_db", "estimator", "mean_error", "median_error", "count"], summary)

    if cfg.mode == "blind-multi-shift":
        shifts = shift_order(cfg.delta)
        hist = []
        for snr in sorted(set(cfg.snr_grid)):
            picked = [(r[7], r[8]) for r in rows if r[2] == snr and r[3] == "argmin-x"]
            for i, k in enumerate(shifts):
                hist.append((snr, i, k, sum(1 for a, _ in picked if a == i),
                             sum(1 for _, b in picked if b == i)))
        _csv.write_table(os.path.join(cfg.out_dir, "histogram.csv"),
                         {"kind": "chosen_index_histogram", **_meta(cfg)},
                         ["snr_db", "index", "shift", "count_x", "count_m"], hist)
    return cfg.out_dir


def _wdd_trial(cfg, trial):
    tseed = derive_seed(cfg.seed, trial)
    scene = random_scene(cfg.d, cfg.delta, make_rng(cfg.seed, trial))
    if cfg.K == cfg.d and cfg.L == cfg.d:
        clean = forward_full(scene)
    else:
        clean = forward_subsampled_freq_space(scene, cfg.K, cfg.L)
    rows = []
    for si, snr in enumerate(cfg.snr_grid):
        meas = add_noise(clean, snr, derive_seed(cfg.seed, trial, si))
        start = time.perf_counter()
        try:
            err = relative_error(wdd_recover(meas, scene.m, kappa=cfg.kappa), scene.x)
            status = "ok"
        except BlindPtychoError as exc:
            err, status = None, type(exc).__name__
        row = [trial, tseed, snr, cfg.K, cfg.L, err, status]
        if cfg.wall_time:
            row.append(time.perf_counter() - start)
        rows.append(tuple(row))
    return rows


def run_wdd_demo(cfg):
    """Known-mask error-vs-SNR table ``wdd.csv`` (plus ``summary.csv``); returns out_dir."""
    cfg = validate_config(cfg)
    if cfg.mode not in ("wdd-known-mask", "subsampled"):
        raise ConfigError(f"run_wdd_demo needs mode wdd-known-mask or subsampled, not {cfg.mode}")
    if cfg.L != cfg.d:
        # fail before any trial: every draw would hit the same aliasing guard
        raise AliasingError(f"L={cfg.L} < d={cfg.d}: shift sub-sampling is not invertible")
    _prepare_out_dir(cfg.out_dir)
    rows = _map_trials(cfg, _wdd_trial)
    columns = ["trial", "seed", "snr_db", "K", "L", "error", "status"]
    columns += ["wall_time_s"] if cfg.wall_time else []
    _csv.write_table(os.path.join(cfg.out_dir, "wdd.csv"), {"kind": "wdd_demo", **_meta(cfg)},
                     columns, rows)
    summary = [(snr, "wdd", *rest) for snr, *rest in _summaries(rows, (2,), 5)]
    _csv.write_table(os.path.join(cfg.out_dir, "summary.csv"), {"kind": "summary", **_meta(cfg)},
                     ["snr_db", "estimator", "mean_error", "median_error", "count"], summary)
    return cfg.out_dir
