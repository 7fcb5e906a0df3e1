"""End-to-end fitting and the simulation harness."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import ortho_group

from . import rng as rngmod
from .errors import ConfigError, HomLCError, InputError, NumericError
from .evaluation import Model, Truth, body_error, dx2, hellinger_sq_mc
from .geometry import DEFAULT_MC_BUDGET, Ball, Box, ConvexBody, LinearImage, body_from_dict
from .io import BODY_SCHEMA, validate, write_csv
from .projection import fit_radii
from .sampling import GeneratorFamily
from .shape import default_hull_params, estimate_hull, estimate_scatter, scatter

BODY_MODES = ("known", "scatter", "hull")
CENTER_MODES = ("known", "sample_mean", "zero")

FIT_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["body_mode"],
    "additionalProperties": False,
    "properties": {
        "body_mode": {"enum": list(BODY_MODES)},
        "body": {"$ref": "#/$defs/body"},
        "center_mode": {"enum": list(CENTER_MODES)},
        "center": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "hull_k": {"type": "integer", "minimum": 1},
        "hull_M": {"type": "integer", "minimum": 1},
        "whiten": {"type": "boolean"},
        "split": {"type": "boolean"},
        "mc_budget": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
    "$defs": BODY_SCHEMA["$defs"],
}


@dataclass
class FitConfig:
    """How to estimate the centre and the body before the radial fit.

    ``split`` uses the second half of the rows for the centre and body and
    the first half for the radial fit; without it, scatter mode uses every
    row for everything and hull mode takes its directions from the last
    ``M`` rows.
    """

    body_mode: str = "known"
    body: Optional[ConvexBody] = None
    center_mode: str = "sample_mean"
    center: Optional[np.ndarray] = None
    hull_k: Optional[int] = None
    hull_M: Optional[int] = None
    whiten: bool = False
    split: bool = False
    mc_budget: int = DEFAULT_MC_BUDGET
    seed: int = 0

    def __post_init__(self):
        if self.body_mode not in BODY_MODES:
            raise ConfigError(f"body_mode must be one of {BODY_MODES}")
        if self.center_mode not in CENTER_MODES:
            raise ConfigError(f"center_mode must be one of {CENTER_MODES}")
        if self.body_mode in ("known", "scatter") and self.body is None:
            raise ConfigError(f"{self.body_mode} mode needs a body")
        if self.center_mode == "known":
            if self.center is None:
                raise ConfigError("center_mode 'known' needs a center")
            self.center = np.asarray(self.center, dtype=float)
        if int(self.mc_budget) < 1:
            raise ConfigError("mc_budget must be positive")

    @classmethod
    def from_dict(cls, d):
        validate(d, FIT_CONFIG_SCHEMA, error=_config_error)
        kw = dict(d)
        if "body" in kw:
            kw["body"] = body_from_dict(kw["body"])
        return cls(**kw)


def _config_error(message, pointer=""):
    return ConfigError(f"{message} (at {pointer})" if pointer else message)


def _with_mode(err: HomLCError, mode):
    err.args = (f"[{mode} mode] {err.args[0] if err.args else ''}",) + tuple(err.args[1:])
    return err


def hull_layout(rows, p, k=None, M=None, split=False):
    """Row counts ``(n, M, k)`` for hull mode.

    Without overrides ``n`` is the largest size with ``n + M(n) <= rows``
    (``2n + M(n)`` with ``split``) where ``M(n) = ceil(n^((p-1)/(p+1)))``.
    """
    factor = 2 if split else 1
    if M is not None:
        n = (rows - M) // factor
    else:
        n = rows // factor
        while n >= 1 and factor * n + default_hull_params(n, p)[1] > rows:
            n -= 1
        if n >= 1:
            M = default_hull_params(n, p)[1]
    if n is None or n < 1 or M is None:
        raise ConfigError(f"hull mode needs more rows than {rows} for p={p}")
    if k is None:
        k = default_hull_params(n, p)[0]
    if k > M:
        raise ConfigError(f"hull k={k} exceeds the number of directions M={M}")
    return n, M, k


def _center(config, X, default):
    if config.center_mode == "zero":
        return np.zeros(X.shape[1])
    if config.center_mode == "known":
        if config.center.shape != (X.shape[1],):
            raise ConfigError(f"center must have length {X.shape[1]}")
        return config.center
    return default if default is not None else X.mean(axis=0)


def fit(config: FitConfig, data) -> Model:
    """Estimate centre and body, then fit the radial generator by maximum likelihood."""
    X = np.array(data, dtype=float, ndmin=2)
    if X.size == 0 or not np.all(np.isfinite(X)):
        raise InputError("data must be a non-empty finite matrix")
    rows, p = X.shape
    mode = config.body_mode
    meta = {"seed": int(config.seed), "mode": mode}
    try:
        if mode in ("known", "scatter"):
            if config.body.p != p:
                raise ConfigError(f"body has p={config.body.p} but data has {p} columns")
            if config.split:
                half = rows // 2
                if half < 1:
                    raise ConfigError("split needs at least two rows")
                fit_rows, est_rows = X[:half], X[half:]
            else:
                fit_rows = est_rows = X
            if mode == "known":
                body = config.body
                mu = _center(config, est_rows, None)
            else:
                est, body = estimate_scatter(est_rows, config.body)
                mu = _center(config, est_rows, est.mean)
        else:
            n, M, k = hull_layout(rows, p, config.hull_k, config.hull_M, config.split)
            fit_rows = X[:n]
            stat_rows = X[n:2 * n] if config.split else fit_rows
            dir_rows = X[rows - M:]
            meta.update({"n": int(n), "M": int(M), "k": int(k)})
            if config.whiten:
                est = scatter(stat_rows)
                mu = _center(config, stat_rows, est.mean)
                S = (stat_rows - mu) @ est.inv_sqrt_cov.T
                D = (dir_rows - mu) @ est.inv_sqrt_cov.T
                body = LinearImage(est.sqrt_cov, estimate_hull(S, D, k))
            else:
                mu = _center(config, stat_rows, None)
                body = estimate_hull(stat_rows - mu, dir_rows - mu, k)
        lv, lv_se = body.log_volume(config.mc_budget,
                                    rngmod.derived_seed(config.seed, rngmod.VOLUME))
        radii = body.minkowski(fit_rows - mu)
        gen = fit_radii(radii, p, lv)
    except NumericError as e:
        raise _with_mode(e, mode)
    meta["n_fit"] = int(fit_rows.shape[0])
    return Model(body, mu, gen, lv, lv_se, meta)


# ---------------------------------------------------------------------------
# simulation harness
# ---------------------------------------------------------------------------

SIM_COLUMNS = ("p", "n", "family", "mode", "rep", "seed", "dx2", "hell2", "hell2_se",
               "body_err", "time_ms", "error")
METRICS = ("dx2", "hell2", "body_err")

SIM_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["p", "n", "family", "mode"],
    "additionalProperties": False,
    "properties": {
        "p": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "n": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "family": {"type": "array", "items": {"enum": ["gauss", "unif", "exp"]}, "minItems": 1},
        "mode": {"type": "array", "items": {"enum": list(BODY_MODES)}, "minItems": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "base_body": {"enum": ["ball", "cube"]},
        "unif_radius": {"type": "number", "exclusiveMinimum": 0},
        "n_mc": {"type": "integer", "minimum": 2},
        "n_dirs": {"type": "integer", "minimum": 1},
        "mc_budget": {"type": "integer", "minimum": 1},
        "metrics": {"type": "array", "items": {"enum": list(METRICS)}, "minItems": 1},
        "workers": {"type": "integer", "minimum": 1},
        "timing": {"type": "boolean"},
        "output": {"type": "string"},
    },
}


@dataclass
class SimConfig:
    """Grid of experiments; every combination of the listed values is run.

    ``n`` is the size of the sample used for the radial fit; hull mode draws
    ``M`` extra rows for its directions. ``unif_radius`` defaults to ``p``.
    ``time_ms`` is left blank unless ``timing`` is set, so that reruns give
    identical files.
    """

    p: List[int]
    n: List[int]
    family: List[str]
    mode: List[str]
    replicates: int = 1
    seed: int = 0
    base_body: str = "ball"
    unif_radius: Optional[float] = None
    n_mc: int = 100_000
    n_dirs: int = 2000
    mc_budget: int = DEFAULT_MC_BUDGET
    metrics: List[str] = field(default_factory=lambda: list(METRICS))
    workers: int = 1
    timing: bool = False
    output: Optional[str] = None

    def __post_init__(self):
        validate({k: v for k, v in self.__dict__.items() if v is not None},
                 SIM_CONFIG_SCHEMA, error=_config_error)

    @classmethod
    def from_dict(cls, d):
        validate(d, SIM_CONFIG_SCHEMA, error=_config_error)
        return cls(**d)

    def cells(self):
        return [(p, n, fam, mode) for p in self.p for n in self.n
                for fam in self.family for mode in self.mode]


def scatter_matrix_root(p, rng):
    """``U D^(1/2) U^T`` with Haar-random ``U`` and ``D_jj = 1.2^j``."""
    U = ortho_group.rvs(p, random_state=rng) if p > 1 else np.ones((1, 1))
    d = 1.2 ** np.arange(1, p + 1)
    R = (U * np.sqrt(d)) @ U.T
    return 0.5 * (R + R.T)


def _base_body(kind, p):
    return Ball(p, 1.0) if kind == "ball" else Box.cube(p, 1.0)


def _family(cfg, name, p):
    if name == "unif":
        return GeneratorFamily.unif(cfg.unif_radius if cfg.unif_radius is not None else float(p))
    return GeneratorFamily(name)


def run_replicate(cfg: SimConfig, cell_index, cell, rep):
    """One grid replicate; returns a row dict (errors are captured, not raised)."""
    p, n, fam, mode = cell
    seed = rngmod.derived_seed(cfg.seed, cell_index, rep)
    row = {c: None for c in SIM_COLUMNS}
    row.update({"p": p, "n": n, "family": fam, "mode": mode, "rep": rep, "seed": seed})
    t0 = time.perf_counter()
    try:
        K0 = _base_body(cfg.base_body, p)
        family = _family(cfg, fam, p)
        if mode == "scatter":
            truth_body = LinearImage(scatter_matrix_root(p, rngmod.substream(seed, rngmod.ROTATION)), K0)
        else:
            truth_body = K0
        truth = Truth(family, truth_body, np.zeros(p))
        if mode == "hull":
            M = default_hull_params(n, p)[1]
            X = truth.sample(n + M, rngmod.substream(seed, rngmod.DATA))
            config = FitConfig("hull", center_mode="zero", mc_budget=cfg.mc_budget, seed=seed)
        elif mode == "scatter":
            X = truth.sample(n, rngmod.substream(seed, rngmod.DATA))
            config = FitConfig("scatter", body=K0, center_mode="sample_mean",
                               mc_budget=cfg.mc_budget, seed=seed)
        else:
            X = truth.sample(n, rngmod.substream(seed, rngmod.DATA))
            config = FitConfig("known", body=K0, center_mode="zero", seed=seed)
        if "dx2" in cfg.metrics or "hell2" in cfg.metrics:
            model = fit(config, X)
            if "dx2" in cfg.metrics:
                row["dx2"] = dx2(model, truth, X[: model.meta["n_fit"]]).value
            if "hell2" in cfg.metrics:
                h, se = hellinger_sq_mc(model, truth, cfg.n_mc,
                                        rngmod.substream(seed, rngmod.HELLINGER))
                row["hell2"], row["hell2_se"] = h, se
            est_body = model.body
        elif mode == "hull":
            k = default_hull_params(n, p)[0]
            est_body = estimate_hull(X[:n], X[n:], k)
        elif mode == "scatter":
            est_body = estimate_scatter(X, K0)[1]
        else:
            est_body = K0
        if "body_err" in cfg.metrics and mode != "known":
            row["body_err"] = body_error(est_body, truth_body, cfg.n_dirs,
                                         rngmod.derived_seed(seed, rngmod.BODY_ERROR))
    except HomLCError as e:
        row["error"] = f"{type(e).__name__}: {e}"
    if cfg.timing:
        row["time_ms"] = 1e3 * (time.perf_counter() - t0)
    return row


def simulate(cfg: SimConfig, out_path=None, workers=None):
    """Run every (cell, replicate); rows come back in grid order regardless of threading."""
    tasks = [(ci, cell, rep) for ci, cell in enumerate(cfg.cells())
             for rep in range(cfg.replicates)]
    nw = int(workers or cfg.workers)
    if nw <= 1:
        rows = [run_replicate(cfg, *t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            rows = list(pool.map(lambda t: run_replicate(cfg, *t), tasks))
    path = out_path or cfg.output
    if path:
        write_csv(path, SIM_COLUMNS, [[r[c] for c in SIM_COLUMNS] for r in rows])
    return rows


def median_by(rows, key, metric):
    """Median of ``metric`` grouped by ``key`` (skipping errors and non-finite values)."""
    groups = {}
    for r in rows:
        v = r.get(metric)
        if r.get("error") or v is None or not math.isfinite(v):
            continue
        groups.setdefault(r[key], []).append(v)
    return {k: float(np.median(v)) for k, v in sorted(groups.items())}
