"""Fitted models and the error measures used to score them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, InvariantError
from .geometry import ConvexBody, d_scale_inf_alpha
from .projection import PiecewiseLinearConcave, _segment_moments, eval_log_generator
from .sampling import GeneratorFamily, sample_density

NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Model:
    """Density ``exp(generator(||x - mu||_body))``.

    ``log_volume_se`` is non-zero when the body volume was estimated by Monte
    Carlo; the normalisation check then widens by three standard errors.
    """

    body: ConvexBody
    mu: np.ndarray
    generator: PiecewiseLinearConcave
    log_volume: float
    log_volume_se: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (self.body.p,) or not np.all(np.isfinite(mu)):
            raise InputError(f"mu must be a finite vector of length {self.body.p}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if self.generator.p != self.body.p:
            raise InvariantError("generator dimension differs from body dimension", "/generator/p")
        if self.generator.log_volume != self.log_volume:
            raise InvariantError("generator was fitted for a different log_volume",
                                 "/generator/log_volume")

    @property
    def p(self):
        return self.body.p

    @property
    def mc_volume(self):
        return self.log_volume_se > 0

    def check(self):
        """Shape and normalisation invariants; raises :class:`InvariantError`."""
        self.generator.check_shape()
        mass = self.generator.total_mass()
        tol = NORMALIZATION_TOL + 3.0 * self.log_volume_se
        if not abs(mass - 1.0) <= tol:
            raise InvariantError(f"generator integrates to {mass!r}, not 1 (tolerance {tol:g})",
                                 "/generator/values")
        return self

    def log_density(self, x):
        return log_density(self, x)


@dataclass(frozen=True, eq=False)
class Truth:
    """A known data-generating density used for scoring."""

    family: GeneratorFamily
    body: ConvexBody
    mu: np.ndarray
    log_volume: Optional[float] = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (self.body.p,):
            raise InputError(f"mu must have length {self.body.p}")
        object.__setattr__(self, "mu", mu)
        if self.log_volume is None:
            object.__setattr__(self, "log_volume", self.body.log_volume()[0])

    @property
    def p(self):
        return self.body.p

    def log_density(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        r = self.body.minkowski(X - self.mu)
        out = np.asarray(self.family.log_generator(r, self.p, self.log_volume), dtype=float)
        return float(out[0]) if np.ndim(x) == 1 else out

    def sample(self, n, rng):
        return sample_density(self.family, self.body, self.mu, n, rng)


def log_density(model: Model, x):
    """``log f(x)``; ``-inf`` outside the support. Vectorised over rows."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    r = model.body.minkowski(X - model.mu)
    out = np.atleast_1d(eval_log_generator(model.generator, r))
    return float(out[0]) if np.ndim(x) == 1 else out


@dataclass(frozen=True)
class DX2Result:
    value: float
    out_of_support: int


def dx2(model: Model, truth: Truth, data) -> DX2Result:
    """Average log-likelihood ratio ``log(f_hat / f0)`` over ``data``.

    ``data`` should be drawn from ``truth``. The value is ``-inf`` when some
    point lies outside the model support; the count is reported alongside.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    lm = log_density(model, X)
    l0 = truth.log_density(X)
    out = int(np.sum(np.isneginf(lm)))
    if out:
        return DX2Result(-math.inf, out)
    return DX2Result(float(np.mean(lm - l0)), 0)


def hellinger_sq_mc(model: Model, truth: Truth, n_mc: int, rng):
    """Monte Carlo ``2 - 2 int sqrt(f_hat f0)`` with draws from ``f0``.

    Returns
    -------
    estimate : float
        Clamped to ``[0, 2]``.
    std_error : float
    """
    n_mc = int(n_mc)
    if n_mc < 2:
        raise InputError("n_mc must be at least 2")
    Y = truth.sample(n_mc, rng)
    lm = log_density(model, Y)
    l0 = truth.log_density(Y)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isneginf(lm), 0.0, np.exp(0.5 * (lm - l0)))
    est = 2.0 - 2.0 * float(np.mean(ratio))
    se = 2.0 * float(np.std(ratio, ddof=1)) / math.sqrt(n_mc)
    return min(max(est, 0.0), 2.0), se


def _exp_integral(p, a, b, la, lb):
    """``int_a^b r^(p-1) exp(l)`` with ``l`` linear; vectorised over intervals."""
    return _segment_moments(a, b, la, lb, p - 1, jmax=0)[:, 0]


def hellinger_sq_1d(genA: PiecewiseLinearConcave, genB: PiecewiseLinearConcave, p, log_volume):
    """Exact squared Hellinger distance between two densities on the same body.

    Reduces to ``p vol(K) int r^(p-1) (e^(phi_A/2) - e^(phi_B/2))^2 dr`` and
    integrates in closed form over the merged breakpoint grid. Symmetric in
    its generator arguments.
    """
    for g in (genA, genB):
        if g.p != p or g.log_volume != log_volume:
            raise InputError("both generators must be fitted for the given p and log_volume")
    grid = np.union1d(np.concatenate([[0.0], genA.breakpoints]), genB.breakpoints)
    a, b = grid[:-1], grid[1:]
    mid = 0.5 * (a + b)
    inA = mid <= genA.support_end
    inB = mid <= genB.support_end
    pA = lambda r: np.interp(r, genA.breakpoints, genA.values)
    pB = lambda r: np.interp(r, genB.breakpoints, genB.values)
    fa, fb = pA(a), pA(b)
    ga, gb = pB(a), pB(b)
    both = inA & inB
    total = np.zeros(a.size)
    if np.any(both):
        s = both
        mA = _exp_integral(p, a[s], b[s], fa[s], fb[s])
        mB = _exp_integral(p, a[s], b[s], ga[s], gb[s])
        mX = _exp_integral(p, a[s], b[s], 0.5 * (fa[s] + ga[s]), 0.5 * (fb[s] + gb[s]))
        total[s] = (mA + mB) - 2.0 * mX
    onlyA = inA & ~inB
    if np.any(onlyA):
        total[onlyA] = _exp_integral(p, a[onlyA], b[onlyA], fa[onlyA], fb[onlyA])
    onlyB = inB & ~inA
    if np.any(onlyB):
        total[onlyB] = _exp_integral(p, a[onlyB], b[onlyB], ga[onlyB], gb[onlyB])
    val = p * math.exp(log_volume) * math.fsum(total)
    return min(max(val, 0.0), 2.0)


def body_error(est: ConvexBody, truth: ConvexBody, n_dirs=2000, rng=0) -> float:
    """``inf_alpha d_scale(alpha * est, truth)`` from random directions."""
    seed = int(rng.integers(2 ** 63)) if isinstance(rng, np.random.Generator) else int(rng)
    return d_scale_inf_alpha(est, truth, n_dirs=n_dirs, rng_seed=seed)[1]
