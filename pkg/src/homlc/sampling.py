"""Exact simulation from homothetic log-concave densities.

A draw is ``mu + R * Z / ||Z||_K`` with ``Z`` uniform on ``K`` and ``R`` from
the radial density ``h(r) = p vol(K) r^(p-1) exp(phi(r))``, independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import InputError, SamplerError
from .geometry import Ball, Box, ConvexBody, LinearImage, PointHull
from .projection import PiecewiseLinearConcave, _segment_moments, eval_log_generator

MAX_CONSECUTIVE_REJECTIONS = 1_000_000
BISECTION_TOL = 1e-12
FAMILIES = ("gauss", "unif", "exp", "knots")


@dataclass(frozen=True, eq=False)
class GeneratorFamily:
    """Named radial profile.

    ``gauss``: phi(r) = -r^2/2 + c. ``unif``: phi constant on ``[0, radius]``.
    ``exp``: phi(r) = -r + c. ``knots``: a fitted piecewise-linear generator,
    used as is (it is already normalised for its own ``p`` and log-volume).
    """

    kind: str
    radius: float = 1.0
    generator: Optional[PiecewiseLinearConcave] = None

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise InputError(f"unknown family {self.kind!r}; expected one of {FAMILIES}")
        if self.kind == "unif" and not (self.radius > 0 and math.isfinite(self.radius)):
            raise InputError("uniform family needs a positive radius")
        if self.kind == "knots":
            if self.generator is None:
                raise InputError("knots family needs a generator")
            object.__setattr__(self, "_cdf_table", _knot_table(self.generator))

    @classmethod
    def gauss(cls):
        return cls("gauss")

    @classmethod
    def exp(cls):
        return cls("exp")

    @classmethod
    def unif(cls, radius):
        return cls("unif", radius=float(radius))

    @classmethod
    def knots(cls, generator):
        return cls("knots", generator=generator)

    def _check_p(self, p):
        if int(p) != p or p < 1:
            raise InputError("p must be a positive integer")
        if self.kind == "knots" and p != self.generator.p:
            raise InputError(f"knots generator was built for p={self.generator.p}, not {p}")

    def support_end(self):
        if self.kind == "unif":
            return self.radius
        if self.kind == "knots":
            return self.generator.support_end
        return math.inf

    def log_normaliser(self, p):
        """log of ``int_0^inf p r^(p-1) exp(phi(r) - c) dr`` for the unnormalised profile."""
        self._check_p(p)
        if self.kind == "gauss":
            return math.log(p) + (0.5 * p - 1.0) * math.log(2.0) + float(special.gammaln(0.5 * p))
        if self.kind == "exp":
            return float(special.gammaln(p + 1.0))
        if self.kind == "unif":
            return p * math.log(self.radius)
        raise InputError("knots family has no closed-form normaliser")

    def log_generator(self, r, p, log_volume):
        """phi(r) normalised so that ``exp(phi(||x||_K))`` integrates to one."""
        self._check_p(p)
        r = np.asarray(r, dtype=float)
        if self.kind == "knots":
            if abs(log_volume - self.generator.log_volume) > 1e-9 * max(1.0, abs(log_volume)):
                raise InputError("knots generator was normalised for a different body volume")
            return eval_log_generator(self.generator, r)
        c = -(log_volume + self.log_normaliser(p))
        if self.kind == "gauss":
            out = -0.5 * r ** 2 + c
        elif self.kind == "exp":
            out = -r + c
        else:
            out = np.where(r <= self.radius, c, -np.inf)
        return float(out) if out.ndim == 0 else out

    def radial_cdf(self, r, p):
        self._check_p(p)
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        if self.kind == "gauss":
            out = special.gammainc(0.5 * p, 0.5 * r ** 2)
        elif self.kind == "exp":
            out = special.gammainc(p, r)
        elif self.kind == "unif":
            out = np.minimum(r / self.radius, 1.0) ** p
        else:
            out = _knot_cdf(self._cdf_table, r)
        return float(out) if np.ndim(out) == 0 else out

    def radial_mean(self, p):
        self._check_p(p)
        if self.kind == "gauss":
            return math.sqrt(2.0) * math.exp(special.gammaln(0.5 * (p + 1)) - special.gammaln(0.5 * p))
        if self.kind == "exp":
            return float(p)
        if self.kind == "unif":
            return p * self.radius / (p + 1.0)
        return self.generator.radial_mean() / self.generator.total_mass()

    def to_dict(self):
        d = {"family": self.kind}
        if self.kind == "unif":
            d["radius"] = float(self.radius)
        if self.kind == "knots":
            d["generator"] = self.generator.to_dict()
        return d


# ---------------------------------------------------------------------------
# piecewise-linear generator: cumulative masses and inverse CDF
# ---------------------------------------------------------------------------

def _knot_table(gen):
    plateau, seg = gen.segment_masses()
    cum = np.concatenate([[plateau], plateau + np.cumsum(seg)])
    return gen, cum


def _partial_mass(gen, i, r):
    """Unnormalised mass of segment i from its left end to r (vectorised in r)."""
    a, b = gen.breakpoints[i], gen.breakpoints[i + 1]
    va, vb = gen.values[i], gen.values[i + 1]
    out = np.zeros_like(r)
    pos = r > a
    if np.any(pos):
        rr = r[pos]
        vr = va + (vb - va) * (rr - a) / (b - a)
        m = _segment_moments(np.full(rr.shape, a), rr, np.full(rr.shape, va), vr,
                             gen.p - 1, jmax=0)[..., 0]
        out[pos] = gen.p * math.exp(gen.log_volume) * m
    return out


def _knot_cdf(table, r):
    gen, cum = table
    total = cum[-1]
    r = np.atleast_1d(r).astype(float)
    out = np.ones_like(r)
    r1 = gen.breakpoints[0]
    on_plateau = r <= r1
    if r1 > 0:
        out[on_plateau] = cum[0] * (r[on_plateau] / r1) ** gen.p / total
    else:
        out[on_plateau] = 0.0
    seg_idx = np.searchsorted(gen.breakpoints, r, side="left") - 1
    mid = (~on_plateau) & (r <= gen.support_end)
    for i in np.unique(seg_idx[mid]):
        sel = mid & (seg_idx == i)
        out[sel] = (cum[i] + _partial_mass(gen, int(i), r[sel])) / total
    return out


def _knot_inverse(table, u):
    gen, cum = table
    total = cum[-1]
    target = u * total
    out = np.empty_like(target)
    r1 = gen.breakpoints[0]
    on_plateau = target <= cum[0]
    if np.any(on_plateau):
        out[on_plateau] = r1 * (target[on_plateau] / cum[0]) ** (1.0 / gen.p) if cum[0] > 0 else r1
    seg_idx = np.minimum(np.searchsorted(cum, target, side="left") - 1, cum.size - 2)
    for i in np.unique(seg_idx[~on_plateau]):
        sel = (~on_plateau) & (seg_idx == i)
        a, b = gen.breakpoints[i], gen.breakpoints[i + 1]
        goal = target[sel] - cum[i]
        lo = np.full(goal.shape, a)
        hi = np.full(goal.shape, b)
        while np.max(hi - lo) > BISECTION_TOL * max(1.0, b):
            m = 0.5 * (lo + hi)
            below = _partial_mass(gen, int(i), m) < goal
            lo = np.where(below, m, lo)
            hi = np.where(below, hi, m)
        out[sel] = 0.5 * (lo + hi)
    return out


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_radial(family: GeneratorFamily, p: int, rng: np.random.Generator, size=None):
    """Draws from the radial density ``r^(p-1) exp(phi(r))`` (normalised)."""
    family._check_p(p)
    shape = () if size is None else size
    if family.kind == "gauss":
        out = np.sqrt(rng.chisquare(p, size=shape))
    elif family.kind == "exp":
        out = rng.gamma(p, 1.0, size=shape)
    elif family.kind == "unif":
        out = family.radius * rng.random(size=shape) ** (1.0 / p)
    else:
        u = np.atleast_1d(rng.random(size=shape))
        out = _knot_inverse(family._cdf_table, u).reshape(shape)
    return float(out) if size is None else np.asarray(out)


def _uniform_hull(body, n, rng):
    lo = body.vertices.min(axis=0)
    hi = body.vertices.max(axis=0)
    r1, r2 = body.bounding_radii()
    out = np.empty((n, body.p))
    got = 0
    consecutive = 0
    batch = max(64, 2 * n)
    while got < n:
        pts = lo + (hi - lo) * rng.random((batch, body.p))
        norms = np.linalg.norm(pts, axis=1)
        ok = norms <= r1
        shell = (~ok) & (norms <= r2)
        if np.any(shell):
            ok[shell] = body._gauge(pts[shell]) <= 1.0
        idx = np.nonzero(ok)[0]
        # longest run of rejections, counting the run carried over from earlier batches
        runs = np.diff(np.concatenate([[-1 - consecutive], idx, [batch]])) - 1
        if runs[:-1].size and runs[:-1].max() >= MAX_CONSECUTIVE_REJECTIONS or \
                runs[-1] >= MAX_CONSECUTIVE_REJECTIONS:
            raise SamplerError(f"uniform hull sampler hit {MAX_CONSECUTIVE_REJECTIONS} "
                               "consecutive rejections")
        consecutive = int(runs[-1])
        take = idx[: n - got]
        out[got:got + take.size] = pts[take]
        got += take.size
    return out


def _uniform(body, n, rng):
    if isinstance(body, Ball):
        g = rng.standard_normal((n, body.p))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * (body.radius * rng.random(n) ** (1.0 / body.p))[:, None]
    if isinstance(body, Box):
        return (2.0 * rng.random((n, body.p)) - 1.0) * body.halfwidths
    if isinstance(body, LinearImage):
        return _uniform(body.base, n, rng) @ body.matrix.T
    if isinstance(body, PointHull):
        return _uniform_hull(body, n, rng)
    raise InputError(f"no uniform sampler for {type(body).__name__}")


def sample_uniform_body(body: ConvexBody, rng: np.random.Generator, size=None):
    """Uniform draws on ``body``; a single p-vector when ``size`` is None."""
    n = 1 if size is None else int(size)
    out = _uniform(body, n, rng)
    return out[0] if size is None else out


def sample_density(family: GeneratorFamily, body: ConvexBody, mu, n: int,
                   rng: np.random.Generator):
    """``n`` i.i.d. rows from ``exp(phi(||x - mu||_K))``."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape != (body.p,) or not np.all(np.isfinite(mu)):
        raise InputError(f"mu must be a finite vector of length {body.p}")
    n = int(n)
    if n < 1:
        raise InputError("n must be positive")
    Z = _uniform(body, n, rng)
    g = body._gauge(Z)
    zero = g <= 0
    while np.any(zero):
        Z[zero] = _uniform(body, int(zero.sum()), rng)
        g[zero] = body._gauge(Z[zero])
        zero = g <= 0
    R = sample_radial(family, body.p, rng, size=n)
    return mu + Z * (R / g)[:, None]


def truth_log_density(family: GeneratorFamily, body: ConvexBody, mu, x, log_volume=None):
    """Exact ``log f0(x)`` for the family on ``body`` centred at ``mu``."""
    if log_volume is None:
        log_volume = body.log_volume()[0]
    r = body.minkowski(np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(mu, dtype=float))
    return family.log_generator(r, body.p, log_volume)
