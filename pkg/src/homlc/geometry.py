"""Convex bodies and their Minkowski functionals.

Four representations are supported: Euclidean balls, axis-aligned boxes,
invertible linear images of another body, and convex hulls of finitely many
points. Every body is compact, convex and has the origin in its interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.linalg import qr
from scipy.special import gammaln

from .errors import DegenerateEstimateError, InputError, SolverError, ConfigError
from .lp import FEAS_TOL, linprog_max, phase2_batch

TOL_MEMBERSHIP = 1e-9
DEFAULT_MC_BUDGET = 100_000


def log_unit_ball_volume(p: int) -> float:
    """log of pi^(p/2) / Gamma(p/2 + 1)."""
    return 0.5 * p * math.log(math.pi) - float(gammaln(0.5 * p + 1.0))


def _safe_norm(x):
    """Row norms without underflow for tiny entries."""
    x = np.atleast_2d(x)
    s = np.max(np.abs(x), axis=1)
    out = np.zeros(len(x))
    nz = s > 0
    out[nz] = s[nz] * np.linalg.norm(x[nz] / s[nz, None], axis=1)
    return out


def _as_points(x, p):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != p:
        raise InputError(f"expected points of dimension {p}, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise InputError("points must be finite")
    return x, single


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float = 0.0

    @property
    def exact(self) -> bool:
        return self.std_error == 0.0


class ConvexBody:
    """Base class. Subclasses implement ``_gauge`` on an (n, p) array."""

    kind: str = ""
    p: int

    def minkowski(self, x):
        """Minkowski functional ``inf{t >= 0 : x in t K}``; vectorised over rows."""
        pts, single = _as_points(x, self.p)
        out = self._gauge(pts)
        return float(out[0]) if single else out

    def contains(self, x, tol=TOL_MEMBERSHIP):
        g = self.minkowski(x)
        return bool(g <= 1.0 + tol) if np.ndim(g) == 0 else g <= 1.0 + tol

    def volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0) -> VolumeEstimate:
        raise NotImplementedError

    def log_volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0) -> Tuple[float, float]:
        """(log volume, standard error of the log volume)."""
        v = self.volume(mc_budget, rng_seed)
        return math.log(v.value), v.std_error / v.value

    def bounding_radii(self) -> Tuple[float, float]:
        raise NotImplementedError

    def _gauge(self, pts):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(ConvexBody):
    p: int
    radius: float = 1.0
    kind = "ball"

    def __post_init__(self):
        if self.p < 1 or not (self.radius > 0 and math.isfinite(self.radius)):
            raise InputError("ball needs p >= 1 and a positive finite radius")

    def _gauge(self, pts):
        return _safe_norm(pts) / self.radius

    def volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        return VolumeEstimate(math.exp(self.log_volume()[0]))

    def log_volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        return log_unit_ball_volume(self.p) + self.p * math.log(self.radius), 0.0

    def bounding_radii(self):
        return self.radius, self.radius

    def to_dict(self):
        return {"kind": "ball", "p": self.p, "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Box(ConvexBody):
    halfwidths: np.ndarray
    p: int = field(init=False)
    kind = "box"

    def __post_init__(self):
        h = np.array(self.halfwidths, dtype=float).reshape(-1)
        if h.size < 1 or not np.all((h > 0) & np.isfinite(h)):
            raise InputError("box halfwidths must be positive and finite")
        h.setflags(write=False)
        object.__setattr__(self, "halfwidths", h)
        object.__setattr__(self, "p", int(h.size))

    @classmethod
    def cube(cls, p, halfwidth=1.0):
        return cls(np.full(p, float(halfwidth)))

    def _gauge(self, pts):
        return np.max(np.abs(pts) / self.halfwidths, axis=1)

    def volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        return VolumeEstimate(float(np.prod(2.0 * self.halfwidths)))

    def log_volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        return float(np.sum(np.log(2.0 * self.halfwidths))), 0.0

    def bounding_radii(self):
        return float(self.halfwidths.min()), float(np.linalg.norm(self.halfwidths))

    def to_dict(self):
        return {"kind": "box", "p": self.p, "halfwidths": self.halfwidths.tolist()}


@dataclass(frozen=True, eq=False)
class LinearImage(ConvexBody):
    """The body ``matrix @ base``."""

    matrix: np.ndarray
    base: ConvexBody
    p: int = field(init=False)
    kind = "linear_image"

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float, ndmin=2)
        if A.shape != (self.base.p, self.base.p) or not np.all(np.isfinite(A)):
            raise InputError("linear image needs a finite p x p matrix matching the base body")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-14 * sv[0]:
            raise InputError("linear image matrix is singular")
        A.setflags(write=False)
        inv = np.linalg.inv(A)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "p", int(A.shape[0]))
        object.__setattr__(self, "_inv", inv)
        object.__setattr__(self, "_sv", (float(sv[-1]), float(sv[0])))

    @property
    def inverse(self):
        return self._inv

    def _gauge(self, pts):
        return self.base._gauge(pts @ self._inv.T)

    def volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        v = self.base.volume(mc_budget, rng_seed)
        d = abs(float(np.linalg.det(self.matrix)))
        return VolumeEstimate(d * v.value, d * v.std_error)

    def log_volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        lv, se = self.base.log_volume(mc_budget, rng_seed)
        return lv + float(np.linalg.slogdet(self.matrix)[1]), se

    def bounding_radii(self):
        r1, r2 = self.base.bounding_radii()
        smin, smax = self._sv
        return r1 * smin, r2 * smax

    def to_dict(self):
        return {"kind": "linear_image", "p": self.p,
                "matrix": self.matrix.tolist(), "base": self.base.to_dict()}


@dataclass(frozen=True, eq=False)
class PointHull(ConvexBody):
    """Convex hull of the rows of ``vertices``.

    Construction fails with :class:`DegenerateEstimateError` unless the origin
    is an interior point: all 2p axis probes must have finite gauge.
    """

    vertices: np.ndarray
    p: int = field(init=False)
    kind = "point_hull"

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float, ndmin=2)
        if V.shape[0] < 1 or not np.all(np.isfinite(V)):
            raise InputError("point hull needs finite vertices")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "p", int(V.shape[1]))
        r2 = float(np.linalg.norm(V, axis=1).max())
        if r2 <= 0:
            raise DegenerateEstimateError("all hull vertices are at the origin")
        eps = 1e-6 * r2
        probes = np.vstack([np.eye(self.p), -np.eye(self.p)]) * eps
        g = np.array([self._gauge_one(x) for x in probes])
        if not np.all(np.isfinite(g)):
            raise DegenerateEstimateError(
                "origin is not an interior point of the hull "
                f"({int(np.sum(~np.isfinite(g)))} of {2 * self.p} axis probes escape)")
        object.__setattr__(self, "_r2", r2)
        object.__setattr__(self, "_axis_gauge", g / eps)

    def _lp(self, x):
        # max u_{M+1}  s.t.  sum_m u_m Y_m - u_{M+1} x = 0,  sum_m u_m + s = 1,  u, s >= 0
        M, p = self.vertices.shape
        A = np.zeros((p + 1, M + 2))
        A[:p, :M] = self.vertices.T
        A[:p, M] = -x
        A[p, :M] = 1.0
        A[p, M + 1] = 1.0
        b = np.zeros(p + 1)
        b[p] = 1.0
        c = np.zeros(M + 2)
        c[M] = 1.0
        return linprog_max(c, A, b)

    def _gauge_one(self, x):
        """Reference path: the general two-phase solver on one point."""
        if not np.any(x):
            return 0.0
        nx = float(_safe_norm(x)[0])
        res = self._lp(x / nx)
        if res.status != "optimal":
            raise SolverError(f"hull gauge LP ended with status {res.status}",
                              {"x": x.tolist(), "status": res.status})
        u = res.value
        if u <= FEAS_TOL * 1e-3:
            return math.inf
        return nx / u

    def _start_basis(self):
        """p linearly independent vertices plus the slack: a feasible basis for every query."""
        cached = self.__dict__.get("_basis_cache")
        if cached is not None:
            return cached
        M, p = self.vertices.shape
        V = self.vertices / self._r2
        _, _, piv = qr(V.T, pivoting=True, mode="economic")
        cols = np.sort(piv[:p])
        Bm = np.zeros((p + 1, p + 1))
        Bm[:p, :p] = V[cols].T
        Bm[p, :p] = 1.0
        Bm[p, p] = 1.0
        if np.linalg.cond(Bm) > 1e12:
            raise DegenerateEstimateError("hull vertices do not span the space")
        Binv = np.linalg.inv(Bm)
        A = np.zeros((p + 1, M + 2))
        A[:p, :M] = V.T
        A[p, :M] = 1.0
        A[p, M + 1] = 1.0
        basis = np.append(cols, M + 1)
        cached = (Binv, Binv @ A, basis)
        object.__setattr__(self, "_basis_cache", cached)
        return cached

    def _gauge_batch(self, pts):
        M, p = self.vertices.shape
        Binv, BA, basis0 = self._start_basis()
        nx = _safe_norm(pts)
        out = np.zeros(len(pts))
        nz = nx > 0
        U = pts[nz] / nx[nz, None]
        nb = U.shape[0]
        T = np.empty((nb, p + 2, M + 3))
        T[:, :p + 1, :M + 2] = BA
        # column of u_{M+1} is B^-1 [-x; 0]
        T[:, :p + 1, M] = -(U @ Binv[:, :p].T)
        T[:, :p + 1, -1] = Binv[:, p]
        # reduced costs for c = e_M with a zero-cost basis
        T[:, -1, :] = 0.0
        T[:, -1, M] = 1.0
        basis = np.tile(basis0, (nb, 1))
        status = phase2_batch(T, basis, M + 2)
        if np.any(status != "optimal"):
            raise SolverError("hull gauge LP did not reach an optimum",
                              {"failures": int(np.sum(status != "optimal"))})
        u = np.zeros(nb)
        rows, pos = np.nonzero(basis == M)
        u[rows] = T[rows, pos, -1]
        with np.errstate(divide="ignore"):
            g = np.where(u <= FEAS_TOL * 1e-3, np.inf, 1.0 / np.maximum(u, 1e-300))
        out[nz] = nx[nz] * g / self._r2
        return out

    def _gauge(self, pts):
        chunk = max(1, 2_000_000 // (self.vertices.shape[0] + 3) // (self.p + 2))
        if len(pts) <= chunk:
            return self._gauge_batch(pts)
        return np.concatenate([self._gauge_batch(pts[i:i + chunk])
                               for i in range(0, len(pts), chunk)])

    def volume(self, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0):
        """Hit-or-miss Monte Carlo over the bounding box of the vertices."""
        if mc_budget is None or int(mc_budget) <= 0:
            raise ConfigError("point hull volume needs a positive Monte Carlo budget")
        n = int(mc_budget)
        rng = np.random.Generator(np.random.Philox(rng_seed))
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        box = float(np.prod(hi - lo))
        pts = lo + (hi - lo) * rng.random((n, self.p))
        r1, r2 = self.bounding_radii()
        norms = np.linalg.norm(pts, axis=1)
        inside = norms <= r1
        shell = (~inside) & (norms <= r2)
        if np.any(shell):
            inside[shell] = self._gauge(pts[shell]) <= 1.0
        frac = inside.mean()
        se = box * math.sqrt(frac * (1.0 - frac) / n)
        return VolumeEstimate(box * frac, se)

    def bounding_radii(self):
        # The axis gauges give 2p boundary points; their cross-polytope lies
        # inside the hull and its inradius is a certified lower bound.
        g = self._axis_gauge.reshape(2, self.p)
        a = 1.0 / g.max(axis=0)
        r1 = 1.0 / math.sqrt(float(np.sum(1.0 / a ** 2)))
        return r1, self._r2

    def to_dict(self):
        return {"kind": "point_hull", "p": self.p, "vertices": self.vertices.tolist()}


def scaled(body: ConvexBody, alpha: float) -> ConvexBody:
    """The body ``alpha * body``."""
    if not alpha > 0:
        raise InputError("scale factor must be positive")
    if isinstance(body, Ball):
        return Ball(body.p, body.radius * alpha)
    if isinstance(body, Box):
        return Box(body.halfwidths * alpha)
    return LinearImage(alpha * np.eye(body.p), body)


def minkowski(body: ConvexBody, x):
    return body.minkowski(x)


def contains(body: ConvexBody, x, tol=TOL_MEMBERSHIP):
    return body.contains(x, tol)


def volume(body: ConvexBody, mc_budget=DEFAULT_MC_BUDGET, rng_seed=0) -> VolumeEstimate:
    return body.volume(mc_budget, rng_seed)


def bounding_radii(body: ConvexBody):
    return body.bounding_radii()


def _gauge_ratios(K1, K2, n_dirs, rng_seed):
    if K1.p != K2.p:
        raise InputError(f"dimension mismatch: {K1.p} vs {K2.p}")
    if n_dirs < 1:
        raise InputError("n_dirs must be positive")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    theta = rng.standard_normal((int(n_dirs), K1.p))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    return K2._gauge(theta) / K1._gauge(theta)


def d_scale(K1: ConvexBody, K2: ConvexBody, n_dirs=2000, rng_seed=0) -> float:
    """Sandwich distance ``inf{eps : K1/(1+eps) <= K2 <= (1+eps) K1}``.

    Estimated from ``n_dirs`` random directions, so the value is biased
    downwards: extremes falling between sampled directions are missed.
    """
    rho = _gauge_ratios(K1, K2, n_dirs, rng_seed)
    return float(max(rho.max(), (1.0 / rho).max()) - 1.0)


def d_scale_inf_alpha(K1: ConvexBody, K2: ConvexBody, n_dirs=2000, rng_seed=0):
    """Minimise ``d_scale(alpha * K1, K2)`` over ``alpha > 0``.

    Returns
    -------
    alpha : float
        Minimising scale, ``(sup rho * inf rho) ** -0.5``.
    value : float
        ``sqrt(sup rho / inf rho) - 1``; lower-biased like :func:`d_scale`.
    """
    rho = _gauge_ratios(K1, K2, n_dirs, rng_seed)
    hi, lo = float(rho.max()), float(rho.min())
    return 1.0 / math.sqrt(hi * lo), math.sqrt(hi / lo) - 1.0


def body_from_dict(d: dict) -> ConvexBody:
    """Inverse of ``ConvexBody.to_dict``; assumes a schema-checked dict."""
    kind = d["kind"]
    if kind == "ball":
        body = Ball(int(d["p"]), float(d["radius"]))
    elif kind == "box":
        body = Box(np.asarray(d["halfwidths"], dtype=float))
    elif kind == "linear_image":
        body = LinearImage(np.asarray(d["matrix"], dtype=float), body_from_dict(d["base"]))
    elif kind == "point_hull":
        body = PointHull(np.asarray(d["vertices"], dtype=float))
    else:
        raise InputError(f"unknown body kind {kind!r}")
    if body.p != int(d["p"]):
        raise InputError(f"body declares p={d['p']} but its payload has dimension {body.p}")
    return body
