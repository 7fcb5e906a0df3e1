"""Univariate K-homothetic log-concave maximum likelihood.

Given radii ``Z_i = ||X_i - mu||_K`` with weights ``w_i``, the fitted generator
is the maximiser over decreasing concave ``phi`` of

    sum_i w_i phi(Z_i) - p vol(K) int_0^inf r^(p-1) exp(phi(r)) dr + 1.

The maximiser is constant on ``[0, Z_(1)]``, affine between consecutive
order statistics and ``-inf`` beyond ``Z_(n)``. It is computed by an
active-set method over the slope-change constraints with Newton solves on
the knot values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import solveh_banded
from scipy.special import gammaln, xlogy

from .errors import DegenerateSampleError, InputError, InvariantError, SolverError

TOL_FEAS = 1e-9
TOL_KKT = 1e-7
TOL_NEWTON = 1e-9
NEWTON_MAX_ITER = 200
ARMIJO_C = 1e-4
STEP_CLAMP = 1.0 - 1e-12
NORMALIZATION_TOL = 1e-8
KINK_STOP_REL = 1e-12


# ---------------------------------------------------------------------------
# closed-form segment integrals
# ---------------------------------------------------------------------------

def _series_pos(b, k):
    # exp(-b) * sum_j b^j / (j! (k + j + 1)), all terms positive
    term = np.ones_like(b)
    acc = term / (k + 1.0)
    j = 0
    while True:
        j += 1
        term = term * b / j
        inc = term / (k + j + 1.0)
        acc = acc + inc
        if np.all(inc <= 1e-17 * acc):
            return acc * np.exp(-b)


def _series_neg(g, k):
    # exp(-g) * sum_j g^j k! / (j + k + 1)!, all terms positive
    term = np.ones_like(g) / (k + 1.0)
    acc = term.copy()
    j = 0
    while True:
        j += 1
        term = term * g / (k + j + 1.0)
        acc = acc + term
        if np.all(term <= 1e-17 * acc):
            return acc * np.exp(-g)


def _scaled_exp_moments(beta, kmax):
    """``exp(-max(beta, 0)) * int_0^1 s^k exp(beta s) ds`` for k = 0..kmax.

    Returns an array of shape ``beta.shape + (kmax + 1,)``. Three regimes,
    each free of cancellation:

    * ``beta >= 0`` moderate: power series with positive terms;
    * ``beta < 0`` moderate: Kummer-transformed series with positive terms;
    * ``|beta| > 2 (kmax + 1)``: forward recurrence, stable because the
      amplification factor ``k / |beta|`` stays below one.
    """
    beta = np.asarray(beta, dtype=float)
    flat = beta.reshape(-1)
    out = np.empty((flat.size, kmax + 1))
    k = np.arange(kmax + 1, dtype=float)
    ab = np.abs(flat)
    limit = 2.0 * (kmax + 1)
    # group by magnitude so the series loops stop early for the (common) small slopes
    edges = [0.0, 0.5, 4.0, limit]
    for lo, hi in zip(edges[:-1], edges[1:]):
        grp = (ab <= hi) & (ab > lo) if lo > 0 else (ab <= hi)
        if lo >= limit or not np.any(grp):
            continue
        pos = grp & (flat >= 0)
        neg = grp & (flat < 0)
        if np.any(pos):
            out[pos] = _series_pos(flat[pos][:, None], k)
        if np.any(neg):
            out[neg] = _series_neg(-flat[neg][:, None], k)
    big = ab > limit
    if np.any(big):
        b = flat[big]
        bb = ab[big]
        res = np.empty((b.size, kmax + 1))
        bp = b > 0
        # beta > 0: S_k = (1 - k S_{k-1}) / beta,  S_0 = (1 - e^-beta) / beta
        # beta < 0: I_k = (k I_{k-1} - e^beta) / |beta|,  I_0 = (1 - e^beta) / |beta|
        e = np.exp(-bb)
        res[:, 0] = -np.expm1(-bb) / bb
        for kk in range(1, kmax + 1):
            prev = res[:, kk - 1]
            res[:, kk] = np.where(bp, (1.0 - kk * prev) / bb, (kk * prev - e) / bb)
        out[big] = res
    return out.reshape(beta.shape + (kmax + 1,))


def _segment_moments(a, b, phi_a, phi_b, q, jmax=2):
    """Moments ``int_a^b r^q s^j exp(l(r)) dr`` for j = 0..jmax.

    ``l`` interpolates linearly between ``(a, phi_a)`` and ``(b, phi_b)`` and
    ``s = (r - a) / (b - a)``. Arrays broadcast; the result has a trailing
    axis of length ``jmax + 1``.

    With ``r = b (alpha + eta s)``, ``alpha = a / b``, ``eta = 1 - alpha``,
    the polynomial factor expands into binomial weights that are all
    non-negative, so no cancellation occurs.
    """
    a, b, phi_a, phi_b = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                               for v in (a, b, phi_a, phi_b)))
    delta = b - a
    beta = phi_b - phi_a
    eta = delta / b
    alpha = a / b
    kk = np.arange(q + 1, dtype=float)
    logc = gammaln(q + 1.0) - gammaln(kk + 1.0) - gammaln(q - kk + 1.0)
    w = np.exp(logc + xlogy(kk, eta[..., None]) + xlogy(q - kk, alpha[..., None]))
    S = _scaled_exp_moments(beta, q + jmax)
    m = np.stack([np.sum(w * S[..., j:j + q + 1], axis=-1) for j in range(jmax + 1)], axis=-1)
    with np.errstate(over="ignore"):
        logpref = np.maximum(phi_a, phi_b) + q * np.log(b) + np.log(delta)
        return np.exp(logpref)[..., None] * m


def segment_integral(p, a, b, phi_a, phi_b, moment=0):
    """``int_a^b r^(p-1+moment) exp(l(r)) dr`` with ``l`` linear between the end values."""
    if moment not in (0, 1):
        raise InputError("moment must be 0 or 1")
    if p < 1:
        raise InputError("p must be a positive integer")
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(a_arr < 0) or np.any(a_arr >= b_arr):
        raise InputError("segment needs 0 <= a < b")
    if not (np.all(np.isfinite(phi_a)) and np.all(np.isfinite(phi_b))):
        raise InputError("segment end values must be finite")
    out = _segment_moments(a, b, phi_a, phi_b, int(p) - 1 + moment, jmax=0)[..., 0]
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialSample:
    """Distinct ascending radii with positive weights summing to one."""

    radii: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.radii, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if z.size == 0 or z.shape != w.shape:
            raise InputError("radii and weights must be non-empty and of equal length")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise InputError("radii must be finite and non-negative")
        if np.any(np.diff(z) <= 0):
            raise InputError("radii must be strictly ascending")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must be positive and sum to one")
        z.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "radii", z)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_radii(cls, radii, weights=None):
        """Sort and collapse exact ties into weights."""
        z = np.asarray(radii, dtype=float).reshape(-1)
        if z.size == 0:
            raise InputError("empty sample")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise InputError("radii must be finite and non-negative")
        if weights is None:
            w = np.full(z.size, 1.0 / z.size)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape != z.shape or np.any(w < 0) or not w.sum() > 0:
                raise InputError("weights must be non-negative, not all zero and match the radii")
            keep = w > 0
            z, w = z[keep], w[keep] / w.sum()
        uniq, inv = np.unique(z, return_inverse=True)
        wu = np.zeros(uniq.size)
        np.add.at(wu, inv, w)
        wu /= wu.sum()
        return cls(uniq, wu)

    @property
    def n(self):
        return self.radii.size

    @property
    def mean(self):
        return float(self.weights @ self.radii)


@dataclass(frozen=True)
class ObjectiveContext:
    p: int
    log_volume: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise InputError("p must be a positive integer")
        if not math.isfinite(self.log_volume):
            raise InputError("log_volume must be finite")


@dataclass(frozen=True)
class PiecewiseLinearConcave:
    """Fitted generator: constant on ``[0, r_1]``, linear between breakpoints,
    ``-inf`` beyond the last breakpoint."""

    breakpoints: np.ndarray
    values: np.ndarray
    p: int
    log_volume: float

    def __post_init__(self):
        r = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if r.size == 0 or r.shape != v.shape:
            raise InputError("breakpoints and values must be non-empty and of equal length")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise InputError("breakpoints and values must be finite")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise InputError("breakpoints must be non-negative and strictly ascending")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", r)
        object.__setattr__(self, "values", v)
        ObjectiveContext(self.p, self.log_volume)

    @property
    def support_end(self):
        return float(self.breakpoints[-1])

    @property
    def plateau(self):
        return float(self.values[0])

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.breakpoints)

    def check_shape(self, tol=1e-9):
        """Raise :class:`InvariantError` unless values and slopes are non-increasing."""
        v = self.values
        scale = max(1.0, float(np.max(np.abs(v))))
        bad = np.nonzero(np.diff(v) > tol * scale)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise InvariantError(f"values must be non-increasing; values[{i}] > values[{i - 1}]",
                                 f"/values/{i}")
        s = np.concatenate([[0.0], self.slopes])
        sscale = max(1.0, float(np.max(np.abs(s))))
        bad = np.nonzero(np.diff(s) > tol * sscale)[0]
        if bad.size:
            i = int(bad[0])
            raise InvariantError(f"slopes must be non-increasing; concavity fails at breakpoint {i}",
                                 f"/values/{i}")

    def segment_masses(self, moment=0):
        """Unnormalised ``p vol(K) int r^(p-1+moment) e^phi`` over the plateau and each segment."""
        p, lv = self.p, self.log_volume
        r, v = self.breakpoints, self.values
        r1 = r[0]
        if r1 > 0:
            plateau = math.exp(lv + v[0] + math.log(p) + (p + moment) * math.log(r1)
                               - math.log(p + moment))
        else:
            plateau = 0.0
        if r.size > 1:
            seg = _segment_moments(r[:-1], r[1:], v[:-1], v[1:], p - 1 + moment, jmax=0)[:, 0]
            seg = p * math.exp(lv) * seg
        else:
            seg = np.zeros(0)
        return plateau, seg

    def total_mass(self):
        plateau, seg = self.segment_masses()
        return plateau + float(seg.sum())

    def radial_mean(self):
        plateau, seg = self.segment_masses(moment=1)
        return plateau + float(seg.sum())

    def __call__(self, r):
        return eval_log_generator(self, r)

    def log_radial_density(self, r):
        """log of ``h(r) = p vol(K) r^(p-1) exp(phi(r))``."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return (math.log(self.p) + self.log_volume + (self.p - 1) * np.log(r)
                    + eval_log_generator(self, r))

    def rescaled(self, alpha):
        """Generator of the same density for data scaled by ``alpha``."""
        return PiecewiseLinearConcave(alpha * self.breakpoints,
                                      self.values - self.p * math.log(alpha),
                                      self.p, self.log_volume)

    def to_dict(self):
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist(),
                "p": int(self.p), "log_volume": float(self.log_volume)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["breakpoints"], dtype=float), np.asarray(d["values"], dtype=float),
                   int(d["p"]), float(d["log_volume"]))


def eval_log_generator(gen: PiecewiseLinearConcave, r):
    """phi(r): plateau on ``[0, r_1]``, linear interpolation, ``-inf`` past ``r_m``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise InputError("radius must be non-negative")
    out = np.interp(r_arr, gen.breakpoints, gen.values)
    out = np.where(r_arr > gen.breakpoints[-1], -np.inf, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# objective on the full knot vector
# ---------------------------------------------------------------------------

def _first_term(ctx, z1, phi1):
    # vol(K) e^{phi_1} Z_(1)^p: mass of the plateau [0, Z_(1)]
    if z1 <= 0:
        return 0.0
    e = ctx.log_volume + phi1 + ctx.p * math.log(z1)
    return math.exp(e) if e < 709.0 else math.inf


def _check_phi(sample, phi):
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.shape != (sample.n,):
        raise InputError(f"phi must have length {sample.n}")
    if not np.all(np.isfinite(phi)):
        raise InputError("phi must be finite")
    return phi


def objective(ctx: ObjectiveContext, sample: RadialSample, phi) -> float:
    """Log-likelihood criterion F(phi) for the piecewise-linear generator with knot values phi.

    The plateau contributes ``vol(K) e^{phi_1} Z_(1)^p``, the exact mass of
    ``[0, Z_(1)]``; this is the only choice that makes F the log-likelihood of
    a normalised density (and it matches the knot-reduced form).
    """
    phi = _check_phi(sample, phi)
    z = sample.radii
    val = float(sample.weights @ phi) - _first_term(ctx, z[0], phi[0]) + 1.0
    if sample.n > 1:
        m = _segment_moments(z[:-1], z[1:], phi[:-1], phi[1:], ctx.p - 1, jmax=0)[:, 0]
        val -= ctx.p * math.exp(ctx.log_volume) * float(m.sum())
    return val


def _hat_masses(ctx, z, phi):
    """Per-knot masses ``p vol(K) int hat_i r^(p-1) e^phi`` plus the plateau term."""
    n = z.size
    mass = np.zeros(n)
    mass[0] = _first_term(ctx, z[0], phi[0])
    if n > 1:
        m = _segment_moments(z[:-1], z[1:], phi[:-1], phi[1:], ctx.p - 1, jmax=1)
        c = ctx.p * math.exp(ctx.log_volume)
        right = c * m[:, 1]            # weight s  -> upper end
        left = c * m[:, 0] - right     # weight 1-s -> lower end
        mass[:-1] += left
        mass[1:] += right
    return mass


def gradient(ctx: ObjectiveContext, sample: RadialSample, phi) -> np.ndarray:
    """Exact gradient of :func:`objective`."""
    phi = _check_phi(sample, phi)
    return sample.weights - _hat_masses(ctx, sample.radii, phi)


def kink_derivatives(sample: RadialSample, grad) -> np.ndarray:
    """``b_i^T grad`` for i = 1..n.

    ``b_i`` adds the kink ``-(r - Z_(i))_+`` (i < n); ``b_n`` is the constant
    direction. Computed as ``-sum_{k>=i} delta_k * sum_{j>k} grad_j`` to
    avoid cancellation.
    """
    g = np.asarray(grad, dtype=float)
    n = g.size
    out = np.empty(n)
    if n > 1:
        delta = np.diff(sample.radii)
        tail = np.cumsum(g[::-1])[::-1]          # tail[k] = sum_{j>=k} g_j
        contrib = delta * tail[1:]               # delta_k * sum_{j>k} g_j
        out[:-1] = -np.cumsum(contrib[::-1])[::-1]
    out[-1] = g.sum()
    return out


# ---------------------------------------------------------------------------
# restricted problem on a knot set
# ---------------------------------------------------------------------------

def _knots_from_active(n, active):
    mask = np.ones(n, dtype=bool)
    idx = np.fromiter(active, dtype=int, count=len(active)) if len(active) else np.zeros(0, int)
    mask[idx - 1] = False   # constraint i (1-based, i <= n-1) removes data point i as a knot
    mask[-1] = True
    return np.nonzero(mask)[0]


def _interp_matrix_weights(z, knots, w):
    """Data weights pushed onto knot coordinates (``E^T w``)."""
    T = knots.size
    c = np.zeros(T)
    kz = z[knots]
    pos = np.searchsorted(knots, np.arange(z.size), side="left")
    # points at or before the first knot sit on the plateau
    first = pos == 0
    c[0] += w[first].sum()
    rest = np.nonzero(~first)[0]
    if rest.size:
        t = pos[rest]                           # upper knot index
        lo, hi = kz[t - 1], kz[t]
        lam = (z[rest] - lo) / (hi - lo)
        exact = knots[t] == rest
        lam[exact] = 1.0
        np.add.at(c, t, w[rest] * lam)
        np.add.at(c, t - 1, w[rest] * (1.0 - lam))
    return c


def expand_knots(z, knots, values):
    """Full vector ``phi_j`` from knot values (plateau + linear interpolation)."""
    return np.interp(z, z[knots], values)


class _Reduced:
    """F restricted to V(A), parametrised by the values at the knots."""

    def __init__(self, ctx, sample, knots):
        self.ctx = ctx
        self.z = sample.radii
        self.knots = knots
        self.kz = self.z[knots]
        self.c = _interp_matrix_weights(self.z, knots, sample.weights)
        self.scale = ctx.p * math.exp(ctx.log_volume)

    def value(self, x):
        with np.errstate(over="ignore", invalid="ignore"):
            val = float(self.c @ x) - _first_term(self.ctx, self.kz[0], x[0]) + 1.0
            if x.size > 1:
                m = _segment_moments(self.kz[:-1], self.kz[1:], x[:-1], x[1:], self.ctx.p - 1, jmax=0)
                val -= self.scale * float(m.sum())
        return val if np.isfinite(val) else -np.inf

    def grad_hess(self, x):
        T = x.size
        first = _first_term(self.ctx, self.kz[0], x[0])
        g = self.c.copy()
        g[0] -= first
        diag = np.zeros(T)
        diag[0] = -first
        off = np.zeros(max(T - 1, 0))
        if T > 1:
            m = self.scale * _segment_moments(self.kz[:-1], self.kz[1:], x[:-1], x[1:],
                                              self.ctx.p - 1, jmax=2)
            m0, m1, m2 = m[:, 0], m[:, 1], m[:, 2]
            g[:-1] -= m0 - m1
            g[1:] -= m1
            diag[:-1] -= m0 - 2.0 * m1 + m2      # (1-s)^2
            diag[1:] -= m2                       # s^2
            off -= m1 - m2                       # s(1-s)
        return g, diag, off


def _newton(red: _Reduced, x0, max_iter=NEWTON_MAX_ITER, tol=TOL_NEWTON, polish=3):
    """Damped Newton ascent on the reduced objective.

    Once the gradient norm is below ``tol`` up to ``polish`` further full
    steps are taken while they keep reducing it: kink derivatives multiply
    the gradient by radius differences, so the extra digits matter for wide
    samples.
    """
    x = np.array(x0, dtype=float)
    fx = red.value(x)
    if not np.isfinite(fx):
        raise SolverError("Newton start point has non-finite objective", {"x0": x.tolist()})
    polished = 0
    g, diag, off = red.grad_hess(x)
    gnorm = float(np.max(np.abs(g)))
    for it in range(max_iter + 1):
        if gnorm <= tol and polished >= polish:
            return x, fx, it
        if it == max_iter:
            if gnorm <= tol:
                return x, fx, it
            break
        # -H is symmetric positive definite and tridiagonal
        ab = np.zeros((2, x.size))
        ab[0, 1:] = -off
        ab[1] = -diag
        try:
            if x.size == 1:
                if not ab[1, 0] > 0:
                    raise np.linalg.LinAlgError("non-positive curvature")
                d = g / ab[1]
            else:
                d = solveh_banded(ab, g)
        except np.linalg.LinAlgError as exc:
            raise SolverError("reduced Hessian is not negative definite",
                              {"iteration": it, "grad_norm": gnorm}) from exc
        if gnorm <= tol:
            xn = x + d
            fn = red.value(xn)
            gn, dn, on = red.grad_hess(xn)
            gnn = float(np.max(np.abs(gn)))
            if not (np.isfinite(fn) and gnn < gnorm):
                return x, fx, it
            x, fx, g, diag, off, gnorm = xn, fn, gn, dn, on, gnn
            polished += 1
            continue
        slope = float(g @ d)
        # rounding in F is ~eps |F|; without this slack Armijo stalls near the optimum
        noise = 64.0 * np.finfo(float).eps * max(1.0, abs(fx))
        step = 1.0
        accepted = False
        while step > 1e-14:
            xn = x + step * d
            fn = red.value(xn)
            if fn >= fx + ARMIJO_C * step * slope - noise:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise SolverError("line search failed", {"iteration": it, "grad_norm": gnorm,
                                                      "newton_decrement": slope})
        x, fx = xn, fn
        g, diag, off = red.grad_hess(x)
        gnorm = float(np.max(np.abs(g)))
    raise SolverError("Newton did not converge", {"iterations": max_iter, "grad_norm": gnorm,
                                                  "objective": fx})


def solve_restricted(ctx: ObjectiveContext, sample: RadialSample, active, warm_start):
    """Maximiser of F over ``{phi : v_i^T phi = 0 for i in active}``.

    ``active`` holds 1-based constraint indices in ``1..n-1``. The warm start
    is read at the knots (indices outside ``active``).
    """
    n = sample.n
    active = sorted(set(int(i) for i in active))
    if active and (active[0] < 1 or active[-1] > n - 1):
        raise InputError("active constraint indices must lie in 1..n-1")
    knots = _knots_from_active(n, active)
    warm = np.asarray(warm_start, dtype=float).reshape(-1)
    if warm.shape != (n,):
        raise InputError(f"warm start must have length {n}")
    red = _Reduced(ctx, sample, knots)
    x, _, _ = _newton(red, warm[knots])
    return expand_knots(sample.radii, knots, x)


# ---------------------------------------------------------------------------
# active-set outer loop
# ---------------------------------------------------------------------------

def constraint_values(z, knots, x):
    """``v_i^T phi`` at each knot ``i < n`` (0-based knot positions), from knot slopes.

    Working from the knot representation avoids dividing rounding noise by
    tiny gaps between neighbouring data points.
    """
    if knots.size < 2:
        return np.zeros(0)
    kz = z[knots]
    slopes = np.diff(x) / np.diff(kz)
    left = np.concatenate([[0.0], slopes[:-1]])
    vals = slopes - left
    if knots[0] == 0 and z.size > 1:
        # v_1 = phi_2 - phi_1, not a slope difference
        vals[0] = slopes[0] * (z[1] - z[0])
    return vals


@dataclass
class FitTrace:
    objective: List[float] = field(default_factory=list)
    n_knots: List[int] = field(default_factory=list)
    outer_iterations: int = 0
    inner_steps: int = 0
    kkt_stationarity: float = float("nan")
    kkt_feasibility: float = float("nan")


def _uniform_start(ctx, z):
    return -(ctx.log_volume + ctx.p * math.log(z[-1]))


def fit_projection(ctx: ObjectiveContext, sample: RadialSample, trace: Optional[FitTrace] = None,
                   tol_kkt=TOL_KKT, tol_feas=TOL_FEAS, max_outer=None) -> PiecewiseLinearConcave:
    """Maximum likelihood generator by the active-set method.

    Starts from the uniform fit (every constraint active), repeatedly frees the
    active constraint with the steepest ascent direction ``b_i`` and, when the
    new restricted maximiser leaves the feasible cone, walks back along the
    segment to the first constraint that becomes binding.

    Raises
    ------
    DegenerateSampleError
        If every radius is zero (the likelihood is unbounded).
    """
    z = sample.radii
    n = sample.n
    if z[-1] <= 0:
        raise DegenerateSampleError("all radii are zero: the likelihood is unbounded above")
    trace = trace if trace is not None else FitTrace()
    if max_outer is None:
        max_outer = 10 * n + 100

    # free kinks well past the reported tolerance so the fit does not depend on the radius scale
    stop = min(tol_kkt, KINK_STOP_REL * z[-1])
    knots = np.array([n - 1])
    x = np.array([_uniform_start(ctx, z)])
    x, fx, _ = _newton(_Reduced(ctx, sample, knots), x)
    trace.objective.append(fx)
    trace.n_knots.append(1)

    for outer in range(max_outer):
        phi = expand_knots(z, knots, x)
        bder = kink_derivatives(sample, gradient(ctx, sample, phi))
        is_knot = np.zeros(n, dtype=bool)
        is_knot[knots] = True
        # only active constraints (non-knots among 1..n-1) are candidates
        cand = bder[:-1].copy()
        cand[is_knot[:-1]] = -np.inf
        if cand.size == 0 or np.max(cand) <= stop:
            break
        istar = int(np.argmax(cand))   # lowest index on ties
        new_knots = np.sort(np.append(knots, istar))
        xw = phi[new_knots]
        red = _Reduced(ctx, sample, new_knots)
        xp, fp, _ = _newton(red, xw)
        trace.outer_iterations += 1
        while True:
            vp = constraint_values(z, new_knots, xp)
            # constraints that are knots of the current phi (not the freed one)
            old = np.isin(new_knots[:-1], knots)
            viol = old & (vp > tol_feas)
            if not np.any(viol):
                break
            vc = constraint_values(z, new_knots, phi[new_knots])
            ratios = np.full(vp.shape, -np.inf)
            denom = vp[viol] - vc[viol]
            ratios[viol] = vp[viol] / denom
            t = float(np.clip(np.max(ratios), 0.0, STEP_CLAMP))
            binding = viol & (ratios >= np.max(ratios) - 1e-12)
            phi = t * phi + (1.0 - t) * expand_knots(z, new_knots, xp)
            drop = new_knots[:-1][binding]
            knots = new_knots = np.setdiff1d(new_knots, drop)
            red = _Reduced(ctx, sample, new_knots)
            xp, fp, _ = _newton(red, phi[new_knots])
            trace.inner_steps += 1
            if new_knots.size == 1:
                break
        knots, x = new_knots, xp
        trace.objective.append(fp)
        trace.n_knots.append(int(knots.size))
    else:
        raise SolverError("active-set iteration limit reached",
                          {"outer_iterations": trace.outer_iterations, "knots": int(knots.size)})

    phi = expand_knots(z, knots, x)
    bder = kink_derivatives(sample, gradient(ctx, sample, phi))
    trace.kkt_stationarity = float(np.max(bder))
    cv = constraint_values(z, knots, x)
    trace.kkt_feasibility = float(np.max(cv)) if cv.size else 0.0
    return PiecewiseLinearConcave(z[knots], x, ctx.p, ctx.log_volume)


def fit_radii(radii, p, log_volume, weights=None, trace=None) -> PiecewiseLinearConcave:
    """Convenience wrapper: collapse ties and run :func:`fit_projection`."""
    return fit_projection(ObjectiveContext(int(p), float(log_volume)),
                          RadialSample.from_radii(radii, weights), trace=trace)
