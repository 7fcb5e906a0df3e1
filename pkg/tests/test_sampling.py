import math

import numpy as np
import pytest
from scipy import stats

from homlc.errors import InputError, SamplerError
from homlc.geometry import Ball, Box, LinearImage, PointHull
from homlc.projection import fit_radii
from homlc.rng import substream
from homlc import sampling
from homlc.sampling import (GeneratorFamily, sample_density, sample_radial, sample_uniform_body,
                            truth_log_density)

from oracles import radial_quad

FAMILIES = [GeneratorFamily.gauss(), GeneratorFamily.exp(), GeneratorFamily.unif(2.0)]
KS_1PCT = 1.63


def _within(mean, target, sd, n, k=3.0):
    return abs(mean - target) <= k * sd / math.sqrt(n)


def test_ball_uniform_mean_and_norm():
    rng = substream(1, 0)
    p, n = 3, 100_000
    U = sample_uniform_body(Ball(p), rng, n)
    sd = U.std(axis=0)
    assert all(_within(U[:, j].mean(), 0.0, sd[j], n) for j in range(p))
    r = np.linalg.norm(U, axis=1)
    assert _within(r.mean(), p / (p + 1), r.std(), n)


@pytest.mark.parametrize("body", [Ball(2, 2.0), Box([1.0, 3.0]),
                                  LinearImage(np.array([[1.0, 0.5], [0.0, 2.0]]), Ball(2)),
                                  PointHull(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))])
def test_uniform_draws_inside(body):
    U = sample_uniform_body(body, substream(2, 0), 2000)
    assert np.all(body.contains(U))
    assert sample_uniform_body(body, substream(2, 0)).shape == (2,)


def test_hull_uniform_radial_law():
    # |x|_K of a uniform draw on K has CDF r^p
    hull = PointHull(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
    r = hull.minkowski(sample_uniform_body(hull, substream(3, 0), 10_000))
    assert stats.kstest(r, lambda t: np.clip(t, 0, 1) ** 2).statistic < KS_1PCT / 100


def test_hull_rejection_budget(monkeypatch):
    hull = PointHull(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
    monkeypatch.setattr(sampling, "MAX_CONSECUTIVE_REJECTIONS", 1)
    with pytest.raises(SamplerError):
        sample_uniform_body(hull, substream(4, 0), 200)


def test_radial_means():
    n = 100_000
    for p in (1, 4):
        R = sample_radial(GeneratorFamily.exp(), p, substream(5, p), size=n)
        assert _within(R.mean(), p, R.std(), n)
        R = sample_radial(GeneratorFamily.unif(p), p, substream(6, p), size=n)
        assert _within(R.mean(), p * p / (p + 1), R.std(), n)
        R2 = sample_radial(GeneratorFamily.gauss(), p, substream(7, p), size=n) ** 2
        assert _within(R2.mean(), p, R2.std(), n)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind)
@pytest.mark.parametrize("p", [1, 3, 8])
def test_radial_cdf_and_mean_against_quadrature(fam, p):
    from scipy import integrate
    lv = Ball(p).log_volume()[0]
    h = lambda r: p * math.exp(lv + (p - 1) * math.log(r) + fam.log_generator(r, p, lv)) if r > 0 else 0.0
    end = fam.support_end() if math.isfinite(fam.support_end()) else 60.0
    assert integrate.quad(h, 0, end, limit=200)[0] == pytest.approx(1.0, rel=1e-9)
    assert integrate.quad(lambda r: r * h(r), 0, end, limit=200)[0] == pytest.approx(
        fam.radial_mean(p), rel=1e-9)
    r0 = 0.7 * fam.radial_mean(p)
    assert integrate.quad(h, 0, r0)[0] == pytest.approx(fam.radial_cdf(r0, p), rel=1e-9)


def test_knots_family_sampling():
    rng = substream(8, 0)
    gen = fit_radii(rng.gamma(3.0, size=400), p=3, log_volume=Ball(3).log_volume()[0])
    fam = GeneratorFamily.knots(gen)
    assert fam.radial_mean(3) == pytest.approx(radial_quad(gen, lambda r: r), rel=1e-9)
    r = gen.breakpoints[len(gen.breakpoints) // 2]
    assert fam.radial_cdf(r, 3) == pytest.approx(
        radial_quad(type(gen)(gen.breakpoints[gen.breakpoints <= r], gen.values[gen.breakpoints <= r],
                              3, gen.log_volume), lambda t: 1.0), rel=1e-9)
    R = sample_radial(fam, 3, rng, size=10_000)
    assert np.all(R <= gen.support_end)
    assert stats.kstest(R, lambda t: fam.radial_cdf(t, 3)).statistic < KS_1PCT / 100
    with pytest.raises(InputError):
        sample_radial(fam, 4, rng)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.kind)
def test_density_radii_ks(fam):
    body = Box([1.0, 2.0, 0.5])
    n = 10_000
    X = sample_density(fam, body, np.zeros(3), n, substream(9, 0))
    r = body.minkowski(X)
    assert stats.kstest(r, lambda t: fam.radial_cdf(t, 3)).statistic < KS_1PCT / math.sqrt(n)
    assert _within(r.mean(), fam.radial_mean(3), r.std(), n, k=4)


def test_gauss_on_ball_is_standard_normal():
    n = 100_000
    X = sample_density(GeneratorFamily.gauss(), Ball(4), np.zeros(4), n, substream(10, 0))
    # sd of a sample variance of N(0,1) draws is sqrt(2/n)
    assert np.all(np.abs(X.var(axis=0) - 1.0) <= 3 * math.sqrt(2.0 / n))
    ld = truth_log_density(GeneratorFamily.gauss(), Ball(4), np.zeros(4), X[:10])
    assert np.allclose(ld, stats.multivariate_normal(np.zeros(4)).logpdf(X[:10]), atol=1e-10)


def test_mu_shift():
    mu = np.array([3.0, -2.0])
    fam = GeneratorFamily.exp()
    body = Ball(2)
    a = body.minkowski(sample_density(fam, body, mu, 5000, substream(11, 0)) - mu)
    b = body.minkowski(sample_density(fam, body, np.zeros(2), 5000, substream(11, 1)))
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_determinism():
    body = LinearImage(np.array([[2.0, 0.0], [1.0, 1.0]]), Box.cube(2))
    a = sample_density(GeneratorFamily.gauss(), body, [0.0, 1.0], 100, substream(12, 3))
    b = sample_density(GeneratorFamily.gauss(), body, [0.0, 1.0], 100, substream(12, 3))
    assert np.array_equal(a, b)


def test_bad_inputs():
    with pytest.raises(InputError):
        GeneratorFamily("cauchy")
    with pytest.raises(InputError):
        GeneratorFamily.unif(0.0)
    with pytest.raises(InputError):
        sample_density(GeneratorFamily.exp(), Ball(2), [0.0], 5, substream(0))
