import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homlc.errors import ConfigError, DegenerateEstimateError, InputError
from homlc.geometry import (Ball, Box, LinearImage, PointHull, body_from_dict, bounding_radii,
                            contains, d_scale, d_scale_inf_alpha, log_unit_ball_volume,
                            minkowski, scaled, volume)

CROSS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def _bodies(p, rng):
    A = rng.normal(size=(p, p)) + 2 * np.eye(p)
    verts = rng.normal(size=(4 * p + 4, p))
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    verts = np.vstack([verts, np.eye(p), -np.eye(p)])
    return [Ball(p, 1.7), Box(rng.uniform(0.5, 2.0, p)), LinearImage(A, Ball(p, 1.0)),
            PointHull(verts)]


# --- minkowski -----------------------------------------------------------

def test_ball_gauge():
    assert minkowski(Ball(2, 1.0), [3.0, 4.0]) == pytest.approx(5.0)


def test_box_gauge():
    assert minkowski(Box([1.0, 1.0]), [0.5, -2.0]) == pytest.approx(2.0)


def test_cross_polytope_gauge_is_l1():
    hull = PointHull(CROSS)
    assert minkowski(hull, [0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 2))
    # brute force over the hull's four facets |x1| + |x2| = 1
    assert np.allclose(hull.minkowski(x), np.abs(x).sum(axis=1), atol=1e-10)


def test_gauge_of_origin_is_zero():
    for body in _bodies(3, np.random.default_rng(1)):
        assert minkowski(body, np.zeros(3)) == 0.0


def test_nonfinite_point_rejected():
    with pytest.raises(InputError):
        minkowski(Ball(2), [np.nan, 0.0])


def test_dimension_mismatch_rejected():
    with pytest.raises(InputError):
        minkowski(Ball(2), [1.0, 2.0, 3.0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(0.0, 50.0))
def test_positive_homogeneity(seed, alpha):
    rng = np.random.default_rng(seed)
    for body in _bodies(3, rng):
        x = rng.normal(size=3)
        g = minkowski(body, x)
        assert minkowski(body, alpha * x) == pytest.approx(alpha * g, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_subadditivity(seed):
    rng = np.random.default_rng(seed)
    for body in _bodies(3, rng):
        x, y = rng.normal(size=(2, 3))
        assert minkowski(body, x + y) <= minkowski(body, x) + minkowski(body, y) + 1e-9


@pytest.mark.parametrize("p", [2, 3])
def test_sphere_hull_approximates_euclidean_norm(p):
    rng = np.random.default_rng(p)
    v = rng.normal(size=(10_000, p))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    hull = PointHull(v)
    x = rng.normal(size=(20, p))
    assert np.all(np.abs(hull.minkowski(x) - np.linalg.norm(x, axis=1)) <= 0.05)


def test_linear_image_matches_closed_forms():
    rng = np.random.default_rng(2)
    d = np.array([2.0, 0.5, 3.0])
    x = rng.normal(size=(30, 3))
    assert np.allclose(LinearImage(np.diag(d), Ball(3)).minkowski(x),
                       np.linalg.norm(x / d, axis=1), rtol=1e-14)
    assert np.allclose(LinearImage(np.diag(d), Box.cube(3)).minkowski(x),
                       Box(d).minkowski(x), rtol=1e-14)
    A = rng.normal(size=(3, 3))
    body = LinearImage(A, Ball(3))
    assert np.array_equal(body.minkowski(x), Ball(3).minkowski(x @ np.linalg.inv(A).T))


def test_singular_linear_image_rejected():
    with pytest.raises(InputError):
        LinearImage(np.array([[1.0, 2.0], [2.0, 4.0]]), Ball(2))


# --- contains ------------------------------------------------------------

def test_contains_examples():
    assert contains(Ball(3), np.zeros(3))
    assert contains(Ball(3), [1.0, 0.0, 0.0])
    assert not contains(Box([1.0, 1.0]), [1.001, 0.0], tol=1e-9)


def test_contains_vectorised():
    out = Ball(2).contains(np.array([[0.1, 0.0], [2.0, 0.0]]))
    assert out.tolist() == [True, False]


# --- volume --------------------------------------------------------------

def test_volume_examples():
    assert volume(Ball(2)).value == pytest.approx(math.pi, rel=1e-14)
    assert volume(Box([1.0, 2.0])).value == pytest.approx(8.0)


def test_square_hull_volume_mc():
    hull = PointHull(np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float))
    v = volume(hull, mc_budget=1_000_000, rng_seed=3)
    assert abs(v.value - 4.0) <= 3 * max(v.std_error, 1e-12)


def test_cross_polytope_volume_mc():
    v = volume(PointHull(CROSS), mc_budget=200_000, rng_seed=5)
    assert v.std_error > 0
    assert abs(v.value - 2.0) <= 3 * v.std_error


def test_hull_volume_deterministic_and_budget_checked():
    hull = PointHull(CROSS)
    assert volume(hull, 5000, 1).value == volume(hull, 5000, 1).value
    with pytest.raises(ConfigError):
        volume(hull, 0)


@pytest.mark.parametrize("p", [1, 2, 5, 9])
def test_linear_image_volume(p):
    rng = np.random.default_rng(p)
    A = rng.normal(size=(p, p))
    got = volume(LinearImage(A, Ball(p))).value
    want = abs(np.linalg.det(A)) * math.exp(log_unit_ball_volume(p))
    assert got == pytest.approx(want, rel=1e-10)


def test_unit_ball_volumes():
    assert math.exp(log_unit_ball_volume(1)) == pytest.approx(2.0)
    assert math.exp(log_unit_ball_volume(3)) == pytest.approx(4 * math.pi / 3)


# --- bounding radii -------------------------------------------------------

def test_bounding_radii_examples():
    assert bounding_radii(Ball(3, 2.0)) == (2.0, 2.0)
    r1, r2 = bounding_radii(Box([1.0, 1.0]))
    assert (r1, r2) == (1.0, pytest.approx(math.sqrt(2)))
    r1, r2 = bounding_radii(PointHull(CROSS))
    assert r2 == pytest.approx(1.0)
    assert 0 < r1 <= 1 / math.sqrt(2) + 1e-12


def test_bounding_radii_are_certified():
    rng = np.random.default_rng(4)
    for body in _bodies(3, rng):
        r1, r2 = bounding_radii(body)
        assert 0 < r1 <= r2
        u = rng.normal(size=(500, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        g = body.minkowski(u)
        # radial extent 1/g along each direction lies in [r1, r2]
        assert np.all(1 / g >= r1 * (1 - 1e-9)) and np.all(1 / g <= r2 * (1 + 1e-9))


# --- interior check -------------------------------------------------------

def test_hull_without_origin_inside_rejected():
    with pytest.raises(DegenerateEstimateError):
        PointHull(np.array([[1.0, 0.0], [2.0, 1.0], [2.0, -1.0]]))


def test_flat_hull_rejected():
    with pytest.raises(DegenerateEstimateError):
        PointHull(np.array([[1.0, 0.0], [-1.0, 0.0]]))


# --- d_scale --------------------------------------------------------------

def test_d_scale_identity():
    K = Box([1.0, 2.0])
    assert d_scale(K, K) == 0.0


def test_d_scale_scaled_ball():
    assert d_scale(scaled(Ball(2), 2.0), Ball(2)) == pytest.approx(1.0)
    alpha, val = d_scale_inf_alpha(scaled(Ball(2), 2.0), Ball(2))
    assert alpha == pytest.approx(0.5) and val == pytest.approx(0.0, abs=1e-12)


def test_d_scale_ball_vs_square():
    _, val = d_scale_inf_alpha(Ball(2), Box.cube(2), n_dirs=20_000, rng_seed=1)
    # dense-grid oracle over angles
    t = np.linspace(0, 2 * np.pi, 200_001)
    rho = np.max(np.abs(np.c_[np.cos(t), np.sin(t)]), axis=1)
    oracle = math.sqrt(rho.max() / rho.min()) - 1
    assert oracle == pytest.approx(2 ** 0.25 - 1, abs=1e-9)
    assert oracle - 2e-3 <= val <= oracle + 1e-12


def test_d_scale_dimension_mismatch():
    with pytest.raises(InputError):
        d_scale(Ball(2), Ball(3))


# --- serialisation --------------------------------------------------------

def test_body_dict_round_trip():
    for body in _bodies(3, np.random.default_rng(6)):
        again = body_from_dict(body.to_dict())
        x = np.random.default_rng(0).normal(size=(10, 3))
        assert np.array_equal(again.minkowski(x), body.minkowski(x))


def test_body_dict_dimension_mismatch():
    with pytest.raises(InputError):
        body_from_dict({"kind": "box", "p": 3, "halfwidths": [1.0, 1.0]})


@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_batched_hull_gauge_matches_two_phase_solver(p):
    rng = np.random.default_rng(10 + p)
    V = np.vstack([rng.normal(size=(3 * p + 5, p)), 0.3 * np.eye(p), -0.3 * np.eye(p)])
    hull = PointHull(V)
    x = rng.normal(size=(100, p)) * 3
    ref = np.array([hull._gauge_one(xi) for xi in x])
    assert np.allclose(hull.minkowski(x), ref, rtol=1e-10)


def test_tiny_points_keep_homogeneity():
    hull = PointHull(CROSS)
    assert minkowski(hull, [1e-310, 0.0]) == pytest.approx(1e-310, rel=1e-9)
    assert minkowski(Ball(2), [3e-320, 0.0]) > 0
