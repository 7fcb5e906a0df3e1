import numpy as np
import pytest
from scipy.optimize import linprog

from homlc.errors import InputError
from homlc.lp import linprog_max


def _random_feasible(rng, m, n):
    A = rng.normal(size=(m, n))
    x0 = rng.exponential(size=n)
    b = A @ x0
    c = rng.normal(size=n)
    # a box row keeps the problem bounded
    A = np.vstack([A, np.ones(n)])
    b = np.append(b, x0.sum() + rng.exponential())
    A = np.hstack([A, np.zeros((m + 1, 1))])
    A[-1, -1] = 1.0
    c = np.append(c, 0.0)
    return c, A, b


@pytest.mark.parametrize("seed", range(25))
def test_matches_scipy_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 6)), int(rng.integers(3, 15))
    c, A, b = _random_feasible(rng, m, n)
    ours = linprog_max(c, A, b)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert ours.status == "optimal" and ref.status == 0
    assert ours.value == pytest.approx(-ref.fun, rel=1e-8, abs=1e-9)
    assert np.allclose(A @ ours.x, b, atol=1e-8)
    assert np.all(ours.x >= -1e-12)


def test_infeasible():
    # x1 + x2 = -1 with x >= 0
    res = linprog_max([1.0, 1.0], [[1.0, 1.0]], [-1.0])
    assert res.status == "infeasible"


def test_unbounded():
    res = linprog_max([1.0, 0.0], [[1.0, -1.0]], [0.0])
    assert res.status == "unbounded"


def test_degenerate_redundant_rows():
    A = [[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]]
    b = [1.0, 2.0, 1.0]
    res = linprog_max([1.0, 2.0, 0.0], A, b)
    assert res.status == "optimal"
    assert res.value == pytest.approx(2.0)


def test_deterministic():
    rng = np.random.default_rng(7)
    c, A, b = _random_feasible(rng, 3, 10)
    r1, r2 = linprog_max(c, A, b), linprog_max(c, A, b)
    assert np.array_equal(r1.x, r2.x) and r1.iterations == r2.iterations


def test_rejects_bad_dimensions_and_nan():
    with pytest.raises(InputError):
        linprog_max([1.0], [[1.0, 2.0]], [1.0])
    with pytest.raises(InputError):
        linprog_max([1.0, np.nan], [[1.0, 2.0]], [1.0])
