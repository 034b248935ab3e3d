"""Quantile discretization and the monotone partial matching DP.

The DP oracle is exhaustive enumeration over all sink subsets.
"""

from itertools import combinations

import numpy as np
import pytest

from usdot.ddot import dd_partial_transport, discretize
from usdot.density import hat, truncated_gaussian, uniform


def test_discretize_uniform_closed_form():
    pts = discretize(uniform(0.0, 1.0), 4)
    assert pts == pytest.approx([0.125, 0.375, 0.625, 0.875], abs=1e-15)
    pts = discretize(uniform(2.0, 6.0, mass=3.0), 2)
    assert pts == pytest.approx([3.0, 5.0], abs=1e-14)


def test_discretize_hat_closed_form():
    # F(x) = (1+x)^2/2 on [-1,0]; quantile q -> sqrt(2q) - 1
    pts = discretize(hat(-1.0, 1.0), 2)
    assert pts == pytest.approx([np.sqrt(0.5) - 1.0, 1.0 - np.sqrt(0.5)], abs=1e-14)


def test_discretize_is_sorted_and_converges():
    d = truncated_gaussian(0.3, 0.7, -2.0, 3.0)
    pts = discretize(d, 2000)
    assert np.all(np.diff(pts) >= 0.0)
    l, u = d.support
    assert pts[0] >= l and pts[-1] <= u
    mean_ref = d.moments(l, u)[1]
    assert abs(pts.mean() - mean_ref) < 1e-4
    with pytest.raises(ValueError):
        discretize(d, 0)


def brute_force(x, t):
    n, m = len(x), len(t)
    best, best_c = None, np.inf
    for comb in combinations(range(m), n):
        c = sum((x[i] - t[j]) ** 2 for i, j in enumerate(comb))
        if c < best_c:
            best, best_c = comb, c
    return np.array(best, dtype=np.int64), best_c


def test_dp_matches_exhaustive_enumeration():
    rng = np.random.default_rng(40)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(n, 11))
        x = np.sort(rng.uniform(-2.0, 2.0, n))
        t = np.sort(rng.uniform(-2.0, 2.0, m))
        got = dd_partial_transport(x, t)
        ref_assign, ref_cost = brute_force(x, t)
        assert got.cost == pytest.approx(ref_cost, abs=1e-12)
        # the optimum can be non-unique; check ours is valid and optimal
        assert np.all(np.diff(got.assignment) >= 1)
        own = float(((x - t[got.assignment]) ** 2).sum())
        assert own == pytest.approx(got.cost, abs=1e-12)


def test_dp_simple_cases():
    r = dd_partial_transport(np.array([0.0]), np.array([-1.0, 0.2]))
    assert list(r.assignment) == [1]
    assert r.cost == pytest.approx(0.04, abs=1e-15)
    # equal sizes force the identity
    x = np.array([0.0, 1.0, 2.0])
    r = dd_partial_transport(x, x + 0.1)
    assert list(r.assignment) == [0, 1, 2]
    assert r.cost == pytest.approx(3 * 0.01, abs=1e-14)
    r = dd_partial_transport(np.array([]), np.array([1.0]))
    assert r.assignment.size == 0 and r.cost == 0.0


def test_dp_input_validation():
    with pytest.raises(ValueError, match="more sources"):
        dd_partial_transport(np.array([0.0, 1.0]), np.array([0.5]))
    with pytest.raises(ValueError, match="sorted"):
        dd_partial_transport(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError, match="sorted"):
        dd_partial_transport(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_dp_larger_instances_stay_monotone():
    rng = np.random.default_rng(41)
    for _ in range(5):
        x = np.sort(rng.normal(0.0, 1.0, 50))
        t = np.sort(rng.normal(0.5, 1.2, 400))
        r = dd_partial_transport(x, t)
        assert r.assignment.size == 50
        assert np.all(np.diff(r.assignment) >= 1)
        assert r.cost >= 0.0
        # any injective monotone assignment is feasible, so it bounds the optimum
        spread = np.linspace(0, 399, 50).round().astype(int)
        assert np.all(np.diff(spread) >= 1)
        assert r.cost <= float(((x - t[spread]) ** 2).sum()) + 1e-12
