"""Damped Newton solves: frozen roots, tolerance contract, continuation.

The half-Dirac-on-uniform instance has a scalar optimality equation
(1/2) sqrt(psi - eps^2) + (psi / (2 eps)) arcsin(eps / sqrt(psi)) = 1/2
whose brentq roots are frozen below to 17 digits.
"""

import dataclasses

import numpy as np
import pytest

from usdot.cells import SortedDiracs, layout, masses
from usdot.density import truncated_gaussian, uniform
from usdot.regularization import RegParams, reg_masses
from usdot.solver import (
    SolverConfig,
    solve_regularized,
    solve_unregularized,
    solve_with_continuation,
)

U = uniform(0.0, 1.0)
HALF = SortedDiracs(np.array([0.0]), np.array([0.5]))

# scalar bisection roots of the closed-form mass equation
ROOTS = {
    0.2: 0.26347784419110659,
    0.1: 0.25334225654160297,
    0.05: 0.25083388941975832,
    0.02: 0.25013334755772382,
}


def rand_problem(rng, d, n, frac=0.6):
    l, u = d.support
    y = np.sort(rng.uniform(l - 0.2, u + 0.2, n))
    while n > 1 and np.any(np.diff(y) < 0.05):
        y = np.sort(rng.uniform(l - 0.2, u + 0.2, n))
    alpha = rng.uniform(0.2, 1.0, n)
    alpha *= frac * d.total_mass / alpha.sum()
    return SortedDiracs(y, alpha, source_mass=d.total_mass)


def test_half_dirac_frozen_roots():
    for eps, root in ROOTS.items():
        rep = solve_regularized(U, HALF, SolverConfig(eps=eps))
        assert rep.converged
        # the mass residual tolerance translates to ~1e-11 in psi here
        assert abs(float(rep.psi[0]) - root) < 1e-10
        # residual contract: relative to the smaller of alpha_min, alpha_inf
        p = RegParams.from_problem(U, HALF, eps)
        res = np.abs(reg_masses(U, HALF, rep.psi, p) - HALF.alpha).max()
        assert res <= 1e-10 * 0.5


def test_report_fields():
    rep = solve_regularized(U, HALF, SolverConfig(eps=0.1))
    assert rep.eps == 0.1
    assert rep.iterations <= 200
    assert rep.residual_history[-1] <= 1e-10 * 0.5
    assert all(0.0 < s <= 1.0 for s in rep.step_sizes)
    assert rep.diagnostics["eps"] == 0.1
    assert {"lambda_min", "fiedler_bound", "psi_bounds_ok", "q_norm"} <= set(rep.diagnostics)
    rep = solve_regularized(U, HALF, SolverConfig(eps=0.1, collect_diagnostics=False))
    assert rep.diagnostics == {}


def test_warm_start_converges_immediately():
    rep = solve_regularized(U, HALF, SolverConfig(eps=0.1))
    rep2 = solve_regularized(U, HALF, SolverConfig(eps=0.1), init=rep.psi)
    assert rep2.converged
    assert rep2.iterations == 0


def test_loose_tolerance_stops_early():
    tight = solve_regularized(U, HALF, SolverConfig(eps=0.05))
    loose = solve_regularized(U, HALF, SolverConfig(eps=0.05, tol=1e-4))
    assert loose.converged
    assert loose.iterations <= tight.iterations
    assert loose.residual_history[-1] <= 1e-4 * 0.5


def test_max_iter_reported():
    rep = solve_regularized(U, HALF, SolverConfig(eps=0.02, max_iter=1))
    assert rep.status in ("max_iter", "converged")
    # a one-step budget cannot reach 1e-10 from the cold start here
    assert not rep.converged
    assert rep.iterations == 1


def test_bad_inputs_raise():
    with pytest.raises(ValueError):
        SolverConfig(eps=0.0)
    with pytest.raises(ValueError):
        SolverConfig(mass_floor=1.0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError, match="below the source mass"):
        SortedDiracs(np.array([0.5]), np.array([1.0]), source_mass=1.0)
    # weights legal against their own source_mass but not against this density
    heavy = SortedDiracs(np.array([0.5]), np.array([1.0]), source_mass=2.0)
    with pytest.raises(ValueError, match="sum to less"):
        solve_regularized(U, heavy, SolverConfig(eps=0.1))


def test_continuation_default_schedule():
    cfg = SolverConfig(eps=0.2, eps_target=0.05)
    chain = solve_with_continuation(U, HALF, cfg)
    assert [e for e, _ in chain] == [0.2, 0.1, 0.05]
    assert all(rep.converged for _, rep in chain)
    for eps, rep in chain:
        assert abs(float(rep.psi[0]) - ROOTS[eps]) < 1e-10
    # warm starts make later stages cheap
    assert chain[-1][1].iterations <= chain[0][1].iterations + 2


def test_continuation_explicit_schedule_and_validation():
    chain = solve_with_continuation(U, HALF, SolverConfig(eps=0.2), schedule=[0.2, 0.05])
    assert [e for e, _ in chain] == [0.2, 0.05]
    with pytest.raises(ValueError):
        solve_with_continuation(U, HALF, SolverConfig(eps=0.2), schedule=[0.1, 0.2])
    with pytest.raises(ValueError):
        solve_with_continuation(U, HALF, SolverConfig(eps=0.2), schedule=[0.1, -0.05])
    with pytest.raises(ValueError):
        solve_with_continuation(U, HALF, SolverConfig(eps=0.1, eps_target=0.2))


def test_unregularized_two_dirac_exact():
    ds = SortedDiracs(np.array([0.25, 0.75]), np.array([0.25, 0.25]))
    rep = solve_unregularized(U, ds)
    assert rep.converged
    assert np.abs(rep.psi - 1 / 64).max() < 1e-10
    rep = solve_unregularized(U, HALF)
    assert rep.converged
    assert abs(float(rep.psi[0]) - 0.25) < 1e-10


def test_unregularized_matches_masses():
    rng = np.random.default_rng(30)
    dens = [U, truncated_gaussian(0.0, 1.0, -3.0, 3.0)]
    for k in range(8):
        d = dens[k % 2]
        ds = rand_problem(rng, d, int(rng.integers(2, 8)))
        rep = solve_unregularized(d, ds)
        assert rep.converged
        g = masses(d, layout(d, ds, rep.psi))
        tol_abs = 1e-10 * min(ds.alpha_min, d.total_mass - ds.alpha_total)
        assert np.abs(g - ds.alpha).max() <= tol_abs


def test_unregularized_agrees_with_continuation():
    rng = np.random.default_rng(31)
    for _ in range(5):
        ds = rand_problem(rng, U, 5)
        direct = solve_unregularized(U, ds)
        chain = solve_with_continuation(
            U, ds, SolverConfig(eps=0.1, eps_target=1e-6, collect_diagnostics=False)
        )
        assert direct.converged and chain[-1][1].converged
        assert np.abs(direct.psi - chain[-1][1].psi).max() < 1e-6


def test_packed_clusters_converge():
    """Tight clusters exercise the isotonic slot initialization."""
    y = np.concatenate([0.2 + 0.01 * np.arange(4), 0.8 + 0.01 * np.arange(4)])
    alpha = np.full(8, 0.9 / 8)
    ds = SortedDiracs(y, alpha)
    rep = solve_regularized(U, ds, SolverConfig(eps=0.05))
    assert rep.converged
    rep = solve_unregularized(U, ds)
    assert rep.converged


def test_diracs_outside_support():
    ds = SortedDiracs(np.array([-0.5, 1.4]), np.array([0.3, 0.3]))
    rep = solve_regularized(U, ds, SolverConfig(eps=0.1))
    assert rep.converged
    p = RegParams.from_problem(U, ds, 0.1)
    g = reg_masses(U, ds, rep.psi, p)
    assert np.abs(g - 0.3).max() <= 1e-10 * 0.3
    # balls must reach into the support from outside
    assert rep.psi[0] > 0.25
