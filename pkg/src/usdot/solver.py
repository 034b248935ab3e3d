"""Damped Newton solvers for the smoothed and exact dual problems.

The smoothed dual is concave and C^2 with tridiagonal Hessian, so Newton
steps are one Thomas solve each.  A backtracking line search halves the
relaxation until the trial keeps every cell mass and the inactive mass
above a fixed fraction of its target and gains a fixed fraction of the
predicted dual ascent (up to the integration noise of the dual value).
Decreasing the thickening width with warm starts (continuation) tracks the
solution curve down to tiny eps; the unregularized problem is solved by
the same damped iteration on the exact masses with the one-sided
generalized Jacobian, falling back to continuation if a step stalls.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from . import spectral
from .cells import SortedDiracs, directional_derivative, dual_value, layout, masses
from .density import Density1D, _quantiles
from .regularization import RegParams, _assemble, eps_derivative
from .tridiag import TridiagSym, tridiag_solve


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the damped Newton iteration.

    tol is relative: the stopping test is
    max_i |G_i - alpha_i| <= tol * min(alpha_min, alpha_inf).
    mass_floor is the fraction tau of each target mass every accepted
    iterate must keep.  eps is the thickening width (also the continuation
    start); eps_target ends the continuation schedule.
    """

    eps: float = 0.1
    tol: float = 1e-10
    max_iter: int = 200
    mass_floor: float = 0.1
    min_step: float = 2.0**-20
    continuation_factor: float = 0.5
    eps_target: float | None = None
    collect_diagnostics: bool = True

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.mass_floor < 1.0:
            raise ValueError("mass_floor must lie in (0, 1)")
        if not self.tol > 0.0 or self.max_iter < 1:
            raise ValueError("bad tolerance or iteration budget")


@dataclass
class SolverReport:
    """Outcome of one solve.

    status is one of "converged", "max_iter", "stalled", "singular"; the
    final residual satisfies the tolerance iff status == "converged".
    """

    psi: np.ndarray
    status: str
    iterations: int
    eps: float | None
    residual_history: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _check_masses(d: Density1D, diracs: SortedDiracs) -> float:
    alpha_inf = d.total_mass - diracs.alpha_total
    if not alpha_inf > 0.0:
        raise ValueError("Dirac weights must sum to less than the density mass")
    return alpha_inf


def _initial_psi(
    d: Density1D, diracs: SortedDiracs, floors, floor_inf, mass_fn, eps
) -> np.ndarray:
    """Feasible start from mass slots aligned with the Dirac positions.

    Each Dirac gets a window of cumulative mass alpha_i whose center is
    placed as close to F(y_i) as the ordering allows (an isotonic fit of
    the slot centers), so the leftover mass sits wherever the geometry
    wants it, including between clusters.  Cell walls are pinned mid-gap
    by the psi recurrence, which a uniform lift of psi leaves unchanged;
    lifting into the saturated regime (every ball covers its window with
    eps to spare) gives each interior cell exactly its target mass.  If
    the lifted balls poke far enough past their windows to eat too much
    of the slack, a bisection finds the smallest lift clearing the
    per-cell floors.
    """
    y, alpha = diracs.y, diracs.alpha
    alpha_inf = d.total_mass - diracs.alpha_total
    cum = np.cumsum(alpha)
    centers = isotonic_regression(d.cdf(y) - cum + 0.5 * alpha).x
    centers = np.clip(centers, 0.0, alpha_inf) + cum - 0.5 * alpha
    wlo = _quantiles(d, centers - 0.5 * alpha)
    whi = _quantiles(d, centers + 0.5 * alpha)
    raw = np.zeros(diracs.n)
    if diracs.n > 1:
        dy = np.diff(y)
        mid = 0.5 * (y[:-1] + y[1:])
        wall_levels = 0.5 * (centers[:-1] + 0.5 * alpha[:-1] + centers[1:] - 0.5 * alpha[1:])
        raw[1:] = np.cumsum(2.0 * dy * (mid - _quantiles(d, wall_levels)))
    dist = np.maximum(np.abs(wlo - y), np.abs(whi - y))
    c_hi = float(np.max(eps * eps + dist * dist - raw))
    psi = raw + c_hi
    g = mass_fn(psi)
    if d.total_mass - g.sum() >= floor_inf and np.all(g >= floors):
        return psi
    lo_c = float(-raw.min())
    for _ in range(80):
        mid_c = 0.5 * (lo_c + c_hi)
        if np.all(mass_fn(raw + mid_c) >= floors):
            c_hi = mid_c
        else:
            lo_c = mid_c
    return raw + c_hi


def _newton_loop(d, diracs, config, psi0, evaluate, jacobian, eps_label, init_eps):
    """Shared damped ascent: evaluate() -> (G, K), jacobian(psi) -> TridiagSym."""
    alpha = diracs.alpha
    alpha_inf = _check_masses(d, diracs)
    tol_abs = config.tol * min(diracs.alpha_min, alpha_inf)
    floors = config.mass_floor * alpha
    floor_inf = config.mass_floor * alpha_inf

    psi = psi0.copy()
    g, kval = evaluate(psi)
    history, steps = [], []
    status = "max_iter"
    reinit_done = False
    it = 0
    best_res, best_psi, since_best = np.inf, psi, 0
    while it < config.max_iter:
        res = float(np.abs(g - alpha).max())
        history.append(res)
        if res <= tol_abs:
            status = "converged"
            break
        if res < best_res * (1.0 - 1e-3):
            best_res, best_psi, since_best = res, psi, 0
        elif steps and steps[-1] == 1.0:
            # undamped steps that no longer improve the residual mean it
            # sits at the rounding floor of the wall positions (e.g. for
            # near-duplicate Diracs); stop instead of cycling to max_iter
            since_best += 1
            if since_best >= 12:
                status = "stalled"
                psi = best_psi
                break
        it += 1
        h = jacobian(psi)
        direction = None
        try:
            direction = tridiag_solve(h, alpha - g)
        except ValueError:
            # rank loss (cell walls inside zero-density spans): ridge the
            # diagonal so the dead components take damped gradient steps
            scale = float(np.abs(h.diag).max()) or 1.0
            for lam in (1e-10, 1e-7, 1e-4, 1e-1):
                try:
                    ridged = TridiagSym(h.diag + lam * scale, h.off)
                    direction = tridiag_solve(ridged, alpha - g)
                    break
                except ValueError:
                    continue
        if direction is None:
            if not reinit_done:
                reinit_done = True
                psi = _initial_psi(
                    d, diracs, floors, floor_inf, lambda p: evaluate(p)[0], init_eps
                )
                g, kval = evaluate(psi)
                continue
            status = "singular"
            break
        # predicted ascent d'Hd; the acceptance test asks for a tenth of it
        # but never less than the integration noise of the dual value
        gain = float(np.dot(alpha - g, direction))
        noise = 1e-12 * max(1.0, abs(kval))
        eta = 1.0
        accepted = False
        while eta >= config.min_step:
            trial = psi + eta * direction
            gt, kt = evaluate(trial)
            floors_ok = np.all(gt >= floors) and (d.total_mass - gt.sum()) >= floor_inf
            if floors_ok and kt >= kval + 0.1 * eta * gain - noise:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            status = "stalled"
            break
        psi, g, kval = trial, gt, kt
        steps.append(eta)
    else:
        history.append(float(np.abs(g - alpha).max()))
        if history[-1] <= tol_abs:
            status = "converged"
    return SolverReport(
        psi=psi,
        status=status,
        iterations=it,
        eps=eps_label,
        residual_history=history,
        step_sizes=steps,
    )


def _diagnostics(d, diracs, psi, eps, hess):
    params = RegParams.from_problem(d, diracs, eps)
    n = diracs.n
    lam = spectral.min_eig_sym(hess)
    beta = d.rho_min / (4.0 * params.R)
    fiedler = (4.0 * beta / (n + 1)) * np.sin(np.pi / (2 * n + 2)) ** 2
    sq = np.sqrt(np.maximum(psi, 0.0))
    q = eps_derivative(d, diracs, psi, params)
    return {
        "eps": eps,
        "eps0": params.eps0,
        "eps_lt_eps0": bool(eps < params.eps0),
        "assumption_ok": d.assumption_ok,
        "lambda_min": lam,
        "beta": beta,
        "fiedler_bound": float(fiedler),
        "lambda_ok": bool(lam >= fiedler - 1e-12),
        "psi_bounds_ok": bool(np.all(sq >= params.r - 1e-12) and np.all(sq <= params.R + 1e-12)),
        "q_norm": float(np.linalg.norm(q)),
        "q_bound": float(4.0 * d.rho_max**2 / diracs.alpha_min * np.sqrt(n) * eps),
    }


def solve_regularized(
    d: Density1D, diracs: SortedDiracs, config: SolverConfig, init=None
) -> SolverReport:
    """Newton solve of G^eps(psi) = alpha at fixed thickening width."""
    eps = config.eps
    alpha_inf = _check_masses(d, diracs)
    floors = config.mass_floor * diracs.alpha
    floor_inf = config.mass_floor * alpha_inf

    def evaluate(psi):
        res = _assemble(d, diracs, psi, eps, {"g", "value"})
        return res["g"], float(np.dot(diracs.alpha, psi) - res["kint"])

    def jacobian(psi):
        res = _assemble(d, diracs, psi, eps, {"hess"})
        return TridiagSym(res["hdiag"], res["off"])

    if init is None:
        psi0 = _initial_psi(d, diracs, floors, floor_inf, lambda p: evaluate(p)[0], eps)
    else:
        psi0 = np.asarray(init, dtype=float).copy()
    report = _newton_loop(d, diracs, config, psi0, evaluate, jacobian, eps, eps)
    if config.collect_diagnostics:
        report.diagnostics = _diagnostics(d, diracs, report.psi, eps, jacobian(report.psi))
    return report


def solve_with_continuation(
    d: Density1D, diracs: SortedDiracs, config: SolverConfig, schedule=None
) -> list[tuple[float, SolverReport]]:
    """Warm-started solves along a decreasing eps schedule.

    Returns [(eps, report), ...] in schedule order; a stage that fails to
    converge aborts the rest of the schedule.
    """
    if schedule is None:
        target = config.eps_target if config.eps_target is not None else config.eps
        if not 0.0 < target <= config.eps:
            raise ValueError("eps_target must lie in (0, eps]")
        schedule = [config.eps]
        while schedule[-1] > target * (1.0 + 1e-12):
            schedule.append(max(schedule[-1] * config.continuation_factor, target))
    schedule = [float(e) for e in schedule]
    if not schedule or any(e <= 0 for e in schedule) or any(
        b >= a for a, b in zip(schedule, schedule[1:])
    ):
        raise ValueError("schedule must be positive and strictly decreasing")

    out = []
    psi = None
    for e in schedule:
        stage = dataclasses.replace(config, eps=e)
        rep = solve_regularized(d, diracs, stage, init=psi)
        out.append((e, rep))
        if not rep.converged:
            break
        psi = rep.psi
    return out


def solve_unregularized(
    d: Density1D, diracs: SortedDiracs, config: SolverConfig | None = None
) -> SolverReport:
    """Damped generalized-Newton solve of the exact mass equations G(psi) = alpha.

    The Jacobian is the tridiagonal generalized differential of the cell
    masses.  If the iteration stalls (the exact dual is only piecewise
    smooth), the solve falls back to continuation down to a tiny width and
    polishes from there.
    """
    config = config or SolverConfig()
    alpha_inf = _check_masses(d, diracs)
    floors = config.mass_floor * diracs.alpha
    floor_inf = config.mass_floor * alpha_inf

    def evaluate(psi):
        lay = layout(d, diracs, psi)
        return masses(d, lay), dual_value(d, diracs, psi)

    def jacobian(psi):
        g = evaluate(psi)[0]
        _, h = directional_derivative(d, diracs, psi, diracs.alpha - g)
        return h

    psi0 = _initial_psi(d, diracs, floors, floor_inf, lambda p: evaluate(p)[0], 0.0)
    report = _newton_loop(d, diracs, config, psi0, evaluate, jacobian, None, 0.0)
    if not report.converged:
        target = config.eps_target if config.eps_target is not None else 1e-6
        chain = solve_with_continuation(
            d, diracs, dataclasses.replace(config, eps_target=target, collect_diagnostics=False)
        )
        if chain[-1][1].converged:
            polish = _newton_loop(
                d, diracs, config, chain[-1][1].psi, evaluate, jacobian, None, 0.0
            )
            polish.residual_history = report.residual_history + polish.residual_history
            report = polish
    return report
