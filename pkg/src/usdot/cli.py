"""Command-line front end: solves, convergence study, diagnostics, comparisons.

Problem files are plain text with a `usdot-problem v1` header; see the
README for the full key reference.  All CSV artifacts use a header row and
17 significant digits so doubles round-trip exactly, and their bytes are
deterministic given the problem file and seed.  Exit codes: 0 success,
1 bad input, 2 solver failure, 3 diagnostics check failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import ddot, sliced, spectral
from .cells import SortedDiracs, barycenters, dual_value, layout, masses
from .density import Density1D, build_density
from .regularization import RegParams, eps_derivative, reg_hessian
from .solver import SolverConfig, solve_regularized, solve_unregularized, solve_with_continuation

HEADER = "usdot-problem v1"


@dataclass
class Problem:
    density: Density1D
    diracs: SortedDiracs
    eps: float | None
    schedule: list | None
    tol: float
    max_iter: int
    mass_floor: float
    seed: int


def parse_problem(text: str) -> Problem:
    """Parse the schema-versioned problem format (see module docstring)."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0] != HEADER:
        raise ValueError(f"problem file must start with the header line {HEADER!r}")

    density = None
    positions = weights = None
    eps = None
    schedule = None
    tol, max_iter, mass_floor, seed = 1e-10, 200, 0.1, 0
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "density":
            density = build_density(rest)
        elif key == "diracs":
            left, sep, right = rest.partition(":")
            if not sep:
                raise ValueError("diracs line needs positions : weights")
            positions = np.array(left.split(), dtype=float)
            weights = np.array(right.split(), dtype=float)
            if positions.size != weights.size or positions.size == 0:
                raise ValueError("diracs positions and weights must match and be nonempty")
        elif key == "diracs-uniform":
            toks = rest.split()
            if len(toks) != 4:
                raise ValueError("diracs-uniform needs: count lo hi total-weight")
            count, lo, hi, total = int(toks[0]), float(toks[1]), float(toks[2]), float(toks[3])
            if count < 1:
                raise ValueError("diracs-uniform count must be positive")
            positions = np.linspace(lo, hi, count)
            weights = np.full(count, total / count)
        elif key == "eps":
            eps = float(rest)
        elif key == "schedule":
            schedule = [float(t) for t in rest.split()]
        elif key == "tol":
            tol = float(rest)
        elif key == "max-iter":
            max_iter = int(rest)
        elif key == "mass-floor":
            mass_floor = float(rest)
        elif key == "seed":
            seed = int(rest)
        else:
            raise ValueError(f"unknown problem key {key!r}")
    if density is None:
        raise ValueError("problem file needs a density line")
    if positions is None:
        raise ValueError("problem file needs a diracs or diracs-uniform line")
    order = np.argsort(positions, kind="stable")
    diracs = SortedDiracs(positions[order], weights[order], source_mass=density.total_mass)
    return Problem(density, diracs, eps, schedule, tol, max_iter, mass_floor, seed)


def load_problem(path: str) -> Problem:
    with open(path) as fh:
        return parse_problem(fh.read())


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _parallel_map(fn, items):
    """Ordered map, threaded when USDOT_THREADS allows it."""
    workers = int(os.environ.get("USDOT_THREADS", "1") or "1")
    workers = max(1, min(workers, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _solver_config(prob: Problem, eps: float, **over) -> SolverConfig:
    base = dict(
        eps=eps, tol=prob.tol, max_iter=prob.max_iter, mass_floor=prob.mass_floor
    )
    base.update(over)
    return SolverConfig(**base)


def _require_eps(prob: Problem, arg_eps) -> float:
    if arg_eps is not None:
        return float(arg_eps)
    if prob.eps is not None:
        return prob.eps
    raise ValueError("no eps given (set it in the problem file or pass --eps)")


# -- subcommands -------------------------------------------------------------


def _cmd_solve(args) -> int:
    prob = load_problem(args.problem)
    out = sys.stdout
    if args.schedule or prob.schedule:
        schedule = prob.schedule
        cfg = _solver_config(prob, schedule[0] if schedule else _require_eps(prob, args.eps))
        stages = solve_with_continuation(prob.density, prob.diracs, cfg, schedule=schedule)
        for e, rep in stages:
            out.write(
                f"eps {e:.6g}: status {rep.status}, iterations {rep.iterations}, "
                f"residual {rep.residual_history[-1]:.3e}\n"
            )
        rep = stages[-1][1]
        eps = stages[-1][0]
    else:
        eps = _require_eps(prob, args.eps)
        rep = solve_regularized(prob.density, prob.diracs, _solver_config(prob, eps))
        out.write(
            f"eps {eps:.6g}: status {rep.status}, iterations {rep.iterations}, "
            f"residual {rep.residual_history[-1]:.3e}\n"
        )
    lay = layout(prob.density, prob.diracs, rep.psi)
    g = masses(prob.density, lay)
    kval = dual_value(prob.density, prob.diracs, rep.psi)
    out.write(f"dual value {kval:.12g}\n")
    out.write(f"transported mass {g.sum():.12g} of {prob.diracs.alpha_total:.12g}\n")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        bary = barycenters(prob.density, lay)
        rows = [
            (i, prob.diracs.y[i], prob.diracs.alpha[i], rep.psi[i], g[i], lay.a[i], lay.b[i], bary[i])
            for i in range(prob.diracs.n)
        ]
        write_csv(
            os.path.join(args.out, "cells.csv"),
            ["i", "y", "alpha", "psi", "mass", "cell_left", "cell_right", "barycenter"],
            rows,
        )
        with open(os.path.join(args.out, "report.txt"), "w") as fh:
            fh.write(f"eps {_fmt(eps)}\n")
            fh.write(f"status {rep.status}\n")
            fh.write(f"iterations {rep.iterations}\n")
            fh.write(f"residual {_fmt(rep.residual_history[-1])}\n")
            fh.write(f"dual_value {_fmt(kval)}\n")
    return 0 if rep.converged else 2


def _cmd_convergence(args) -> int:
    prob = load_problem(args.problem)
    if not (0.0 < args.eps_to <= args.eps_from) or not 0.0 < args.factor < 1.0:
        raise ValueError("need 0 < eps-to <= eps-from and factor in (0, 1)")
    schedule = [args.eps_from]
    while schedule[-1] > args.eps_to * (1.0 + 1e-12):
        schedule.append(max(schedule[-1] * args.factor, args.eps_to))
    # reference potential: keep shrinking well past the smallest requested eps
    ref_eps = args.eps_to / 10.0
    full = list(schedule)
    while full[-1] > ref_eps * (1.0 + 1e-12):
        full.append(max(full[-1] * args.factor, ref_eps))
    cfg = _solver_config(prob, full[0])
    stages = solve_with_continuation(prob.density, prob.diracs, cfg, schedule=full)
    if not stages[-1][1].converged:
        sys.stderr.write("continuation failed before reaching the reference eps\n")
        return 2
    psi_ref = stages[-1][1].psi
    rows = []
    for e, rep in stages[: len(schedule)]:
        err = float(np.abs(rep.psi - psi_ref).max())
        rows.append((e, err))
    good = [(e, err) for e, err in rows if err > 0.0]
    if len(good) >= 2:
        le = np.log([e for e, _ in good])
        lr = np.log([err for _, err in good])
        slope = float(np.polyfit(le, lr, 1)[0])
        sys.stdout.write(f"fitted log-log slope {slope:.4f} over {len(good)} stages\n")
    else:
        sys.stdout.write("too few nonzero errors to fit a slope\n")
    if args.out:
        write_csv(args.out, ["eps", "err"], rows)
    return 0


def _check_line(name, ok, detail) -> str:
    mark = "PASS" if ok else ("SKIP" if ok is None else "FAIL")
    return f"{name}: {mark} ({detail})\n"


def _cmd_diagnose(args) -> int:
    prob = load_problem(args.problem)
    eps = _require_eps(prob, args.eps)
    cfg = _solver_config(prob, eps)
    rep = solve_regularized(prob.density, prob.diracs, cfg)
    if not rep.converged:
        sys.stderr.write(f"solver did not converge (status {rep.status})\n")
        return 2
    d, diracs = prob.density, prob.diracs
    params = RegParams.from_problem(d, diracs, eps)
    diag = rep.diagnostics
    out = sys.stdout
    failures = 0

    def emit(name, ok, detail):
        nonlocal failures
        if ok is False:
            failures += 1
        out.write(_check_line(name, ok, detail))

    emit(
        "solve",
        True,
        f"eps {eps:.6g}, {rep.iterations} iterations, residual {rep.residual_history[-1]:.3e}",
    )
    emit(
        "eps-below-eps0",
        None if not d.assumption_ok else diag["eps_lt_eps0"],
        f"eps {eps:.6g} vs eps0 {params.eps0:.6g}",
    )
    applicable = d.assumption_ok and diag["eps_lt_eps0"]
    emit(
        "eigenvalue-bound",
        diag["lambda_min"] >= diag["fiedler_bound"] - 1e-12 if d.assumption_ok else None,
        f"lambda_min {diag['lambda_min']:.6e} vs bound {diag['fiedler_bound']:.6e}",
    )
    emit(
        "psi-bounds",
        diag["psi_bounds_ok"] if applicable else None,
        f"sqrt(psi) in [{params.r:.6g}, {params.R:.6g}]",
    )
    emit(
        "eps-derivative-bound",
        diag["q_norm"] <= diag["q_bound"] + 1e-12 if applicable else None,
        f"|q| {diag['q_norm']:.6e} vs bound {diag['q_bound']:.6e}",
    )

    # ODE residual: H(psi) dpsi/deps + q = 0 along the solution curve
    delta = min(1e-4, 0.5 * eps)
    rep_hi = solve_regularized(d, diracs, replace(cfg, eps=eps + delta, collect_diagnostics=False), init=rep.psi)
    rep_lo = solve_regularized(d, diracs, replace(cfg, eps=eps - delta, collect_diagnostics=False), init=rep.psi)
    if rep_hi.converged and rep_lo.converged:
        dpsi = (rep_hi.psi - rep_lo.psi) / (2.0 * delta)
        h = reg_hessian(d, diracs, rep.psi, params)
        q = eps_derivative(d, diracs, rep.psi, params)
        res = float(np.linalg.norm(h.matvec(dpsi) + q))
        qn = float(np.linalg.norm(q))
        emit("ode-residual", res <= 1e-2 * qn if qn > 0 else None, f"residual {res:.3e} vs 1e-2*|q| {1e-2 * qn:.3e}")
    else:
        emit("ode-residual", False, "neighbouring solves failed")

    if d.assumption_ok:
        ext = spectral.laplacian_extension(reg_hessian(d, diracs, rep.psi, params))
        conn = spectral.connectivity_check(ext, diag["beta"])
        emit(
            "connectivity",
            bool(conn["connected"]),
            f"beta {diag['beta']:.6e}, components {conn['n_components']}",
        )
    else:
        emit("connectivity", None, "density touches zero; no positive beta available")

    out.write("all checks PASS\n" if failures == 0 else f"{failures} check(s) FAILED\n")
    return 0 if failures == 0 else 3


def _cmd_dd_compare(args) -> int:
    prob = load_problem(args.problem)
    d, diracs = prob.density, prob.diracs
    m_list = [int(t) for t in args.m_list.split(",") if t]
    if not m_list or any(m < 1 for m in m_list):
        raise ValueError("--m-list needs positive integers")

    t0 = time.perf_counter()
    cfg = SolverConfig(
        tol=prob.tol, max_iter=prob.max_iter, mass_floor=prob.mass_floor,
        eps=prob.eps if prob.eps is not None else 0.1,
        collect_diagnostics=False,
    )
    rep = solve_unregularized(d, diracs, cfg)
    sd_time = time.perf_counter() - t0
    if not rep.converged:
        sys.stderr.write(f"semi-discrete solve failed (status {rep.status})\n")
        return 2
    lay = layout(d, diracs, rep.psi)
    bary_sd = barycenters(d, lay)
    cost_sd = float(np.sum(d.moments(lay.a, lay.b, diracs.y)[2]))

    def one(m):
        t1 = time.perf_counter()
        sinks = ddot.discretize(d, m)
        k = np.maximum(1, np.round(diracs.alpha * m / d.total_mass).astype(int))
        if int(k.sum()) > m:
            raise ValueError(f"m={m} too small for {diracs.n} Diracs; increase m")
        sources = np.repeat(diracs.y, k)
        res = ddot.dd_partial_transport(sources, sinks)
        owner = np.repeat(np.arange(diracs.n), k)
        sums = np.bincount(owner, weights=sinks[res.assignment], minlength=diracs.n)
        bary_dd = sums / k
        err = float(np.sqrt(np.mean((bary_dd - bary_sd) ** 2)))
        cost_dd = float(res.cost * d.total_mass / m)
        return m, err, cost_dd, time.perf_counter() - t1

    results = _parallel_map(one, m_list)
    rows = [(m, err, cost_dd, cost_sd) for m, err, cost_dd, _ in results]
    out = sys.stdout
    out.write(f"semi-discrete: cost {cost_sd:.9g}, wall {sd_time:.3f}s\n")
    for (m, err, cost_dd, dd_time) in results:
        out.write(
            f"m {m}: barycenter rms error {err:.6e}, cost {cost_dd:.9g}, wall {dd_time:.3f}s\n"
        )
    if args.out:
        write_csv(args.out, ["m", "barycenter_err", "cost_dd", "cost_sd"], rows)
    return 0


def _cmd_register(args) -> int:
    src = sliced.read_points(args.source)
    if args.target.lower().endswith(".off"):
        target = sliced.read_off(args.target)
        if args.thickness is not None:
            target = sliced.TargetShape(
                target.kind, target.data, target.mass, target.bins, args.thickness
            )
    else:
        target = sliced.TargetShape.from_points(
            sliced.read_points(args.target), bins=args.bins, thickness=args.thickness
        )
    cloud = sliced.PointCloud(src)
    cfg = sliced.RegisterConfig(
        iterations=args.iters,
        n_directions=args.k,
        mass_ratio=args.mass_ratio,
        eps_rel=args.eps_rel,
        seed=args.seed,
        stop_tol=args.stop_tol,
    )
    res = sliced.register(cloud, target, cfg)
    sys.stdout.write(
        f"{len(res.rms_history)} iterations, final rms displacement {res.rms_history[-1]:.6e}\n"
    )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "transform.txt"), "w") as fh:
        for row in res.transform.rotation:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
        fh.write(" ".join(_fmt(v) for v in res.transform.translation) + "\n")
    write_csv(
        os.path.join(args.out, "rmse.csv"),
        ["iteration", "rms_displacement"],
        [(i + 1, r) for i, r in enumerate(res.rms_history)],
    )
    with open(os.path.join(args.out, "registered.pts"), "w") as fh:
        for p in res.points:
            fh.write(" ".join(_fmt(v) for v in p) + "\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="usdot",
        description="Semi-discrete partial optimal transport on the line.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem file")
    p.add_argument("problem")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--schedule", action="store_true", help="force the file's schedule")
    p.add_argument("-o", "--out", default=None, help="output directory for CSV + report")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("convergence", help="error vs eps study with log-log slope")
    p.add_argument("problem")
    p.add_argument("--eps-from", type=float, default=0.2)
    p.add_argument("--eps-to", type=float, default=1e-3)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("-o", "--out", default=None, help="rate CSV path")
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("diagnose", help="solve and verify the spectral guarantees")
    p.add_argument("problem")
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(fn=_cmd_diagnose)

    p = sub.add_parser("dd-compare", help="discrete-discrete vs semi-discrete")
    p.add_argument("problem")
    p.add_argument("--m-list", default="100,1000,10000")
    p.add_argument("-o", "--out", default=None, help="comparison CSV path")
    p.set_defaults(fn=_cmd_dd_compare)

    p = sub.add_parser("register", help="rigid registration of points onto a shape")
    p.add_argument("source", help="point file (one point per line)")
    p.add_argument("target", help="OFF mesh or point file")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mass-ratio", type=float, default=0.5)
    p.add_argument("--eps-rel", type=float, default=0.05)
    p.add_argument("--stop-tol", type=float, default=0.0)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--thickness", type=float, default=None)
    p.add_argument("-o", "--out", default="registration-out")
    p.set_defaults(fn=_cmd_register)
    return ap


def run_cli(argv) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (OSError, ValueError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


def main(argv=None) -> int:
    return run_cli(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
