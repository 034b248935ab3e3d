"""End-to-end command line runs: outputs, golden determinism, exit codes."""

import subprocess
import sys
import warnings

import numpy as np
import pytest

from usdot.cli import main, parse_problem

HALF_PROB = """\
usdot-problem v1
density uniform 0 1
diracs 0 : 0.5
eps 0.1
"""

TWO_PROB = """\
usdot-problem v1
# symmetric pair on the unit interval
density uniform 0 1
diracs 0.25 0.75 : 0.25 0.25
eps 0.05
"""


@pytest.fixture
def half(tmp_path):
    p = tmp_path / "half.prob"
    p.write_text(HALF_PROB)
    return str(p)


@pytest.fixture
def two(tmp_path):
    p = tmp_path / "two.prob"
    p.write_text(TWO_PROB)
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_solve_half_dirac(half, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve", half, "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "status converged" in text
    assert "dual value" in text
    # sharp cell masses at the smoothed potential overshoot slightly
    moved = float(text.split("transported mass")[1].split()[0])
    assert moved == pytest.approx(0.5, abs=0.01)
    assert "of 0.5" in text

    header, rows = read_csv(out / "cells.csv")
    assert header == ["i", "y", "alpha", "psi", "mass", "cell_left", "cell_right", "barycenter"]
    assert len(rows) == 1
    psi = float(rows[0][3])
    assert abs(psi - 0.25334225654160297) < 1e-7
    assert abs(float(rows[0][4]) - 0.5) < 0.01
    report = (out / "report.txt").read_text()
    assert "status converged" in report


def test_solve_csv_is_byte_deterministic(two, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", two, "-o", str(a)]) == 0
    assert main(["solve", two, "-o", str(b)]) == 0
    assert (a / "cells.csv").read_bytes() == (b / "cells.csv").read_bytes()


def test_solve_eps_override_and_schedule(half, tmp_path, capsys):
    assert main(["solve", half, "--eps", "0.2"]) == 0
    assert "eps 0.2" in capsys.readouterr().out

    p = tmp_path / "sched.prob"
    p.write_text(HALF_PROB.replace("eps 0.1", "schedule 0.2 0.1 0.05"))
    assert main(["solve", str(p)]) == 0
    text = capsys.readouterr().out
    assert text.count("status converged") == 3
    assert "eps 0.05" in text


def test_convergence_slope(half, tmp_path, capsys):
    csv = tmp_path / "rate.csv"
    code = main([
        "convergence", half,
        "--eps-from", "0.2", "--eps-to", "0.0125", "-o", str(csv),
    ])
    assert code == 0
    text = capsys.readouterr().out
    slope = float(text.split("slope")[1].split()[0])
    assert 1.8 <= slope <= 2.2
    header, rows = read_csv(csv)
    assert header == ["eps", "err"]
    assert len(rows) == 5
    eps_col = [float(r[0]) for r in rows]
    assert eps_col == pytest.approx([0.2, 0.1, 0.05, 0.025, 0.0125])
    errs = [float(r[1]) for r in rows]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_diagnose_all_pass(half, capsys):
    assert main(["diagnose", half]) == 0
    text = capsys.readouterr().out
    for name in ("solve", "eps-below-eps0", "eigenvalue-bound", "psi-bounds",
                 "eps-derivative-bound", "ode-residual", "connectivity"):
        assert f"{name}: " in text
    assert "FAIL" not in text
    assert text.rstrip().endswith("all checks PASS")


def test_diagnose_eps_too_large_fails(half, capsys):
    # eps0 = alpha_min / (2 rho_max) = 0.25 here, so eps 0.5 violates the gate
    assert main(["diagnose", half, "--eps", "0.5"]) == 3
    text = capsys.readouterr().out
    assert "eps-below-eps0: FAIL" in text
    assert "check(s) FAILED" in text


def test_dd_compare(two, tmp_path, capsys):
    csv = tmp_path / "dd.csv"
    assert main(["dd-compare", two, "--m-list", "50,400", "-o", str(csv)]) == 0
    text = capsys.readouterr().out
    assert "semi-discrete: cost" in text
    assert "m 50:" in text and "m 400:" in text
    header, rows = read_csv(csv)
    assert header == ["m", "barycenter_err", "cost_dd", "cost_sd"]
    assert [int(r[0]) for r in rows] == [50, 400]
    # finer clouds track the continuous barycenters better
    assert float(rows[1][1]) < float(rows[0][1])
    # both costs approximate the same transport
    assert float(rows[1][2]) == pytest.approx(float(rows[1][3]), rel=0.2)


def test_dd_compare_threaded_identical(two, tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["dd-compare", two, "--m-list", "50,100,200", "-o", str(a)]) == 0
    monkeypatch.setenv("USDOT_THREADS", "3")
    assert main(["dd-compare", two, "--m-list", "50,100,200", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_register_roundtrip(tmp_path, capsys):
    rng = np.random.default_rng(3)
    base = np.stack([np.linspace(-1, 1, 30), np.zeros(30)], axis=1)
    ang = np.deg2rad(10.0)
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    src = tmp_path / "src.pts"
    tgt = tmp_path / "tgt.pts"
    np.savetxt(src, base @ rot.T + np.array([0.2, -0.1]))
    np.savetxt(tgt, base + rng.normal(0.0, 1e-3, base.shape))
    out = tmp_path / "reg"
    with warnings.catch_warnings():
        # histogram targets have zero-density bins; some directions stall
        warnings.simplefilter("ignore", UserWarning)
        code = main([
            "register", str(src), str(tgt),
            "--iters", "3", "--k", "8", "--thickness", "0.05", "-o", str(out),
        ])
    assert code == 0
    assert "iterations" in capsys.readouterr().out
    rot_rows = (out / "transform.txt").read_text().splitlines()
    assert len(rot_rows) == 3  # two rotation rows plus the translation
    header, rows = read_csv(out / "rmse.csv")
    assert header == ["iteration", "rms_displacement"]
    assert len(rows) == 3
    pts = np.loadtxt(out / "registered.pts")
    assert pts.shape == (30, 2)


def test_register_off_target(tmp_path):
    src = tmp_path / "src.pts"
    pts = np.array([[0.2, 0.2, 0.0], [0.5, 0.3, 0.1], [0.4, 0.6, 0.2]])
    np.savetxt(src, pts)
    off = tmp_path / "tet.off"
    off.write_text(
        "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
        "3 0 1 2\n3 0 1 3\n3 0 2 3\n3 1 2 3\n"
    )
    out = tmp_path / "reg3d"
    code = main([
        "register", str(src), str(off),
        "--iters", "2", "--k", "6", "--mass-ratio", "0.3", "-o", str(out),
    ])
    assert code == 0
    assert np.loadtxt(out / "registered.pts").shape == (3, 3)
    # 3D transform file: three rotation rows plus the translation
    assert len((out / "transform.txt").read_text().splitlines()) == 4


def test_parse_errors_exit_one(half, tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.prob")]) == 1
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.prob"
    bad.write_text("not a problem file\n")
    assert main(["solve", str(bad)]) == 1

    noeps = tmp_path / "noeps.prob"
    noeps.write_text("usdot-problem v1\ndensity uniform 0 1\ndiracs 0 : 0.5\n")
    assert main(["solve", str(noeps)]) == 1
    assert "no eps" in capsys.readouterr().err

    assert main(["convergence", half, "--eps-from", "0.1", "--eps-to", "0.2"]) == 1
    assert main(["dd-compare", half, "--m-list", "0"]) == 1
    assert main(["nonsense"]) == 1
    assert main([]) == 1


def test_parse_problem_grammar():
    prob = parse_problem(
        "usdot-problem v1\n"
        "density hat -1 1\n"
        "diracs-uniform 5 -0.5 0.5 0.6\n"
        "eps 0.07\ntol 1e-8\nmax-iter 77\nmass-floor 0.2\nseed 9\n"
    )
    assert prob.diracs.n == 5
    assert prob.diracs.alpha_total == pytest.approx(0.6)
    assert prob.eps == 0.07 and prob.tol == 1e-8
    assert prob.max_iter == 77 and prob.mass_floor == 0.2
    with pytest.raises(ValueError, match="header"):
        parse_problem("density uniform 0 1\n")
    with pytest.raises(ValueError, match="unknown problem key"):
        parse_problem("usdot-problem v1\ndensity uniform 0 1\ndiracs 0 : 0.1\nwat 3\n")
    with pytest.raises(ValueError, match="needs a density"):
        parse_problem("usdot-problem v1\ndiracs 0 : 0.1\n")


def test_module_entrypoint_subprocess(half):
    proc = subprocess.run(
        [sys.executable, "-m", "usdot", "solve", half],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "status converged" in proc.stdout
