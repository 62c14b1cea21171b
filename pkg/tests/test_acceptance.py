"""Acceptance criteria, one test per criterion at the stated tolerances.

Each test records a single PASS/FAIL line; conftest prints them at the end of
the run.  Run this file alone with ``pytest tests/test_acceptance.py -v``.
"""

import subprocess
import sys
import time

import pytest

from lkcurv.boundary import morse_identity, verify_fu
from lkcurv.constructible import (
    bdk_global,
    bdk_local,
    corpus_functions,
    eta,
    euler_obstruction_basis,
    local_euler_obstruction,
)
from lkcurv.limits import euler_obstruction_via_curvature, scaled_limits, verify_global, verify_local_gb
from lkcurv.polar import sigma, verify_curv_polar
from lkcurv.variety import builtin

RESULTS: dict[int, str] = {}

COMPLEX_GERMS = ["smooth_line", "node", "cusp", "three_lines", "cone_over_plane_curve_1", "quadric_cone", "cone_over_plane_curve_3"]
EU = {"smooth_line": 1, "node": 2, "cusp": 2, "three_lines": 3, "cone_over_plane_curve_1": 1, "quadric_cone": 0, "cone_over_plane_curve_3": -3}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def _timed(fn, *a, **kw):
    t = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t


# --------------------------------------------------------------------------


def test_criterion_01_exact_combinatorics():
    t0 = time.perf_counter()
    bad = []
    for name in COMPLEX_GERMS:
        sp = builtin(name)
        basis = euler_obstruction_basis(sp)
        for i in sp.ids:
            for j in sp.ids:
                if eta(sp, basis[j], i) != int(i == j):
                    bad.append(f"{name} eta({i}, Eu_{j})")
        for label, phi in corpus_functions(sp):
            if not bdk_local(sp, phi, label).passed:
                bad.append(f"{name} bdk {label}")
        if local_euler_obstruction(sp) != EU[name]:
            bad.append(f"{name} Eu = {local_euler_obstruction(sp)}")
    dt = time.perf_counter() - t0
    record(1, not bad and dt < 1.0, f"{len(COMPLEX_GERMS)} germs, {len(bad)} mismatches {bad[:3]}, {dt:.2f} s (< 1 s)")


def test_criterion_02_local_gauss_bonnet():
    rows, ok = [], True
    for name in COMPLEX_GERMS + ["real_cone", "real_plane"]:
        rep, dt = _timed(verify_local_gb, builtin(name))
        tol = max(0.02, 3 * rep.stderr)
        good = abs(rep.rhs - 1) <= tol and dt < 120
        ok &= good
        rows.append(f"{name}={rep.rhs:.4f}{'' if good else '!'}({dt:.0f}s)")
    record(2, ok, "sum of scaled limits = 1 within max(0.02, 3se): " + " ".join(rows))


def test_criterion_03_euler_via_curvature():
    rows, ok = [], True
    for name in ["node", "cusp", "quadric_cone", "cone_over_plane_curve_3"]:
        (est, rep), dt = _timed(euler_obstruction_via_curvature, builtin(name))
        eu = EU[name]
        good = rep.lhs == eu and abs(est.value - eu) <= max(0.02 * (1 + abs(eu)), 3 * est.stderr) and dt < 300
        if name == "quadric_cone":
            per = rep.terms["per_e"]
            rows.append(f"(density {per['2']:.3f}, curvature {per['1']:.3f})")
        ok &= good
        rows.append(f"{name}: {est.value:.4f} vs {eu}{'' if good else '!'} ({dt:.0f}s)")
    record(3, ok, " ".join(rows))


def test_criterion_04_odd_limits_vanish():
    worst, ok = ("", 0, 0.0), True
    for name in COMPLEX_GERMS:
        sp = builtin(name)
        lims = scaled_limits(sp, range(1, sp.ambient_real_dim + 1, 2))
        for k, l in lims.items():
            good = abs(l.value) <= max(0.02, 3 * l.stderr)
            ok &= good
            if abs(l.value) >= abs(worst[2]):
                worst = (name, k, l.value)
    record(4, ok, f"largest odd-k limit {worst[0]} k={worst[1]}: {worst[2]:.2e}")


def test_criterion_05_polar():
    node, line = builtin("node"), builtin("smooth_line")
    s1, s2 = sigma(node, 1), sigma(node, 2)
    ok_node = all(abs(s.sigma - 2) <= 3 * s.stderr for s in (s1, s2))
    cp = verify_curv_polar(node, 2)
    pattern = {0: 1, 1: 1, 2: 1, 3: 0, 4: 0}
    ests = {k: sigma(line, k) for k in pattern}
    ok_line = all(abs(ests[k].sigma - v) <= 3 * ests[k].stderr for k, v in pattern.items())
    detail = (
        f"node sigma1={s1.sigma:.4f}+-{s1.stderr:.4f} sigma2={s2.sigma:.4f}+-{s2.stderr:.4f}; "
        f"sigma2-sigma3={cp.rhs:.4f} vs limit {cp.lhs:.4f}; "
        f"smooth_line sigma=" + ",".join(f"{ests[k].sigma:.3f}" for k in pattern)
    )
    record(5, ok_node and cp.passed and ok_line, detail)


def test_criterion_06_morse():
    rows, ok = [], True
    for name in ["node", "cusp", "three_lines", "quadric_cone"]:
        sp = builtin(name)
        t0 = time.perf_counter()
        hits = 0
        for eps in (0.1, 0.03):
            for i in range(20):
                rep = morse_identity(sp, eps=eps, seed=7, index=i)
                hits += int(rep.identity_lhs == 1 and rep.identity_rhs == 1)
        dt = time.perf_counter() - t0
        good = hits == 40 and dt < 120
        ok &= good
        rows.append(f"{name} {hits}/40 ({dt:.0f}s)")
    record(6, ok, "lhs = rhs = 1: " + " ".join(rows))


def test_criterion_07_fu():
    rows, ok = [], True
    for name in ["node", "cusp", "quadric_cone"]:
        rep = verify_fu(builtin(name))
        eu = EU[name]
        good = abs(rep.rhs - eu) <= max(0.02 * (1 + abs(eu)), 3 * rep.rhs_stderr)
        if name == "node":
            good &= all(abs(v - 2) < 1e-9 for _, v, _ in rep.terms["series"])
        ok &= good
        rows.append(f"{name}: {rep.rhs:.4f} vs {eu}")
    record(7, ok, " ".join(rows))


def test_criterion_08_global():
    par = verify_global(builtin("parabola_global"), "gb")
    cub = builtin("nodal_cubic_global")
    gb = verify_global(cub, "gb")
    eu = verify_global(cub, "euler")
    bdk = [bdk_global(cub, phi, label=label).passed for label, phi in corpus_functions(cub)]
    bdk += [bdk_global(builtin("parabola_global"), phi, label=label).passed for label, phi in corpus_functions(builtin("parabola_global"))]
    ok = (
        par.lhs == 1
        and abs(par.rhs - 1) <= 0.02
        and gb.lhs == 0
        and abs(gb.rhs) <= 0.03
        and eu.lhs == 1
        and abs(eu.rhs - 1) <= 0.05
        and all(bdk)
    )
    record(8, ok, f"parabola {par.rhs:.4f} (1), nodal cubic {gb.rhs:.4f} (0), Eu {eu.rhs:.4f} (1), bdk_global {sum(bdk)}/{len(bdk)}")


# --------------------------------------------------------------------------
# the full command line run


@pytest.fixture(scope="module")
def verify_all_runs():
    runs = {}
    for threads in ("1", "8"):
        cmd = [sys.executable, "-m", "lkcurv.cli", "verify", "all", "--seed", "7", "--threads", threads]
        t0 = time.perf_counter()
        proc = subprocess.run(cmd, capture_output=True)
        runs[threads] = (proc, time.perf_counter() - t0)
    return runs


@pytest.mark.slow
def test_criterion_09_determinism(verify_all_runs):
    (a, _), (b, _) = verify_all_runs["1"], verify_all_runs["8"]
    same = a.stdout == b.stdout and len(a.stdout) > 0
    record(9, same, f"verify all --seed 7, threads 1 vs 8: {'byte-identical' if same else 'differ'} ({len(a.stdout)} bytes, exit {a.returncode}/{b.returncode})")


@pytest.mark.slow
def test_criterion_10_wall_time(verify_all_runs):
    import os

    dt = min(t for _, t in verify_all_runs.values())
    record(10, dt < 900, f"verify all wall time {dt:.0f} s (< 900 s) on {os.cpu_count()} CPU(s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
