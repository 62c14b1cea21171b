import numpy as np
import pytest

from lkcurv.boundary import (
    boundary_gb_measure,
    mean_boundary_from_reports,
    morse_identity,
    verify_boundary_limits,
    verify_fu,
)
from lkcurv.curvature import measure
from lkcurv.errors import PreconditionError, RangeError
from lkcurv.mathkit import EpsilonLadder
from lkcurv.variety import builtin

SAMPLES = 1024
DIRECTIONS = 5


# -- sphere measure -------------------------------------------------------------


@pytest.mark.parametrize("name,total", [("real_plane", 1.0), ("smooth_line", 1.0), ("node", 2.0), ("three_lines", 3.0)])
@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_flat_boundary_totals(name, total, eps):
    # flat branches: each link circle carries total geodesic curvature 2 pi
    bm = boundary_gb_measure(builtin(name), eps, SAMPLES)
    assert bm.total == pytest.approx(total, abs=1e-6)


def test_node_per_stratum(node):
    bm = boundary_gb_measure(node, 0.1, SAMPLES)
    assert bm.per_stratum[node.base_stratum] == (0.0, 0.0)
    tops = [bm.per_stratum[t][0] for t in node.top_strata]
    np.testing.assert_allclose(tops, 1.0, atol=1e-6)
    assert set(bm.to_dict()) >= {"eps", "total", "stderr"}


def test_boundary_range(node):
    with pytest.raises(RangeError):
        boundary_gb_measure(node, 0.0)
    with pytest.raises(RangeError):
        boundary_gb_measure(node, 10.0)
    with pytest.raises(PreconditionError):
        boundary_gb_measure(builtin("parabola_global"), 0.1)


@pytest.mark.parametrize("name", ["node", "cusp", "quadric_cone"])
def test_ball_decomposition(name):
    # interior degree-0 measure plus the sphere measure is chi(X cap B_eps) = 1
    sp = builtin(name)
    eps = 0.1
    interior = measure(sp, 0, EpsilonLadder.shrink(eps, 5), samples=SAMPLES)
    lam0 = interior.values[0][1]
    bm = boundary_gb_measure(sp, eps, SAMPLES)
    assert lam0 + bm.total == pytest.approx(1.0, abs=max(0.03, 4 * bm.stderr))


# -- Fu and boundary limits -------------------------------------------------------


@pytest.mark.parametrize("name", ["node", "cusp", "quadric_cone"])
def test_fu(name):
    rep = verify_fu(builtin(name), samples=SAMPLES)
    assert rep.passed, rep.to_dict()


def test_fu_node_exact(node):
    rep = verify_fu(node, samples=SAMPLES)
    for _, val, _ in rep.terms["series"]:
        assert val == pytest.approx(2.0, abs=1e-6)


def test_fu_preconditions():
    with pytest.raises(PreconditionError):
        verify_fu(builtin("real_cone"))


@pytest.mark.parametrize("name", ["node", "cusp"])
def test_boundary_limits(name):
    sp = builtin(name)
    for t in sp.top_strata:
        rep = verify_boundary_limits(sp, t, samples=SAMPLES)
        assert rep.passed, rep.to_dict()


def test_boundary_limit_point(node):
    with pytest.raises(PreconditionError):
        verify_boundary_limits(node, node.base_stratum)


# -- Morse count ------------------------------------------------------------------


@pytest.mark.parametrize("name", ["real_plane", "smooth_line", "node", "cusp", "three_lines", "quadric_cone"])
@pytest.mark.parametrize("eps", [0.1, 0.03])
def test_morse_identity(name, eps):
    sp = builtin(name)
    for i in range(DIRECTIONS):
        rep = morse_identity(sp, eps=eps, seed=11, index=i)
        assert rep.identity_lhs == 1
        assert rep.passed, rep.to_dict()


def test_outward_points_do_not_count(node):
    rep = morse_identity(node, eps=0.1, seed=2)
    out = [p for p in rep.critical_points if p.kind == "boundary" and not p.inward]
    assert out, "a linear function always has outward points on the link"
    assert all(p.contribution == 0 for p in out)
    assert rep.identity_rhs == rep.ind_at_0 + rep.inward_sum + rep.interior_sum


def test_morse_fixed_direction(smooth_line):
    v = np.array([1.0, 0.0, 0.0, 0.0])
    rep = morse_identity(smooth_line, v, eps=0.1)
    assert rep.passed
    # one minimum and one maximum on the link circle; only the inward one counts
    assert rep.inward_sum == 1 and rep.ind_at_0 == 0


def test_morse_report_json(node):
    d = morse_identity(node, eps=0.1).to_dict()
    assert d["identity"] == "morse" and d["pass"] is True
    assert d["lhs"] == d["rhs"] == 1


def test_morse_range(node):
    with pytest.raises(RangeError):
        morse_identity(node, eps=-0.1)


def test_mean_boundary(node):
    reps = [morse_identity(node, eps=0.1, seed=3, index=i) for i in range(16)]
    rep = mean_boundary_from_reports(node, reps, samples=SAMPLES)
    assert rep.rhs == pytest.approx(2.0, abs=1e-6)
    assert rep.passed, rep.to_dict()


def test_mean_boundary_inputs(node):
    with pytest.raises(PreconditionError):
        mean_boundary_from_reports(node, [])
    a = morse_identity(node, eps=0.1)
    b = morse_identity(node, eps=0.05)
    with pytest.raises(PreconditionError):
        mean_boundary_from_reports(node, [a, b])
