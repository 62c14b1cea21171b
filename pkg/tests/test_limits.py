import math

import pytest

from conftest import COMPLEX_GERMS, GLOBALS
from lkcurv.constructible import corpus_functions
from lkcurv.errors import PreconditionError, RangeError
from lkcurv.limits import (
    euler_obstruction_via_curvature,
    scaled_limits,
    stratum_curvature_limit,
    verify_global,
    verify_local_gb,
    verify_main_theorem,
)
from lkcurv.mathkit import EpsilonLadder
from lkcurv.variety import builtin

SAMPLES = 1024
EU = {"smooth_line": 1, "node": 2, "cusp": 2, "three_lines": 3, "quadric_cone": 0}


def _ok(rep):
    assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("name", ["real_plane", "smooth_line", "node", "cusp", "three_lines", "real_cone"])
def test_local_gauss_bonnet(name):
    _ok(verify_local_gb(builtin(name), samples=SAMPLES))


@pytest.mark.parametrize("name", ["smooth_line", "node", "three_lines"])
def test_main_theorem_corpus(name):
    sp = builtin(name)
    for label, phi in corpus_functions(sp):
        _ok(verify_main_theorem(sp, phi, label, samples=SAMPLES))


@pytest.mark.parametrize("name", sorted(EU))
def test_euler_obstruction_via_curvature(name):
    est, rep = euler_obstruction_via_curvature(builtin(name), samples=SAMPLES)
    assert rep.lhs == EU[name]
    _ok(rep)
    assert est.value == rep.rhs


def test_quadric_euler_split(quadric):
    # top degree e = 2 is the density (degree 2), e = 1 the curvature term
    _, rep = euler_obstruction_via_curvature(quadric, samples=SAMPLES)
    per = rep.terms["per_e"]
    assert per["2"] == pytest.approx(2, abs=0.05)
    assert per["1"] == pytest.approx(-2, abs=0.1)


def test_node_stratum_limits(node):
    top = [t for t in node.top_strata][0]
    assert stratum_curvature_limit(node, top, 1, samples=SAMPLES).value == pytest.approx(1, abs=1e-6)
    assert stratum_curvature_limit(node, top, 0, samples=SAMPLES).value == pytest.approx(0, abs=0.02)
    # above the stratum dimension the limit is exactly zero
    assert stratum_curvature_limit(node, top, 2).value == 0.0
    assert stratum_curvature_limit(node, node.base_stratum, 0).value == 1.0


def test_stratum_limit_errors(node):
    with pytest.raises(RangeError):
        stratum_curvature_limit(node, node.base_stratum, 3)
    with pytest.raises(PreconditionError):
        stratum_curvature_limit(builtin("real_cone"), "V_0", 0)


@pytest.mark.parametrize("name", ["node", "cusp", "quadric_cone"])
def test_odd_limits_vanish(name):
    sp = builtin(name)
    lims = scaled_limits(sp, range(1, sp.ambient_real_dim, 2), samples=SAMPLES)
    for k, l in lims.items():
        assert abs(l.value) <= max(0.02, 3 * l.stderr), (k, l.value)


@pytest.mark.parametrize("name", COMPLEX_GERMS)
def test_limits_are_finite(name):
    sp = builtin(name)
    lims = scaled_limits(sp, ladder=EpsilonLadder.shrink(0.4, 5), samples=256)
    assert all(math.isfinite(l.value) and l.stderr >= 0 for l in lims.values())


def test_scaled_limits_range(node):
    with pytest.raises(RangeError):
        scaled_limits(node, [5])


def test_local_gb_needs_germ():
    with pytest.raises(PreconditionError):
        verify_local_gb(builtin("parabola_global"))


@pytest.mark.parametrize("name", GLOBALS)
@pytest.mark.parametrize("variant", ["gb", "main", "euler"])
def test_global_identities(name, variant):
    _ok(verify_global(builtin(name), variant, samples=SAMPLES))


def test_nodal_cubic_global_values():
    sp = builtin("nodal_cubic_global")
    gb = verify_global(sp, "gb")
    assert gb.lhs == 0 and abs(gb.rhs) <= 0.03
    eu = verify_global(sp, "euler")
    assert eu.lhs == 1 and eu.rhs == pytest.approx(1, rel=0.05)


def test_global_main_corpus():
    sp = builtin("nodal_cubic_global")
    for label, phi in corpus_functions(sp):
        _ok(verify_global(sp, "main", phi, samples=SAMPLES, label=label))


def test_global_needs_global(node):
    with pytest.raises(PreconditionError):
        verify_global(node)
