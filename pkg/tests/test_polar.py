import numpy as np
import pytest

from lkcurv.errors import PreconditionError, RangeError, StabilizationError, UnsupportedSliceError
from lkcurv.mathkit import stream
from lkcurv.polar import (
    DELTA_LADDER,
    SliceSpec,
    draw_slice,
    sigma,
    slice_euler_characteristic,
    slice_method,
    stabilized_chi,
    verify_curv_polar,
)
from lkcurv.variety import builtin

DRAWS = 32


def _orth(N, k, rng):
    sl = draw_slice(N, k, rng, 1e-6, 1e-4)
    return sl.H, sl.v


# -- slice specs -------------------------------------------------------------


@pytest.mark.parametrize("N,k", [(4, 1), (4, 2), (6, 3), (6, 6)])
def test_draw_slice_shapes(N, k):
    sl = draw_slice(N, k, np.random.default_rng(k), 1e-6, 1e-4)
    assert sl.N == N and sl.k == k
    assert np.allclose(sl.H.T @ sl.H, np.eye(N - k))
    assert abs(np.linalg.norm(sl.v) - 1) < 1e-12
    W = sl.normal_frame()
    assert W.shape == (N, k)
    assert np.allclose(sl.H.T @ W, 0, atol=1e-12)


def test_slice_spec_validation():
    H, v = _orth(4, 2, np.random.default_rng(0))
    with pytest.raises(PreconditionError):
        SliceSpec(H, 2 * v, 1e-6, 1e-4)
    with pytest.raises(PreconditionError):
        SliceSpec(H, H[:, 0], 1e-6, 1e-4)
    with pytest.raises(PreconditionError):
        SliceSpec(H, v, 2e-4, 1e-4)
    assert SliceSpec(H, v, 1e-6, 1e-4).with_delta(5e-5).delta == 5e-5


# -- counting -----------------------------------------------------------------


@pytest.mark.parametrize(
    "name,k,method",
    [("node", 2, "points"), ("node", 1, "arcs"), ("quadric_cone", 3, "arcs"), ("quadric_cone", 4, "points")],
)
def test_slice_method(name, k, method):
    assert slice_method(builtin(name), k) == method


@pytest.mark.parametrize("k", [1, 2])
def test_cone_slices_unsupported(quadric, k):
    with pytest.raises(UnsupportedSliceError):
        slice_method(quadric, k)


@pytest.mark.parametrize("name,count", [("smooth_line", 1), ("node", 2), ("cusp", 2), ("three_lines", 3)])
def test_generic_point_slices(name, count):
    # a generic 2-plane near the origin meets each branch once
    sp = builtin(name)
    rng = stream(3, "test", name)
    got = []
    for _ in range(8):
        sl = draw_slice(4, 2, rng, 2.5e-3 * 1e-4, 1e-4)
        got.append(slice_euler_characteristic(sp, sl, rng))
    assert min(got) >= 0
    assert np.mean(got) == pytest.approx(count, abs=1.5)


def test_slice_in_wrong_space(node):
    sl = draw_slice(6, 2, np.random.default_rng(0), 1e-6, 1e-4)
    with pytest.raises(PreconditionError):
        slice_euler_characteristic(node, sl)


def test_stabilized_matches_last_rung(node):
    rng = stream(0, "test", "stab")
    sl = draw_slice(4, 2, rng, DELTA_LADDER[0] * 1e-4, 1e-4)
    got = stabilized_chi(node, sl, DELTA_LADDER, rng)
    assert got == slice_euler_characteristic(node, sl.with_delta(DELTA_LADDER[-1] * 1e-4), rng)


def test_stabilization_error(node, monkeypatch):
    import lkcurv.polar as polar

    flip = iter(range(100))
    monkeypatch.setattr(polar, "slice_euler_characteristic", lambda *a, **k: next(flip) % 2)
    sl = draw_slice(4, 2, np.random.default_rng(0), 1e-6, 1e-4)
    with pytest.raises(StabilizationError):
        polar.stabilized_chi(node, sl, DELTA_LADDER, np.random.default_rng(0))


# -- sigma --------------------------------------------------------------------


def test_sigma_zero_is_one(node):
    est = sigma(node, 0)
    assert est.sigma == 1.0 and est.method == "convention"


def test_sigma_range(node):
    with pytest.raises(RangeError):
        sigma(node, 5)
    with pytest.raises(PreconditionError):
        sigma(builtin("parabola_global"), 1)


def test_sigma_top_vanishes(node):
    # a generic point offset from a 4-dimensional ambient misses the curve
    assert sigma(node, 4, DRAWS).sigma == 0.0


@pytest.mark.parametrize("name,k,expected", [("node", 2, 2.0), ("smooth_line", 2, 1.0), ("smooth_line", 1, 1.0), ("cusp", 2, 2.0)])
def test_sigma_values(name, k, expected):
    est = sigma(builtin(name), k, 64, seed=1)
    assert len(est.counts) == 64
    assert abs(est.sigma - expected) <= max(0.1, 3 * est.stderr)


def test_sigma_deterministic(node):
    a = sigma(node, 2, 16, seed=5)
    b = sigma(node, 2, 16, seed=5, runner=lambda f, jobs: [f(j) for j in reversed(jobs)][::-1])
    assert a.counts == b.counts


def test_oracle_method(monkeypatch, quadric):
    monkeypatch.setattr(type(quadric), "annotation", lambda self, key: 1 if key == "polar_chi[2]" else None)
    assert slice_method(quadric, 2) == "oracle"
    est = sigma(quadric, 2)
    assert est.sigma == 1.0 and est.method == "oracle"


def test_curv_polar_node(node):
    rep = verify_curv_polar(node, 2, samples=1024, draws=64)
    assert rep.passed, rep.to_dict()
    assert rep.terms["complex_pair"]["pass"]


def test_curv_polar_telescopes(smooth_line):
    # sum over k of (sigma_k - sigma_{k+1}) is sigma_0 = 1
    total = 0.0
    for k in range(5):
        total += verify_curv_polar(smooth_line, k, samples=512, draws=DRAWS).rhs
    assert total == pytest.approx(1.0, abs=0.1)
