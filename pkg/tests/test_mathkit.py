import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lkcurv.errors import DimensionError, DomainError, ShapeError
from lkcurv.mathkit import (
    EpsilonLadder,
    ball_volume,
    elementary_symmetric,
    elementary_symmetric_all,
    extrapolate_limit,
    haar_orthogonal,
    hemisphere_rule,
    qmc_replicates,
    replicate_mean,
    sample_grassmannian,
    sphere_rule,
    sphere_volume,
    stream,
    symmetric_eigenvalues,
    uniform_sphere,
)


@pytest.mark.parametrize(
    "k, b",
    [(0, 1.0), (1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (4, math.pi**2 / 2), (6, math.pi**3 / 6)],
)
def test_ball_volume(k, b):
    assert ball_volume(k) == pytest.approx(b, rel=1e-14)


@pytest.mark.parametrize("k, s", [(0, 2.0), (1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2)])
def test_sphere_volume(k, s):
    assert sphere_volume(k) == pytest.approx(s, rel=1e-14)


@given(st.integers(min_value=0, max_value=40))
def test_sphere_is_derivative_of_ball(k):
    assert sphere_volume(k) == pytest.approx((k + 1) * ball_volume(k + 1), rel=1e-12)


def test_volume_range():
    with pytest.raises(DimensionError):
        ball_volume(-1)
    with pytest.raises(DimensionError):
        sphere_volume(100)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_elementary_symmetric_matches_brute_force(eigs):
    e = elementary_symmetric_all(eigs)
    for j in range(len(eigs) + 1):
        brute = sum(math.prod(c) for c in itertools.combinations(eigs, j))
        assert e[j] == pytest.approx(brute, abs=1e-9)


def test_elementary_symmetric_bounds():
    assert elementary_symmetric([1.0, 2.0, 3.0], 2) == 11.0
    with pytest.raises(DomainError):
        elementary_symmetric([1.0], 2)


def test_symmetric_eigenvalues_rejects_asymmetric():
    with pytest.raises(ShapeError):
        symmetric_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ShapeError):
        symmetric_eigenvalues(np.zeros(3))
    np.testing.assert_allclose(symmetric_eigenvalues(np.diag([3.0, -1.0])), [-1.0, 3.0])


def test_streams_are_keyed_by_tags():
    a = stream(7, "x", 1).random(4)
    b = stream(7, "x", 1).random(4)
    c = stream(7, "x", 2).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_qmc_replicates_shape_and_determinism():
    r1 = qmc_replicates(3, 1024, 0, "t")
    r2 = qmc_replicates(3, 1024, 0, "t")
    assert len(r1) == 8 and r1[0].shape == (128, 3)
    for a, b in zip(r1, r2):
        np.testing.assert_array_equal(a, b)


def test_replicate_mean():
    mu, se = replicate_mean([1.0, 2.0, 3.0, 4.0])
    assert mu == 2.5
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert replicate_mean([5.0]) == (5.0, 0.0)


@pytest.mark.parametrize("n, k", [(4, 2), (6, 3), (5, 1), (3, 0)])
def test_grassmannian_frames_are_orthonormal(n, k):
    H = sample_grassmannian(n, k, stream(0, n, k))
    np.testing.assert_allclose(H.T @ H, np.eye(k), atol=1e-12)


def test_haar_orthogonal_mean_is_zero():
    rng = stream(1, "haar")
    mean = sum(haar_orthogonal(3, rng) for _ in range(2000)) / 2000
    assert np.abs(mean).max() < 0.1


@pytest.mark.parametrize("dim", [0, 1, 2, 3, 5])
def test_uniform_sphere_on_sphere(dim):
    z = stream(0, "s").random((256, dim + 1))
    p = uniform_sphere(z[:, : max(dim, 1)] if dim <= 3 else z, dim)
    np.testing.assert_allclose(np.linalg.norm(p, axis=1), 1.0, atol=1e-12)
    assert p.shape[1] == dim + 1


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_sphere_rule_moments(dim):
    pts, w = sphere_rule(dim, 8)
    assert w.sum() == pytest.approx(1.0)
    # E[x_0^2] = 1/(dim+1), E[x_0^4] = 3/((dim+1)(dim+3))
    assert (w * pts[:, 0] ** 2).sum() == pytest.approx(1 / (dim + 1), rel=1e-12)
    assert (w * pts[:, -1] ** 4).sum() == pytest.approx(3 / ((dim + 1) * (dim + 3)), rel=1e-12)
    assert abs((w * pts[:, 0] ** 3).sum()) < 1e-14


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_hemisphere_rule(dim):
    pts, w = hemisphere_rule(dim, 8)
    assert w.sum() == pytest.approx(0.5, rel=1e-12)
    assert (pts[:, 0] > 0).all()
    # the mean of the pole coordinate over the whole sphere's half: s_{dim-1} / ((dim) s_dim)
    expect = sphere_volume(dim - 1) / (dim * sphere_volume(dim))
    assert (w * pts[:, 0]).sum() == pytest.approx(expect, rel=1e-10)


def test_ladder_validation():
    lad = EpsilonLadder.shrink(0.4, 8)
    assert len(lad) == 8 and lad.ratio == pytest.approx(0.5)
    assert EpsilonLadder.grow(4.0, 6).values[-1] == 128.0
    with pytest.raises(DomainError):
        EpsilonLadder((0.4, 0.2, 0.1))
    with pytest.raises(DomainError):
        EpsilonLadder((0.1, 0.2, 0.4, 0.8, 1.6), "shrink")
    with pytest.raises(DomainError):
        EpsilonLadder((1, 0.5, 0.2, 0.1, 0.05))


@settings(deadline=None, max_examples=30)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_extrapolation_exact_on_quadratics(a, b, c):
    lad = EpsilonLadder.shrink(0.4, 6)
    series = [(e, a + b * e + c * e * e, 1e-6) for e in lad]
    est = extrapolate_limit(series, "shrink")
    assert est.value == pytest.approx(a, abs=1e-8)


def test_extrapolation_grow_uses_reciprocal():
    lad = EpsilonLadder.grow(4.0, 6)
    series = [(r, 3.0 + 2.0 / r, 1e-6) for r in lad]
    assert extrapolate_limit(series, "grow").value == pytest.approx(3.0, abs=1e-8)


def test_extrapolation_needs_points():
    with pytest.raises(DomainError):
        extrapolate_limit([(0.1, 1.0, 0.0)] * 3)
