"""Constants, small linear algebra, Haar sampling and limit extrapolation.

Everything here is a pure function of its arguments.  Random draws go through
:func:`stream`, which derives an independent counter-based generator (Philox)
from a root seed plus integer tags, so a result never depends on the order in
which work items are scheduled.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre
from scipy.stats import qmc

from .errors import DimensionError, DomainError, ExtrapolationError, ShapeError

MAX_DIM = 64


# --------------------------------------------------------------------------
# unit balls and spheres


@dataclass(frozen=True)
class VolumeTable:
    max_dim: int
    ball: tuple[float, ...]
    sphere: tuple[float, ...]

    @classmethod
    def build(cls, max_dim: int = MAX_DIM) -> "VolumeTable":
        ball = tuple(_ball(k) for k in range(max_dim + 1))
        sphere = tuple((k + 1) * _ball(k + 1) for k in range(max_dim + 1))
        return cls(max_dim, ball, sphere)


def _ball(k: int) -> float:
    return math.exp(0.5 * k * math.log(math.pi) - gammaln(0.5 * k + 1.0))


_CLOSED_BALL = {0: 1.0, 1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0, 4: math.pi**2 / 2.0}


def ball_volume(k: int, max_dim: int = MAX_DIM) -> float:
    """Volume b_k of the closed unit ball in R^k."""
    if not 0 <= k <= max_dim:
        raise DimensionError(f"ball dimension {k} outside [0, {max_dim}]")
    if k in _CLOSED_BALL:
        return _CLOSED_BALL[k]
    return _ball(k)


def sphere_volume(k: int, max_dim: int = MAX_DIM) -> float:
    """Volume s_k of the unit sphere S^k (so s_0 = 2, s_1 = 2 pi)."""
    if not 0 <= k <= max_dim:
        raise DimensionError(f"sphere dimension {k} outside [0, {max_dim}]")
    return (k + 1) * ball_volume(k + 1, max_dim + 1)


# --------------------------------------------------------------------------
# symmetric functions and eigenvalues


def elementary_symmetric_all(eigs) -> np.ndarray:
    """All elementary symmetric functions e_0..e_m along the last axis."""
    eigs = np.asarray(eigs, dtype=float)
    m = eigs.shape[-1]
    out = np.zeros(eigs.shape[:-1] + (m + 1,))
    out[..., 0] = 1.0
    for i in range(m):
        lam = eigs[..., i]
        # e_j <- e_j + lam * e_{j-1}, descending so e_{j-1} is still old
        for j in range(i + 1, 0, -1):
            out[..., j] += lam * out[..., j - 1]
    return out


def elementary_symmetric(eigs, j: int):
    """The j-th elementary symmetric function of ``eigs`` (last axis)."""
    eigs = np.asarray(eigs, dtype=float)
    m = eigs.shape[-1] if eigs.ndim else 0
    if j < 0 or j > m:
        raise DomainError(f"sigma_{j} undefined for {m} values")
    val = elementary_symmetric_all(eigs)[..., j]
    return float(val) if np.ndim(val) == 0 else val


def symmetric_eigenvalues(M, tol: float = 1e-12) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix, or of a stack of them."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ShapeError(f"expected square matrices, got shape {M.shape}")
    if M.shape[-1] == 0:
        return np.zeros(M.shape[:-1])
    scale = np.max(np.abs(M), axis=(-2, -1), keepdims=True)
    asym = np.max(np.abs(M - np.swapaxes(M, -1, -2)), axis=(-2, -1), keepdims=True)
    if np.any(asym > tol * np.maximum(scale, 1.0) * 1e4):
        raise ShapeError("matrix is not symmetric within tolerance")
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


# --------------------------------------------------------------------------
# random streams


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf-8"))


def seed_sequence(seed: int, *tags) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(_tag_int(t) for t in tags)])


def stream(seed: int, *tags) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *tags)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *tags)))


def qmc_replicates(dim: int, n: int, seed: int, *tags, replicates: int = 8) -> list[np.ndarray]:
    """Independent scrambled Sobol point sets, ``n`` points split over replicates.

    Each replicate is an unbiased estimator on its own; the spread between
    replicates gives the standard error.
    """
    per = max(2, int(n) // replicates)
    per = 1 << max(1, int(round(math.log2(per))))
    out = []
    for r in range(replicates):
        if dim == 0:
            out.append(np.zeros((per, 0)))
            continue
        eng = qmc.Sobol(d=dim, scramble=True, seed=stream(seed, *tags, "rep", r))
        out.append(eng.random(per))
    return out


def replicate_mean(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


# --------------------------------------------------------------------------
# spheres and Grassmannians


def sample_grassmannian(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal n x k frame of a Haar-random k-plane in R^n."""
    if k < 0 or k > n:
        raise DimensionError(f"cannot draw a {k}-plane in R^{n}")
    if k == 0:
        return np.zeros((n, 0))
    g = rng.standard_normal((n, k))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_grassmannian(n, n, rng)


def uniform_sphere(z: np.ndarray, dim: int) -> np.ndarray:
    """Map uniforms z in [0,1)^dim to points of S^dim in R^(dim+1)."""
    z = np.atleast_2d(z)
    if dim == 0:
        return np.where(z[:, :1] < 0.5, -1.0, 1.0)
    if dim == 1:
        a = 2 * np.pi * z[:, 0]
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if dim == 2:
        t = 2 * z[:, 0] - 1
        a = 2 * np.pi * z[:, 1]
        s = np.sqrt(np.clip(1 - t * t, 0, None))
        return np.stack([t, s * np.cos(a), s * np.sin(a)], axis=1)
    if dim == 3:
        s = z[:, 0]
        a, b = 2 * np.pi * z[:, 1], 2 * np.pi * z[:, 2]
        r1, r2 = np.sqrt(1 - s), np.sqrt(s)
        return np.stack([r1 * np.cos(a), r1 * np.sin(a), r2 * np.cos(b), r2 * np.sin(b)], axis=1)
    from scipy.special import ndtri

    g = ndtri(np.clip(z[:, : dim + 1] if z.shape[1] > dim else np.hstack([z, z[:, :1]]), 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@lru_cache(maxsize=None)
def sphere_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^dim with weights summing to 1.

    Exact for polynomials of degree <= ``degree`` restricted to the sphere.
    The rule is antipodally symmetric, so odd polynomials integrate to 0.
    """
    if dim == 0:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if dim == 1:
        m = max(2, degree + 1)
        m += m % 2
        a = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(a), np.sin(a)], axis=1), np.full(m, 1.0 / m)
    n = max(1, (degree + 2) // 2)
    al = 0.5 * (dim - 2)
    t, wt = roots_jacobi(n, al, al)
    wt = wt / wt.sum()
    sub_p, sub_w = sphere_rule(dim - 1, degree)
    pts, wts = [], []
    for ti, wi in zip(t, wt):
        s = math.sqrt(max(0.0, 1 - ti * ti))
        pts.append(np.hstack([np.full((len(sub_w), 1), ti), s * sub_p]))
        wts.append(wi * sub_w)
    return np.vstack(pts), np.concatenate(wts)


@lru_cache(maxsize=None)
def hemisphere_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the half {v_0 > 0} of S^dim, weights summing to 1/2.

    Weights are fractions of the full sphere, so ``sphere_volume(dim) * sum(w f)``
    integrates f over the open hemisphere.
    """
    if dim == 0:
        return np.array([[1.0]]), np.array([0.5])
    n = max(8, degree + 4)
    x, w = roots_legendre(n)
    phi = 0.25 * np.pi * (x + 1)  # polar angle from the pole, in (0, pi/2)
    w = 0.25 * np.pi * w * np.sin(phi) ** (dim - 1)
    sub_p, sub_w = sphere_rule(dim - 1, degree)
    # normalise against the full-sphere polar weight integral
    xf, wf = roots_legendre(2 * n)
    phif = 0.5 * np.pi * (xf + 1)
    total = float(np.sum(0.5 * np.pi * wf * np.sin(phif) ** (dim - 1)))
    w = w / total
    pts, wts = [], []
    for p, wi in zip(phi, w):
        pts.append(np.hstack([np.full((len(sub_w), 1), math.cos(p)), math.sin(p) * sub_p]))
        wts.append(wi * sub_w)
    return np.vstack(pts), np.concatenate(wts)


# --------------------------------------------------------------------------
# ladders and extrapolation


@dataclass(frozen=True)
class EpsilonLadder:
    values: tuple[float, ...]
    kind: str = "shrink"  # or "grow"

    def __post_init__(self):
        v = self.values
        if len(v) < 5:
            raise DomainError("a ladder needs at least 5 values")
        if any(x <= 0 for x in v):
            raise DomainError("ladder values must be positive")
        if self.kind not in ("shrink", "grow"):
            raise DomainError(f"unknown ladder kind {self.kind!r}")
        ratios = [b / a for a, b in zip(v, v[1:])]
        if self.kind == "shrink" and any(r >= 1 for r in ratios):
            raise DomainError("shrink ladder must be strictly decreasing")
        if self.kind == "grow" and any(r <= 1 for r in ratios):
            raise DomainError("grow ladder must be strictly increasing")
        if max(ratios) - min(ratios) > 1e-9 * max(ratios):
            raise DomainError("ladder must have a constant ratio")

    @classmethod
    def shrink(cls, start: float = 0.4, count: int = 8, ratio: float = 0.5) -> "EpsilonLadder":
        return cls(tuple(start * ratio**i for i in range(count)), "shrink")

    @classmethod
    def grow(cls, start: float = 4.0, count: int = 6, ratio: float = 2.0) -> "EpsilonLadder":
        return cls(tuple(start * ratio**i for i in range(count)), "grow")

    @property
    def ratio(self) -> float:
        return self.values[1] / self.values[0]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass
class LimitEstimate:
    value: float
    stderr: float
    residual: float
    tag: object = None
    ladder: tuple[float, ...] = ()
    series: list[tuple[float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "value": self.value,
            "stderr": self.stderr,
            "residual": self.residual,
            "ladder": list(self.ladder),
            "series": [list(s) for s in self.series],
        }


def extrapolate_limit(
    series: Iterable[tuple[float, float, float]],
    kind: str = "shrink",
    tag=None,
    max_condition: float = 1e8,
) -> LimitEstimate:
    """Weighted least-squares fit ``v(x) = a + b x + c x^2``; returns ``a``.

    ``x`` is the ladder value for a shrinking ladder and its reciprocal for a
    growing one, so ``a`` is the value at x = 0 in both cases.
    """
    pts = [(float(e), float(v), abs(float(s))) for e, v, s in series]
    if len(pts) < 5:
        raise DomainError("extrapolation needs at least 5 points")
    e = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    s = np.array([p[2] for p in pts])
    x = e if kind == "shrink" else 1.0 / e
    X = np.stack([np.ones_like(x), x, x * x], axis=1)
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > max_condition:
        raise ExtrapolationError(f"ill-conditioned extrapolation (cond={cond:.3g})", pts)
    if np.all(s == 0):
        w = np.ones_like(s)
    else:
        floor = max(1e-15 * max(1.0, float(np.max(np.abs(y)))), 1e-3 * float(np.max(s)))
        w = 1.0 / np.maximum(s, floor) ** 2
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = float(np.max(np.abs(y - X @ beta)))
    if np.all(s == 0):
        err = 0.0
    else:
        cov = np.linalg.inv((X * w[:, None]).T @ X)
        err = float(math.sqrt(max(cov[0, 0], 0.0)))
    return LimitEstimate(float(beta[0]), err, resid, tag, tuple(float(v) for v in e), pts)
