"""Polar invariants: Haar averages of Euler characteristics of small affine slices.

sigma_k(X, 0) averages chi(X cap B_eps cap (H + delta v)) over (N-k)-planes H
and unit vectors v orthogonal to H.  Slices meeting X in finitely many points
are counted by multi-start Newton; one-dimensional slices are unions of arcs
whose ends lie on the sphere, so chi is half the number of ends.  Anything
else needs a chi value stored with the space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionError, RangeError, StabilizationError, UnsupportedSliceError
from .mathkit import sample_grassmannian, stream
from .report import IdentityReport, default_tolerance
from .solvers import dedupe, newton_multistart
from .variety.space import GERM, StratifiedSpace

DELTA_LADDER = (1e-2, 5e-3, 2.5e-3)
DEFAULT_EPS = 1e-4
DEFAULT_DRAWS = 256
NEWTON_SEEDS = 64
AMBIENT_SEEDS = 1024
MAX_EXTENSIONS = 8
DEDUPE_REL = 1e-8


@dataclass
class SliceSpec:
    H: np.ndarray  # N x (N - k) orthonormal frame
    v: np.ndarray  # unit vector orthogonal to H
    delta: float
    eps: float

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float).reshape(len(self.v), -1) if np.size(self.H) else np.zeros((len(self.v), 0))
        self.v = np.asarray(self.v, dtype=float)
        if abs(np.linalg.norm(self.v) - 1) > 1e-10:
            raise PreconditionError("slice offset direction must be a unit vector")
        if self.H.size and np.abs(self.H.T @ self.v).max() > 1e-10:
            raise PreconditionError("offset direction is not orthogonal to the plane")
        if not 0 < self.delta < self.eps:
            raise PreconditionError("need 0 < delta < eps")

    @property
    def N(self) -> int:
        return len(self.v)

    @property
    def k(self) -> int:
        return self.N - self.H.shape[1]

    def normal_frame(self) -> np.ndarray:
        """Orthonormal N x k frame of the orthogonal complement of H."""
        if self.H.shape[1] == 0:
            return np.eye(self.N)
        q, _ = np.linalg.qr(self.H, mode="complete")
        return q[:, self.H.shape[1]:]

    def with_delta(self, delta: float) -> "SliceSpec":
        return SliceSpec(self.H, self.v, delta, self.eps)


def draw_slice(N: int, k: int, rng: np.random.Generator, delta: float, eps: float) -> SliceSpec:
    """Haar-random (N-k)-plane and uniform unit v in its complement."""
    W = sample_grassmannian(N, k, rng)
    g = rng.standard_normal(k)
    v = W @ (g / np.linalg.norm(g))
    q, _ = np.linalg.qr(W, mode="complete")
    return SliceSpec(q[:, k:], v, delta, eps)


@dataclass
class PolarEstimate:
    k: int
    sigma: float
    stderr: float
    samples: int
    delta_ladder: tuple
    eps: float
    method: str = "count"
    counts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "sigma": self.sigma,
            "stderr": self.stderr,
            "samples": self.samples,
            "delta_ladder": list(self.delta_ladder),
            "eps": self.eps,
            "method": self.method,
        }


# --------------------------------------------------------------------------
# slice counting


def slice_method(space: StratifiedSpace, k: int) -> str:
    """"points", "arcs" or "oracle" for codimension-k slices of this space."""
    dims = [s.real_dim for s in space.strata]
    top = max(dims)
    if top <= k:
        return "points"
    if top == k + 1 and k not in dims:
        return "arcs"
    if space.annotation(f"polar_chi[{k}]") is not None:
        return "oracle"
    raise UnsupportedSliceError(f"{space.name}: codimension-{k} slices are {top - k}-dimensional and no chi value is stored")


def _seeds(chart, lo: float, hi: float, rng, count: int, log: bool) -> np.ndarray:
    m = chart.intrinsic_dim
    th = rng.standard_normal((count, m))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    lo = max(lo, 1e-12 * max(hi, 1e-300))
    z = rng.random(count)
    r = lo * (hi / lo) ** z if log else lo + (hi - lo) * z
    return r[:, None] * th


def _ambient_slice_points(space: StratifiedSpace, sl: SliceSpec, rng, on_sphere: bool) -> np.ndarray:
    """Slice points from the defining equations, in coordinates x = delta v + H s."""
    eq = space.defining
    H, eps = sl.H, sl.eps
    base = sl.delta * sl.v
    dim = H.shape[1]
    if dim != eq.count + int(on_sphere):
        raise UnsupportedSliceError("slice is not zero-dimensional for the defining equations")

    def F(s):
        x = base + s @ H.T
        out = eq.F(x)
        if on_sphere:
            out = np.hstack([out, ((x * x).sum(axis=1) - eps * eps)[:, None] / (2 * eps)])
        return out

    def DF(s):
        x = base + s @ H.T
        J = eq.DF(x) @ H
        if on_sphere:
            J = np.concatenate([J, (x @ H)[:, None, :] / eps], axis=1)
        return J

    th = rng.standard_normal((AMBIENT_SEEDS, dim))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    if on_sphere:
        r = np.full(AMBIENT_SEEDS, math.sqrt(eps * eps - sl.delta**2))
    else:
        lo, hi = 0.05 * sl.delta, eps
        r = lo * (hi / lo) ** rng.random(AMBIENT_SEEDS)
    s, res, conv = newton_multistart(F, DF, r[:, None] * th, tol=1e-12 * eps, max_step=eps, bound=4 * eps)
    # the residual must vanish relative to the local size of F
    scale = np.linalg.norm(DF(s), axis=(1, 2)) * np.maximum(np.linalg.norm(s, axis=1), sl.delta)
    conv &= res <= 1e-8 * scale
    x = base + s[conv] @ H.T
    rad = np.linalg.norm(x, axis=1)
    x = x[np.abs(rad - eps) <= 1e-9 * eps] if on_sphere else x[rad < eps]
    if not len(x):
        return np.zeros((0, sl.N))
    return x[dedupe(x, DEDUPE_REL * eps)]


def _slice_points(space: StratifiedSpace, sl: SliceSpec, rng, on_sphere: bool) -> np.ndarray:
    """Points of X cap (H + delta v) in the open ball, or on the sphere when ``on_sphere``."""
    if space.defining is not None and sl.N - sl.k == space.defining.count + int(on_sphere):
        return _ambient_slice_points(space, sl, rng, on_sphere)
    W = sl.normal_frame()
    target = sl.delta * (W.T @ sl.v)
    eps = sl.eps
    found = []
    for s in space.strata:
        if s.real_dim == 0:
            loc = np.zeros(sl.N) if s.location is None else np.asarray(s.location, dtype=float)
            if not on_sphere and np.linalg.norm(W.T @ loc - target) <= 1e-12 and np.linalg.norm(loc) < eps:
                found.append(loc)
            continue
        for ch in s.charts:
            if on_sphere:
                if s.real_dim != sl.k + 1:
                    continue

                def F(u, ch=ch):
                    x = ch.evaluate(u)
                    return np.hstack([x @ W - target, ((x * x).sum(axis=1) - eps * eps)[:, None] / (2 * eps)])

                def DF(u, ch=ch):
                    x, J = ch.evaluate(u), ch.jac(u)
                    return np.concatenate([np.einsum("nk,pnm->pkm", W, J), np.einsum("pn,pnm->pm", x, J)[:, None, :] / eps], axis=1)

                lo, hi = ch.param_annulus(0.5 * eps, 1.5 * eps)
                seeds = _seeds(ch, lo, hi, rng, NEWTON_SEEDS, log=False)
            else:
                # a generic affine slice misses strata of dimension below k
                if s.real_dim != sl.k:
                    continue

                def F(u, ch=ch):
                    return ch.evaluate(u) @ W - target

                def DF(u, ch=ch):
                    return np.einsum("nk,pnm->pkm", W, ch.jac(u))

                lo, hi = ch.param_annulus(0.05 * sl.delta, eps)
                seeds = _seeds(ch, lo, hi, rng, NEWTON_SEEDS, log=True)
            u, res, conv = newton_multistart(F, DF, seeds, tol=1e-12 * eps, max_step=hi)
            conv &= res <= 1e-9 * eps
            if not conv.any():
                continue
            u = u[conv]
            x = ch.evaluate(u)
            ok = np.ones(len(u), dtype=bool) if ch.maps_into_closure else ch.in_domain(u)
            r = np.linalg.norm(x, axis=1)
            ok &= np.abs(r - eps) <= 1e-9 * eps if on_sphere else r < eps
            found.extend(x[ok])
    if not found:
        return np.zeros((0, sl.N))
    pts = np.array(found)
    return pts[dedupe(pts, DEDUPE_REL * eps)]


def slice_euler_characteristic(space: StratifiedSpace, sl: SliceSpec, rng: Optional[np.random.Generator] = None) -> int:
    """chi(X cap B_eps cap (H + delta v)) for a single slice."""
    if sl.N != space.ambient_real_dim:
        raise PreconditionError("slice lives in the wrong ambient space")
    rng = rng if rng is not None else stream(0, "slice", space.name)
    method = slice_method(space, sl.k)
    if method == "points":
        return int(len(_slice_points(space, sl, rng, on_sphere=False)))
    if method == "arcs":
        n = len(_slice_points(space, sl, rng, on_sphere=True))
        if n % 2:
            raise StabilizationError("odd number of arc ends on the sphere", witness=(sl.H, sl.v))
        return n // 2
    return int(space.annotation(f"polar_chi[{sl.k}]"))


def stabilized_chi(space: StratifiedSpace, sl: SliceSpec, ladder: Sequence[float], rng) -> int:
    """chi along the delta ladder (fractions of eps) until two consecutive values agree.

    The ladder is halved further, up to MAX_EXTENSIONS times, when its last
    two values differ.
    """
    fr = list(ladder)
    vals = [slice_euler_characteristic(space, sl.with_delta(f * sl.eps), rng) for f in fr]
    for _ in range(MAX_EXTENSIONS):
        if len(vals) < 2 or vals[-1] == vals[-2]:
            return vals[-1]
        fr.append(fr[-1] / 2)
        vals.append(slice_euler_characteristic(space, sl.with_delta(fr[-1] * sl.eps), rng))
    if vals[-1] != vals[-2]:
        raise StabilizationError(f"slice chi does not stabilize along the delta ladder: {vals}", witness=(sl.H, sl.v))
    return vals[-1]


def sigma(
    space: StratifiedSpace,
    k: int,
    samples: int = DEFAULT_DRAWS,
    delta_ladder: Sequence[float] = DELTA_LADDER,
    eps: float = DEFAULT_EPS,
    seed: int = 0,
    runner=None,
) -> PolarEstimate:
    """sigma_k(X, 0) as the mean of stabilized slice chi over Haar draws."""
    if space.kind != GERM:
        raise PreconditionError("polar invariants need a germ")
    N = space.ambient_real_dim
    if not 0 <= k <= N:
        raise RangeError(f"k = {k} outside [0, {N}]")
    ladder = tuple(float(f) for f in delta_ladder)
    if k == 0:
        return PolarEstimate(0, 1.0, 0.0, 0, ladder, eps, "convention")
    method = slice_method(space, k)
    if method == "oracle":
        return PolarEstimate(k, float(space.annotation(f"polar_chi[{k}]")), 0.0, 0, ladder, eps, "oracle")

    def one(i):
        rng = stream(seed, "polar", space.name, k, i)
        sl = draw_slice(N, k, rng, ladder[0] * eps, eps)
        return stabilized_chi(space, sl, ladder, rng)

    jobs = list(range(int(samples)))
    counts = runner(one, jobs) if runner is not None else [one(i) for i in jobs]
    arr = np.array(counts, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return PolarEstimate(k, float(arr.mean()), se, len(arr), ladder, eps, method, [int(c) for c in counts])


def verify_curv_polar(
    space: StratifiedSpace,
    k: int,
    ladder=None,
    samples: Optional[int] = None,
    draws: int = DEFAULT_DRAWS,
    seed: int = 0,
    runner=None,
    tol=None,
) -> IdentityReport:
    """lim Lambda_k / (b_k eps^k) = sigma_k - sigma_{k+1}; complex germs also need sigma_{2e-1} = sigma_{2e}."""
    from .curvature import DEFAULT_SAMPLES
    from .limits import scaled_limits

    lim = scaled_limits(space, [k], ladder, samples or DEFAULT_SAMPLES, seed, runner)[k]
    N = space.ambient_real_dim
    sk = sigma(space, k, draws, seed=seed, runner=runner)
    sk1 = sigma(space, k + 1, draws, seed=seed, runner=runner) if k + 1 <= N else PolarEstimate(k + 1, 0.0, 0.0, 0, DELTA_LADDER, DEFAULT_EPS, "vanishing")
    rhs = sk.sigma - sk1.sigma
    rhs_se = math.hypot(sk.stderr, sk1.stderr)
    terms = {"limit": lim.value, "sigma_k": sk.sigma, "sigma_k+1": sk1.sigma}
    ok_pair = True
    if space.is_complex and k >= 1:
        a, b = (k, k + 1) if k % 2 else (k - 1, k)
        ea = sk if a == k else sigma(space, a, draws, seed=seed, runner=runner)
        eb = sk1 if b == k + 1 else sk
        if b <= N:
            diff = abs(ea.sigma - eb.sigma)
            t = max(default_tolerance(ea.sigma) if tol is None else float(tol), 3 * math.hypot(ea.stderr, eb.stderr))
            ok_pair = diff <= t
            terms["complex_pair"] = {"odd": a, "even": b, "sigma_odd": ea.sigma, "sigma_even": eb.sigma, "pass": ok_pair}
    lhs = lim.value
    rep = IdentityReport(
        "curv_polar",
        space.name,
        lhs,
        rhs,
        lim.stderr,
        rhs_se,
        default_tolerance(lhs) if tol is None else float(tol),
        terms,
        [f"k={k}"],
    )
    rep.passed = bool(rep.passed and ok_pair)
    return rep
