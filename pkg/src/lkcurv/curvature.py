"""Second fundamental forms, curvature densities and Lipschitz-Killing measures.

For a stratum V of real dimension m in R^N with codimension c = N - m, the
density at x is

    lambda_k(x) = (1 / s_{N-k-1}) * integral over unit normals v of
                  alpha(x, v) * sigma_{m-k}(II_{x,v}) dv.

sigma_j(II_v) is a homogeneous polynomial of degree j in v, so the normal
sphere average is computed with a product rule that is exact in that degree.
Only non-constant alpha data needs anything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    ChartDegeneracyError,
    DataError,
    DivergenceError,
    PreconditionError,
    RangeError,
    StratumTypeError,
)
from .mathkit import (
    EpsilonLadder,
    elementary_symmetric_all,
    qmc_replicates,
    replicate_mean,
    sphere_rule,
    sphere_volume,
    symmetric_eigenvalues,
    uniform_sphere,
)
from .variety.space import EPS_MAX, GERM, GLOBAL, StratifiedSpace, Stratum

TAIL_DEPTH = 8
NOISE_REL = 1e-10
ALPHA_RULE_DEGREE = 32
POINT_ALPHA_SAMPLES = 1 << 15
DEFAULT_SAMPLES = 4096


# --------------------------------------------------------------------------
# frames


def tangent_normal_frames(J: np.ndarray, tol: float = 1e-10):
    """Orthonormal tangent and normal frames from a stack of Jacobians.

    Returns (Q, Nrm, R, area) with J = Q R, Nrm spanning the normal space and
    area = sqrt(det J^T J).
    """
    P, N, m = J.shape
    q, r = np.linalg.qr(J, mode="complete")
    R = r[:, :m, :]
    d = np.abs(np.diagonal(R, axis1=1, axis2=2))
    scale = np.maximum(np.linalg.norm(J, axis=(1, 2)), 1e-300)
    if m and np.any(d.min(axis=1) <= tol * scale):
        raise ChartDegeneracyError("Jacobian is rank deficient")
    return q[:, :, :m], q[:, :, m:], R, np.prod(d, axis=1)


def shape_data(J: np.ndarray, H: np.ndarray):
    """(Q, Nrm, B, area): tangent frame, normal frame, shape operators and area element.

    B[p, l] is II in the direction of the l-th normal, written in the
    orthonormal tangent frame Q.
    """
    Q, Nrm, R, area = tangent_normal_frames(J)
    Rinv = np.linalg.inv(R)
    Hn = np.einsum("pabn,pnl->plab", H, Nrm)
    B = np.einsum("pai,plab,pbj->plij", Rinv, Hn, Rinv)
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    return Q, Nrm, B, area


def normal_shape_operators(J: np.ndarray, H: np.ndarray):
    """B[p, l] = II in the direction of the l-th normal; also the normal frame and area element."""
    _, Nrm, B, area = shape_data(J, H)
    return B, Nrm, area


# --------------------------------------------------------------------------
# second fundamental form


@dataclass
class SecondFundamentalForm:
    at: np.ndarray
    stratum: str
    normal_direction: np.ndarray
    matrix: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return symmetric_eigenvalues(self.matrix)

    def sigma(self, j: int) -> float:
        return float(elementary_symmetric_all(self.eigenvalues)[j])


def _resolve(space: StratifiedSpace, stratum) -> Stratum:
    return stratum if isinstance(stratum, Stratum) else space.stratum(stratum)


def second_fundamental_form(space, stratum, x_param, v, chart: int = 0) -> SecondFundamentalForm:
    """II_{x,v}(a, b) = <v, d^2 phi / du_a du_b> in a Gram-orthonormal tangent frame."""
    s = _resolve(space, stratum)
    if not s.charts:
        raise StratumTypeError(f"stratum {s.id} has no chart")
    c = s.charts[chart]
    u = np.atleast_2d(np.asarray(x_param, dtype=float))
    v = np.asarray(v, dtype=float).ravel()
    J, H = c.jac(u), c.hess(u)
    Q, _, R, _ = tangent_normal_frames(J)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise PreconditionError("normal direction must be a unit vector")
    if np.abs(Q[0].T @ v).max() > 1e-8:
        raise PreconditionError("direction is not orthogonal to the tangent space")
    Rinv = np.linalg.inv(R[0])
    A = np.einsum("abn,n->ab", H[0], v)
    M = Rinv.T @ A @ Rinv
    return SecondFundamentalForm(c.evaluate(u)[0], s.id, v, 0.5 * (M + M.T))


# --------------------------------------------------------------------------
# normal-sphere averages


def _rule_eigenvalues(B: np.ndarray, m: int, degree: int):
    P, c = B.shape[:2]
    pts, wts = sphere_rule(c - 1, degree)
    A = np.einsum("qc,pcab->pqab", pts, B)
    ev = np.linalg.eigvalsh(A) if m else np.zeros((P, len(wts), 0))
    return pts, wts, ev


def _trivial_means(P: int, m: int) -> np.ndarray:
    out = np.zeros((P, m + 1))
    out[:, 0] = 1.0
    return out


def sigma_moments(B: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Normal-sphere means of sigma_j(II_v) and of (sum |eigenvalues|)^j, j = 0..m.

    The second array is a scale used to decide when a term is zero.
    """
    P, c = B.shape[:2]
    if c == 0:
        return _trivial_means(P, m), _trivial_means(P, m)
    _, wts, ev = _rule_eigenvalues(B, m, max(m, 1))
    sig = np.einsum("pqj,q->pj", elementary_symmetric_all(ev), wts)
    pw = np.abs(ev).sum(axis=-1)[..., None] ** np.arange(m + 1)
    return sig, np.einsum("pqj,q->pj", pw, wts)


def sigma_means(B: np.ndarray, m: int) -> np.ndarray:
    """Mean over unit normals of sigma_j(sum_l w_l B_l), j = 0..m; shape (P, m+1)."""
    return sigma_moments(B, m)[0]


def alpha_sigma_means(B, Nrm, x, alpha, m: int) -> np.ndarray:
    """Mean of alpha(x, v) sigma_j(II_v) over unit normals, for callable alpha."""
    P, c = B.shape[:2]
    if c == 0:
        return _trivial_means(P, m)
    pts, wts, ev = _rule_eigenvalues(B, m, ALPHA_RULE_DEGREE)
    sig = elementary_symmetric_all(ev)
    V = np.einsum("pnc,qc->pqn", Nrm, pts)
    a = alpha(np.repeat(x, len(wts), axis=0), V.reshape(-1, V.shape[-1])).reshape(P, len(wts))
    return np.einsum("pqj,pq,q->pj", sig, a, wts)


def _density_factor(N: int, m: int, k: int) -> float:
    c = N - m
    if c == 0:
        return 1.0
    return sphere_volume(c - 1) / sphere_volume(N - k - 1)


def lk_density(space: StratifiedSpace, stratum, x_param, k: int, chart: int = 0):
    """lambda_k of the stratum at chart point(s) ``x_param``."""
    s = _resolve(space, stratum)
    N, m = space.ambient_real_dim, s.real_dim
    if k < 0:
        raise RangeError("k must be non-negative")
    alpha = space.alpha_of(s.id)
    if s.real_dim == 0:
        if k != 0:
            return 0.0
        val, _ = point_alpha_mean(space, s)
        return val
    u = np.atleast_2d(np.asarray(x_param, dtype=float))
    single = np.ndim(x_param) == 1
    if k > m:
        out = np.zeros(len(u))
        return float(out[0]) if single else out
    c = s.charts[chart]
    J, H = c.jac(u), c.hess(u)
    B, Nrm, _ = normal_shape_operators(J, H)
    if callable(alpha):
        means = alpha_sigma_means(B, Nrm, c.evaluate(u), alpha, m)
    else:
        means = float(alpha) * sigma_means(B, m)
    out = _density_factor(N, m, k) * means[:, m - k]
    return float(out[0]) if single else out


def lkw_curvature(space: StratifiedSpace, stratum, x_param, j: int, chart: int = 0):
    """K_{2j}(x): the full normal-sphere integral of sigma_{2j}(II_v)."""
    s = _resolve(space, stratum)
    if not s.is_complex:
        raise StratumTypeError(f"stratum {s.id} is real; use lk_density")
    d = s.complex_dim
    if not 0 <= j <= d:
        raise RangeError(f"j = {j} outside [0, {d}]")
    N, m = space.ambient_real_dim, s.real_dim
    c = N - m
    u = np.atleast_2d(np.asarray(x_param, dtype=float))
    single = np.ndim(x_param) == 1
    if m == 0:
        out = np.full(len(u), sphere_volume(N - 1))
    else:
        ch = s.charts[chart]
        B, _, _ = normal_shape_operators(ch.jac(u), ch.hess(u))
        out = (sphere_volume(c - 1) if c else 1.0) * sigma_means(B, m)[:, 2 * j]
    return float(out[0]) if single else out


def point_alpha_mean(space: StratifiedSpace, s: Stratum, seed: int = 0) -> tuple[float, float]:
    """Haar mean of alpha over the unit sphere at a point stratum, with stderr."""
    alpha = space.alpha_of(s.id)
    if not callable(alpha):
        return float(alpha), 0.0
    N = space.ambient_real_dim
    x0 = np.zeros(N) if s.location is None else np.asarray(s.location, dtype=float)
    reps = qmc_replicates(N - 1 if N > 1 else 1, POINT_ALPHA_SAMPLES, seed, "alpha0", space.name, s.id)
    vals = []
    for z in reps:
        v = uniform_sphere(z, N - 1)
        vals.append(float(np.mean(alpha(np.broadcast_to(x0, v.shape), v))))
    return replicate_mean(vals)


# --------------------------------------------------------------------------
# shell integrals


@dataclass
class ShellIntegral:
    """Integrals over V cap {r_lo <= |x| < r_hi} of normal-sphere means of sigma_j."""

    r_lo: float
    r_hi: float
    plain: np.ndarray  # (m+1,) integral of mean sigma_j
    plain_se: np.ndarray
    weighted: np.ndarray  # alpha-weighted
    weighted_se: np.ndarray
    scale: np.ndarray  # integral of mean (sum |lambda|)^j


def shell_integral(space: StratifiedSpace, sid: str, r_lo: float, r_hi: float, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> ShellIntegral:
    s = space.stratum(sid)
    m = s.real_dim
    alpha = space.alpha_of(sid)
    tot = np.zeros(m + 1)
    var = np.zeros(m + 1)
    wtot = np.zeros(m + 1)
    wvar = np.zeros(m + 1)
    scale = np.zeros(m + 1)
    key = f"{r_lo!r}:{r_hi!r}"
    for ch in s.charts:
        reps = qmc_replicates(ch.sample_dim, samples, seed, "shell", space.name, sid, ch.name, key)
        est, west, sc = [], [], []
        for z in reps:
            u, w = ch.sample(z, r_lo, r_hi)
            x = ch.evaluate(u)
            r = np.linalg.norm(x, axis=1)
            keep = ch.in_domain(u) & (r >= r_lo) & (r < r_hi)
            n = len(u)
            acc = np.zeros(m + 1)
            wacc = np.zeros(m + 1)
            sacc = np.zeros(m + 1)
            if keep.any():
                uk = u[keep]
                B, Nrm, area = normal_shape_operators(ch.jac(uk), ch.hess(uk))
                means, absm = sigma_moments(B, m)
                wk = (w[keep] * area / ch.sheet_count)[:, None]
                acc = (wk * means).sum(axis=0) / n
                sacc = (wk * absm).sum(axis=0) / n
                if callable(alpha):
                    wacc = (wk * alpha_sigma_means(B, Nrm, x[keep], alpha, m)).sum(axis=0) / n
                else:
                    wacc = float(alpha) * acc
            est.append(acc)
            west.append(wacc)
            sc.append(sacc)
        est, west = np.array(est), np.array(west)
        R = len(reps)
        tot += est.mean(axis=0)
        var += est.var(axis=0, ddof=1) / R if R > 1 else 0.0
        wtot += west.mean(axis=0)
        wvar += west.var(axis=0, ddof=1) / R if R > 1 else 0.0
        scale += np.array(sc).mean(axis=0)
    return ShellIntegral(r_lo, r_hi, tot, np.sqrt(var), wtot, np.sqrt(wvar), scale)


# --------------------------------------------------------------------------
# series


@dataclass
class CurvatureSeries:
    k: int
    ladder: EpsilonLadder
    values: list  # (eps, value, stderr)
    per_stratum: dict = field(default_factory=dict)  # sid -> list of (eps, value, stderr)

    def scaled(self) -> list:
        from .mathkit import ball_volume

        b = ball_volume(self.k)
        return [(e, v / (b * e**self.k), se / (b * e**self.k)) for e, v, se in self.values]

    def rows(self) -> list[dict]:
        out = []
        for sid, ser in self.per_stratum.items():
            for e, v, se in ser:
                out.append({"k": self.k, "eps": e, "stratum": sid, "value": v, "stderr": se})
        for e, v, se in self.values:
            out.append({"k": self.k, "eps": e, "stratum": "total", "value": v, "stderr": se})
        return out

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ladder": list(self.ladder.values),
            "kind": self.ladder.kind,
            "values": [list(t) for t in self.values],
            "scaled": [list(t) for t in self.scaled()],
            "per_stratum": {k: [list(t) for t in v] for k, v in self.per_stratum.items()},
        }


def _significant(t: float, se: float, scale: float) -> bool:
    return abs(t) > 3.0 * se and abs(t) > NOISE_REL * scale


def annulus_sum(terms, ses, scales, start: int, depth: int = TAIL_DEPTH, label: str = "") -> tuple[float, float]:
    """Sum of shells start..start+depth plus a geometric tail from the last two."""
    idx = list(range(start, start + depth + 1))
    val = float(sum(terms[i] for i in idx))
    var = float(sum(ses[i] ** 2 for i in idx))
    a, b = idx[-2], idx[-1]
    ta, tb = terms[a], terms[b]
    if _significant(tb, ses[b], scales[b]) and _significant(ta, ses[a], scales[a]):
        ratio = tb / ta
        if ratio >= 1:
            raise DivergenceError(f"annulus contributions do not decay ({label}, ratio {ratio:.3g})")
        if ratio > 0:
            tail = tb * ratio / (1 - ratio)
            val += tail
            var += (ses[b] * ratio / (1 - ratio)) ** 2
    return val, math.sqrt(var)


class CurvatureTable:
    """Shell integrals for every stratum and the quantities built from them."""

    def __init__(self, space: StratifiedSpace, ladder: EpsilonLadder, samples: int = DEFAULT_SAMPLES, seed: int = 0):
        self.space = space
        self.ladder = ladder
        self.samples = int(samples)
        self.seed = int(seed)
        self.global_kind = space.kind == GLOBAL
        if space.kind == GERM:
            if ladder.kind != "shrink":
                raise RangeError("germs need a shrinking ladder")
            if max(ladder.values) > 0.5 * EPS_MAX:
                raise RangeError(f"ladder exceeds the germ range 0.5 * eps_max = {0.5 * EPS_MAX}")
            rho = ladder.ratio
            e0 = ladder.values[0]
            n_sh = len(ladder) + TAIL_DEPTH
            self.edges = [(e0 * rho ** (i + 1), e0 * rho**i) for i in range(n_sh)]
        else:
            if ladder.kind != "grow":
                raise RangeError("global spaces need a growing ladder")
            R = list(ladder.values)
            inner = [(0.0, R[0] / 8), (R[0] / 8, R[0] / 4), (R[0] / 4, R[0] / 2), (R[0] / 2, R[0])]
            self.edges = inner + [(R[i], R[i + 1]) for i in range(len(R) - 1)]
            self.n_inner = len(inner)
        self.shells: dict[str, list[ShellIntegral]] = {}
        self.atoms: dict[str, tuple[float, float]] = {}

    def compute(self, runner=None) -> "CurvatureTable":
        jobs = []
        for s in self.space.strata:
            if s.real_dim == 0:
                continue
            for lo, hi in self.edges:
                jobs.append((s.id, lo, hi))
        fn = lambda job: shell_integral(self.space, job[0], job[1], job[2], self.samples, self.seed)
        results = runner(fn, jobs) if runner is not None else [fn(j) for j in jobs]
        for (sid, _, _), res in zip(jobs, results):
            self.shells.setdefault(sid, []).append(res)
        for s in self.space.strata:
            if s.real_dim == 0:
                self.atoms[s.id] = point_alpha_mean(self.space, s, self.seed)
        return self

    # -- assembly -----------------------------------------------------------

    def _stratum_series(self, sid: str, k: int, weighted: bool):
        s = self.space.stratum(sid)
        N, m = self.space.ambient_real_dim, s.real_dim
        eps = list(self.ladder.values)
        if m == 0:
            loc = np.zeros(N) if s.location is None else np.asarray(s.location)
            if k != 0:
                return [(e, 0.0, 0.0) for e in eps]
            val, se = self.atoms[sid] if weighted else (1.0, 0.0)
            return [(e, val, se) if np.linalg.norm(loc) <= e else (e, 0.0, 0.0) for e in eps]
        if k > m:
            return [(e, 0.0, 0.0) for e in eps]
        j = m - k
        f = _density_factor(N, m, k)
        sh = self.shells[sid]
        terms = [f * (x.weighted[j] if weighted else x.plain[j]) for x in sh]
        ses = [f * (x.weighted_se[j] if weighted else x.plain_se[j]) for x in sh]
        scales = [f * x.scale[j] * (abs(self._alpha_scale(sid)) if weighted else 1.0) for x in sh]
        out = []
        for i, e in enumerate(eps):
            if self.global_kind:
                upto = self.n_inner + i
                val = float(sum(terms[:upto]))
                se = math.sqrt(sum(t * t for t in ses[:upto]))
            else:
                val, se = annulus_sum(terms, ses, scales, i, label=f"stratum {sid}, k = {k}")
            out.append((e, val, se))
        return out

    def _alpha_scale(self, sid: str) -> float:
        a = self.space.alpha_of(sid)
        return 1.0 if callable(a) else float(a) or 1.0

    def series(self, k: int) -> CurvatureSeries:
        per = {s.id: self._stratum_series(s.id, k, True) for s in self.space.strata}
        tot = []
        for i, e in enumerate(self.ladder.values):
            v = sum(per[sid][i][1] for sid in per)
            se = math.sqrt(sum(per[sid][i][2] ** 2 for sid in per))
            tot.append((e, v, se))
        return CurvatureSeries(k, self.ladder, tot, per)

    def unweighted(self, sid: str, k: int) -> list:
        """(1/s_{N-k-1}) * integral over V cap B of the normal-sphere integral of sigma_{m-k}, per ladder value."""
        return self._stratum_series(sid, k, False)


_TABLES: dict = {}


def curvature_table(space: StratifiedSpace, ladder: EpsilonLadder, samples: int = DEFAULT_SAMPLES, seed: int = 0, runner=None) -> CurvatureTable:
    key = (id(space), space.name, ladder.values, ladder.kind, int(samples), int(seed))
    tab = _TABLES.get(key)
    if tab is None or tab.space is not space:
        tab = CurvatureTable(space, ladder, samples, seed).compute(runner)
        _TABLES[key] = tab
    return tab


def default_ladder(space: StratifiedSpace) -> EpsilonLadder:
    return EpsilonLadder.shrink(0.4, 8) if space.kind == GERM else EpsilonLadder.grow(4.0, 6)


def measure(space: StratifiedSpace, k: int, ladder: Optional[EpsilonLadder] = None, samples: int = DEFAULT_SAMPLES, seed: int = 0, runner=None) -> CurvatureSeries:
    """Lambda_k(X, X cap B_eps) over the ladder, split by stratum."""
    if k < 0 or k > space.ambient_real_dim:
        raise RangeError(f"k = {k} outside [0, {space.ambient_real_dim}]")
    ladder = ladder or default_ladder(space)
    return curvature_table(space, ladder, samples, seed, runner).series(k)


def clear_cache() -> None:
    _TABLES.clear()
