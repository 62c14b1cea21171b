"""Curvature of X cap B_eps along the sphere, and the stratified Morse count behind it.

On M = V cap S_eps, a normal direction splits as v = a nu + n, where nu is
the inward unit conormal of M inside V and n is normal to V.  With g = |x_T|
(the tangential part of x),

    II^M_v(W1, W2) = <n, II^V(W1, W2)> + (a / g) (<W1, W2> + <x_N, II^V(W1, W2)>).

The index data on M counts only inward directions: alpha(x, v) = w [a > 0],
where w is eta(V, 1_X), or 1 for the closure of V alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .constructible import local_euler_obstruction
from .curvature import DEFAULT_SAMPLES, curvature_table, default_ladder, shape_data
from .errors import DataError, DimensionError, IncompleteSearchError, PreconditionError, RangeError
from .mathkit import (
    EpsilonLadder,
    extrapolate_limit,
    hemisphere_rule,
    qmc_replicates,
    replicate_mean,
    sphere_volume,
    stream,
    uniform_sphere,
)
from .report import IdentityReport, default_tolerance
from .solvers import dedupe, newton_multistart
from .variety.space import EPS_MAX, GERM, StratifiedSpace

MORSE_SEEDS = 128
SEED_POOL = 16
DEDUPE_REL = 1e-7
MAX_RESAMPLES = 16
LAMBDA_MIN = 1e-6
HESS_MIN = 1e-8


# --------------------------------------------------------------------------
# boundary measure


@dataclass
class BoundaryMeasure:
    eps: float
    per_stratum: dict  # sid -> (value, stderr)
    total: float
    stderr: float

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "per_stratum": {k: {"value": v, "stderr": s} for k, (v, s) in self.per_stratum.items()},
            "total": self.total,
            "stderr": self.stderr,
        }


def _stratum_weight(space: StratifiedSpace, sid: str, closure_only: bool) -> float:
    if closure_only:
        return 1.0
    a = space.alpha_of(sid)
    if callable(a):
        raise DataError(f"stratum {sid} has direction-dependent index data; the sphere measure needs a constant")
    return float(a)


def _sphere_sample_dim(m: int) -> int:
    return m - 1 if m - 1 <= 3 else m


def _complement_frames(y: np.ndarray) -> np.ndarray:
    """Orthonormal frames (P, m, m-1) of the complement of each row of y."""
    q, _ = np.linalg.qr(y[:, :, None], mode="complete")
    return q[:, :, 1:]


def sphere_section_density(chart, theta: np.ndarray, eps: float, N: int):
    """Points of V cap S_eps along parameter rays and the pieces of the boundary density.

    Returns (x, jac_area, det_mean) where the boundary density at x is
    (s_c / s_{N-1}) * det_mean * weight and jac_area converts d(theta) into
    area on V cap S_eps.  Rays that miss the chart give NaN.
    """
    m = chart.intrinsic_dim
    c = N - m
    rho = chart.radial_solve(theta, eps)
    good = np.isfinite(rho)
    P = len(theta)
    x_all = np.full((P, N), np.nan)
    area_all = np.zeros(P)
    dens_all = np.zeros(P)
    if not good.any():
        return x_all, area_all, dens_all
    th = theta[good]
    u = rho[good, None] * th
    x = chart.evaluate(u)
    J, H = chart.jac(u), chart.hess(u)
    Q, Nrm, B, _ = shape_data(J, H)
    # area of the radial section theta -> phi(rho(theta) theta)
    gvec = np.einsum("pnm,pn->pm", J, x)
    Pm = np.eye(m)[None] - th[:, :, None] * gvec[:, None, :] / np.einsum("pm,pm->p", gvec, th)[:, None, None]
    E = _complement_frames(th)
    T = rho[good, None, None] * np.einsum("pnm,pmk,pkj->pnj", J, Pm, E)
    area = np.sqrt(np.abs(np.linalg.det(np.einsum("pni,pnj->pij", T, T))))
    # curvature of V cap S_eps
    y = np.einsum("pnm,pn->pm", Q, x)
    gn = np.linalg.norm(y, axis=1)
    C = _complement_frames(y)
    BM = np.einsum("pai,plab,pbj->plij", C, B, C)
    xN = np.einsum("pnl,pn->pl", Nrm, x)
    Id = np.eye(m - 1)[None]
    base = (Id + np.einsum("pl,plij->pij", xN, BM)) / gn[:, None, None]
    pts, wts = hemisphere_rule(c, m - 1)
    A = pts[None, :, 0, None, None] * base[:, None] + np.einsum("qc,pcij->pqij", pts[:, 1:], BM)
    dens = np.einsum("pq,q->p", np.linalg.det(A), wts)
    x_all[good], area_all[good], dens_all[good] = x, area, dens
    return x_all, area_all, dens_all


def _stratum_boundary(space, sid, eps, samples, seed, weight):
    s = space.stratum(sid)
    m, N = s.real_dim, space.ambient_real_dim
    if m < 2:
        raise DimensionError(f"stratum {sid}: sphere sections of curves are not supported")
    c = N - m
    factor = weight * sphere_volume(c) / sphere_volume(N - 1) * sphere_volume(m - 1)
    total, var = 0.0, 0.0
    for ch in s.charts:
        reps = qmc_replicates(_sphere_sample_dim(m), samples, seed, "sphere", space.name, sid, ch.name, repr(eps))
        vals = []
        for z in reps:
            theta = uniform_sphere(z, m - 1)
            _, area, dens = sphere_section_density(ch, theta, eps, N)
            vals.append(factor * float(np.mean(area * dens)) / ch.sheet_count)
        mu, se = replicate_mean(vals)
        total += mu
        var += se * se
    return total, math.sqrt(var)


def boundary_gb_measure(
    space: StratifiedSpace,
    eps: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    strata: Optional[Iterable[str]] = None,
    closure_only: bool = False,
) -> BoundaryMeasure:
    """Lambda_0(X cap B_eps, V_i cap S_eps) for each stratum meeting the sphere.

    ``strata`` restricts the sum (e.g. to the top strata); ``closure_only``
    weights every stratum by 1, the index of the closure of V_i itself.
    """
    if space.kind != GERM:
        raise PreconditionError("the sphere measure is defined for germs")
    if not 0 < eps <= 0.5 * EPS_MAX:
        raise RangeError(f"eps = {eps} outside (0, {0.5 * EPS_MAX}]")
    ids = list(space.ids if strata is None else strata)
    per = {}
    for sid in ids:
        s = space.stratum(sid)
        if s.is_point:
            per[sid] = (0.0, 0.0)  # a point stratum misses the sphere
            continue
        per[sid] = _stratum_boundary(space, sid, eps, samples, seed, _stratum_weight(space, sid, closure_only))
    total = sum(v for v, _ in per.values())
    se = math.sqrt(sum(e * e for _, e in per.values()))
    return BoundaryMeasure(eps, per, total, se)


def _boundary_series(space, ladder, samples, seed, strata=None, closure_only=False):
    out = []
    for e in ladder.values:
        bm = boundary_gb_measure(space, e, samples, seed, strata, closure_only)
        out.append((e, bm.total, bm.stderr))
    return out


def verify_fu(space: StratifiedSpace, ladder: Optional[EpsilonLadder] = None, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol=None) -> IdentityReport:
    """Eu_X(0) = lim Lambda_0(X cap B_eps, X_reg cap S_eps)."""
    if space.kind != GERM or not space.is_complex or not space.equidimensional:
        raise PreconditionError("needs a complex equidimensional germ")
    ladder = ladder or default_ladder(space)
    tops = space.top_strata
    series = _boundary_series(space, ladder, samples, seed, tops)
    lim = extrapolate_limit(series, ladder.kind, tag="fu")
    lhs = local_euler_obstruction(space)
    terms = {"series": [list(t) for t in series], "strata": tops, "residual": lim.residual}
    t = default_tolerance(lhs) if tol is None else float(tol)
    return IdentityReport("fu", space.name, lhs, lim.value, 0.0, lim.stderr, t, terms)


def verify_boundary_limits(
    space: StratifiedSpace, i: str, ladder: Optional[EpsilonLadder] = None, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol=None
) -> IdentityReport:
    """lim Lambda_0(closure(V_i) cap B_eps, V_i cap S_eps) against the stratum curvature limits."""
    from .limits import stratum_curvature_limit

    if space.kind != GERM or not space.is_complex:
        raise PreconditionError("needs a complex germ")
    s = space.stratum(i)
    v0 = space.base_stratum
    if s.is_point:
        raise PreconditionError(f"stratum {i} is a point and misses the sphere")
    ladder = ladder or default_ladder(space)
    series = _boundary_series(space, ladder, samples, seed, [i], closure_only=True)
    lim = extrapolate_limit(series, ladder.kind, tag=("boundary", i))
    if i == v0:
        rhs, rhs_se, terms = 1.0, 0.0, {}
    else:
        d0 = space.stratum(v0).complex_dim
        ls = {e: stratum_curvature_limit(space, i, e, ladder, samples, seed) for e in range(d0 + 1, s.complex_dim + 1)}
        rhs = sum(l.value for l in ls.values())
        rhs_se = math.sqrt(sum(l.stderr**2 for l in ls.values()))
        terms = {"L": {str(e): l.value for e, l in ls.items()}}
    t = default_tolerance(lim.value) if tol is None else float(tol)
    return IdentityReport("boundary_limit", space.name, lim.value, rhs, lim.stderr, rhs_se, t, terms, [i])


# --------------------------------------------------------------------------
# Morse count


@dataclass
class CriticalPoint:
    position: tuple
    stratum: str
    kind: str  # "boundary" or "interior"
    multiplier_sign: int  # sign of lambda; 0 for interior points
    morse_index: int
    normal_index: int
    inward: bool

    @property
    def contribution(self) -> int:
        if self.kind == "boundary" and not self.inward:
            return 0
        return (-1) ** self.morse_index * self.normal_index

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "stratum": self.stratum,
            "kind": self.kind,
            "multiplier_sign": self.multiplier_sign,
            "morse_index": self.morse_index,
            "normal_index": self.normal_index,
            "inward": self.inward,
        }


@dataclass
class MorseReport:
    space: str
    v: tuple
    eps: float
    critical_points: list
    ind_at_0: int
    identity_lhs: int
    identity_rhs: int
    attempts: int = 1
    incomplete: bool = False
    notes: list = field(default_factory=list)

    @property
    def inward_sum(self) -> int:
        return sum(p.contribution for p in self.critical_points if p.kind == "boundary")

    @property
    def interior_sum(self) -> int:
        return sum(p.contribution for p in self.critical_points if p.kind == "interior")

    @property
    def passed(self) -> bool:
        return not self.incomplete and self.identity_lhs == self.identity_rhs

    def to_dict(self) -> dict:
        return {
            "identity": "morse",
            "space": self.space,
            "v": list(self.v),
            "eps": self.eps,
            "lhs": self.identity_lhs,
            "rhs": self.identity_rhs,
            "ind_at_0": self.ind_at_0,
            "inward_sum": self.inward_sum,
            "interior_sum": self.interior_sum,
            "attempts": self.attempts,
            "incomplete": self.incomplete,
            "pass": self.passed,
            "critical_points": [p.to_dict() for p in self.critical_points],
            "notes": list(self.notes),
        }

    def rows(self) -> list[dict]:
        return [dict(p.to_dict(), eps=self.eps) for p in self.critical_points]


class _Degenerate(Exception):
    pass


def _normal_index(space, sid) -> int:
    a = space.alpha_of(sid)
    if callable(a):
        raise DataError(f"stratum {sid} has direction-dependent index data")
    return int(a)


def _sphere_seeds(ch, eps, rng, count):
    m = ch.intrinsic_dim
    th = rng.standard_normal((count, m))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    rho = ch.radial_solve(th, eps)
    ok = np.isfinite(rho)
    if not ok.all():
        lo, hi = ch.param_annulus(eps, eps)
        rho = np.where(ok, rho, 0.5 * (lo + hi))
    return rho[:, None] * th


def _boundary_critical(space, sid, ch, v, eps, rng):
    """Critical points of <v, .> on V cap S_eps in one chart: (x, u, mu) with lambda = mu / eps."""
    m = ch.intrinsic_dim

    def F(z):
        u, mu = z[:, :m], z[:, m]
        x, J = ch.evaluate(u), ch.jac(u)
        g = np.einsum("pnm,n->pm", J, v) - (mu / eps)[:, None] * np.einsum("pnm,pn->pm", J, x)
        return np.hstack([g, ((x * x).sum(axis=1) - eps * eps)[:, None] / (2 * eps)])

    def DF(z):
        u, mu = z[:, :m], z[:, m]
        x, J, H = ch.evaluate(u), ch.jac(u), ch.hess(u)
        lam = (mu / eps)[:, None, None]
        top = np.einsum("pabn,n->pab", H, v) - lam * (np.einsum("pabn,pn->pab", H, x) + np.einsum("pna,pnb->pab", J, J))
        dmu = -np.einsum("pnm,pn->pm", J, x)[:, :, None] / eps
        last = np.concatenate([np.einsum("pn,pnm->pm", x, J) / eps, np.zeros((len(z), 1))], axis=1)
        return np.concatenate([np.concatenate([top, dmu], axis=2), last[:, None, :]], axis=1)

    # screen a pool of link points by the tangential gradient; half the
    # Newton seeds are the best of the pool, half stay random for coverage
    u0 = _sphere_seeds(ch, eps, rng, MORSE_SEEDS * SEED_POOL)
    x0, J0 = ch.evaluate(u0), ch.jac(u0)
    a = np.einsum("pnm,n->pm", J0, v)
    b = np.einsum("pnm,pn->pm", J0, x0) / eps
    mu0 = np.einsum("pm,pm->p", a, b) / np.maximum(np.einsum("pm,pm->p", b, b), 1e-300)
    resid = np.linalg.norm(a - mu0[:, None] * b, axis=1) / np.maximum(np.linalg.norm(J0, axis=(1, 2)), 1e-300)
    resid = np.where(np.isfinite(resid), resid, np.inf)
    order = np.argsort(resid, kind="stable")
    half = MORSE_SEEDS // 2
    pick = np.concatenate([order[:half], rng.choice(order[half:], MORSE_SEEDS - half, replace=False)])
    u0, mu0 = u0[pick], mu0[pick]
    z, res, conv = newton_multistart(F, DF, np.hstack([u0, mu0[:, None]]), tol=1e-12 * eps, max_step=eps)
    scale = np.linalg.norm(ch.jac(z[:, :m]), axis=(1, 2))
    conv &= res <= 1e-9 * np.maximum(scale, 1e-300)
    return z[conv], conv.mean()


def _interior_critical(space, sid, ch, v, eps, rng):
    m = ch.intrinsic_dim

    def F(u):
        return np.einsum("pnm,n->pm", ch.jac(u), v)

    def DF(u):
        return np.einsum("pabn,n->pab", ch.hess(u), v)

    lo, hi = ch.param_annulus(1e-3 * eps, eps)
    th = rng.standard_normal((MORSE_SEEDS, m))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    r = lo * (hi / lo) ** rng.random(MORSE_SEEDS)
    u, res, conv = newton_multistart(F, DF, r[:, None] * th, tol=1e-12 * eps, max_step=hi)
    scale = np.linalg.norm(ch.jac(u), axis=(1, 2))
    conv &= res <= 1e-9 * np.maximum(scale, 1e-300)
    u = u[conv]
    x = ch.evaluate(u)
    keep = (np.linalg.norm(x, axis=1) < eps) & (np.linalg.norm(x, axis=1) > 1e-6 * eps)
    if not ch.maps_into_closure:
        keep &= ch.in_domain(u)
    return u[keep]


def _inertia(M: np.ndarray, scale: float) -> int:
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    if np.min(np.abs(ev)) <= HESS_MIN * max(scale, 1e-300):
        raise _Degenerate("degenerate Hessian")
    return int((ev < 0).sum())


def _critical_points(space: StratifiedSpace, v: np.ndarray, eps: float, rng) -> tuple[list, bool]:
    out = []
    incomplete = False
    for s in space.strata:
        if s.is_point:
            continue
        nidx = _normal_index(space, s.id)
        bpts, ipts = [], []
        rates = []
        for ch in s.charts:
            m = ch.intrinsic_dim
            z, rate = _boundary_critical(space, s.id, ch, v, eps, rng)
            rates.append(rate)
            for row in z:
                u, mu = row[:m], row[m]
                if not (ch.maps_into_closure or ch.in_domain(u[None])[0]):
                    continue
                x, J, H = ch.evaluate(u[None])[0], ch.jac(u[None])[0], ch.hess(u[None])[0]
                if abs(mu) < LAMBDA_MIN:
                    raise _Degenerate("multiplier vanishes")
                lam = mu / eps
                hess = np.einsum("abn,n->ab", H, v - lam * x) - lam * J.T @ J
                Z = _complement_frames((J.T @ x)[None])[0]
                idx = _inertia(Z.T @ hess @ Z, np.linalg.norm(J) ** 2 / eps)
                bpts.append((x, int(np.sign(mu)), idx))
            for u in _interior_critical(space, s.id, ch, v, eps, rng):
                x, H = ch.evaluate(u[None])[0], ch.hess(u[None])[0]
                idx = _inertia(np.einsum("abn,n->ab", H, v), np.linalg.norm(ch.jac(u[None])[0]) ** 2 / eps)
                ipts.append((x, 0, idx))
        if rates and max(rates) < 0.01:
            incomplete = True
        for pts, kind in ((bpts, "boundary"), (ipts, "interior")):
            if not pts:
                continue
            X = np.array([p[0] for p in pts])
            for j in dedupe(X, DEDUPE_REL * eps):
                x, sg, idx = pts[j]
                out.append(CriticalPoint(tuple(float(t) for t in x), s.id, kind, sg, idx, nidx, kind == "boundary" and sg < 0))
    out.sort(key=lambda p: (p.stratum, p.kind, p.position))
    return out, incomplete


def _ind_at_0(space: StratifiedSpace, v: np.ndarray) -> int:
    s = space.stratum(space.base_stratum)
    if not s.is_point:
        return 0  # a generic linear form is not critical along a positive-dimensional V_0
    a = space.alpha_of(s.id)
    if callable(a):
        x0 = np.zeros(space.ambient_real_dim) if s.location is None else np.asarray(s.location, dtype=float)
        return int(round(float(np.asarray(a(x0[None], v[None])).ravel()[0])))
    return int(a)


def morse_identity(space: StratifiedSpace, v=None, eps: float = 0.1, seed: int = 0, index: int = 0, raise_incomplete: bool = False) -> MorseReport:
    """chi(X cap B_eps) = ind(v*, X, 0) + sum over inward boundary points of (-1)^sigma ind_nor.

    Interior critical points of v* in the open ball are added as well (with
    their own (-1)^sigma ind_nor), so the count is exact at finite eps; they
    leave the ball as eps shrinks.  Directions hitting a degeneracy are
    redrawn up to MAX_RESAMPLES times.
    """
    if space.kind != GERM:
        raise PreconditionError("the Morse count is set up for germs")
    if not 0 < eps <= 0.5 * EPS_MAX:
        raise RangeError(f"eps = {eps} outside (0, {0.5 * EPS_MAX}]")
    N = space.ambient_real_dim
    lhs = int(space.annotation("chi_ball", 1))
    for attempt in range(MAX_RESAMPLES + 1):
        rng = stream(seed, "morse", space.name, repr(eps), index, attempt)
        if v is None or attempt > 0:
            g = rng.standard_normal(N)
            vv = g / np.linalg.norm(g)
        else:
            vv = np.asarray(v, dtype=float)
            vv = vv / np.linalg.norm(vv)
        try:
            pts, incomplete = _critical_points(space, vv, eps, rng)
        except _Degenerate as exc:
            last = str(exc)
            continue
        ind0 = _ind_at_0(space, vv)
        rhs = ind0 + sum(p.contribution for p in pts)
        rep = MorseReport(space.name, tuple(float(t) for t in vv), eps, pts, ind0, lhs, int(rhs), attempt + 1, incomplete)
        if incomplete and raise_incomplete:
            raise IncompleteSearchError(f"critical point search did not converge on {space.name}")
        return rep
    raise IncompleteSearchError(f"no generic direction after {MAX_RESAMPLES} redraws ({last})")


def mean_boundary_from_reports(space: StratifiedSpace, reports: list, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol=None) -> IdentityReport:
    """Compare the mean inward sum of finished Morse reports (one eps) with the sphere measure."""
    if not reports:
        raise PreconditionError("no Morse reports to average")
    eps = reports[0].eps
    if any(r.eps != eps for r in reports):
        raise PreconditionError("Morse reports mix radii")
    arr = np.array([r.inward_sum for r in reports], dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    bm = boundary_gb_measure(space, eps, samples, seed)
    lhs = float(arr.mean())
    t = default_tolerance(lhs) if tol is None else float(tol)
    terms = {"measure": bm.to_dict(), "directions": len(arr)}
    return IdentityReport("mean_boundary", space.name, lhs, bm.total, se, bm.stderr, t, terms, [f"eps={eps}"])


def mean_boundary_identity(
    space: StratifiedSpace, eps: float = 0.1, n_directions: int = 64, samples: int = DEFAULT_SAMPLES, seed: int = 0, runner=None, tol=None
) -> IdentityReport:
    """Haar mean over v of the inward boundary sum against the sphere measure at eps."""
    jobs = list(range(int(n_directions)))
    fn = lambda i: morse_identity(space, None, eps, seed, i)
    reps = runner(fn, jobs) if runner is not None else [fn(i) for i in jobs]
    return mean_boundary_from_reports(space, reps, samples, seed, tol)
