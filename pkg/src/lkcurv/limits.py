"""Scaled limits of the curvature measures and the index-formula verifiers."""

from __future__ import annotations

import math
from typing import Iterable, Optional

from .constructible import (
    ConstructibleFunction,
    eta,
    eta_table,
    eu_label,
    euler_characteristic,
    euler_obstruction,
    indicator_of_space,
    local_euler_obstruction,
)
from .curvature import DEFAULT_SAMPLES, curvature_table, default_ladder
from .errors import DataError, PreconditionError, RangeError
from .mathkit import EpsilonLadder, LimitEstimate, ball_volume, extrapolate_limit
from .report import IdentityReport, default_tolerance
from .variety.space import GERM, GLOBAL, StratifiedSpace

__all__ = [
    "IdentityReport",
    "LimitEstimate",
    "scaled_limits",
    "stratum_curvature_limit",
    "verify_local_gb",
    "verify_main_theorem",
    "euler_obstruction_via_curvature",
    "verify_global",
]

LOCAL_GB_TOL = 0.02


def _scale(series, k: int):
    b = ball_volume(k)
    return [(e, v / (b * e**k), se / (b * e**k)) for e, v, se in series]


def _table(space, ladder, samples, seed, runner):
    ladder = ladder or default_ladder(space)
    return curvature_table(space, ladder, samples, seed, runner), ladder


def scaled_limits(
    space: StratifiedSpace,
    ks: Optional[Iterable[int]] = None,
    ladder: Optional[EpsilonLadder] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    runner=None,
) -> dict[int, LimitEstimate]:
    """lim Lambda_k / (b_k eps^k) for each k; for global spaces the limit is R to infinity."""
    tab, ladder = _table(space, ladder, samples, seed, runner)
    ks = range(space.ambient_real_dim + 1) if ks is None else ks
    out = {}
    for k in ks:
        if k < 0 or k > space.ambient_real_dim:
            raise RangeError(f"k = {k} outside [0, {space.ambient_real_dim}]")
        ser = tab.series(k)
        out[k] = extrapolate_limit(_scale(ser.values, k), ladder.kind, tag=k)
    return out


def _exact(value: float, tag, ladder: EpsilonLadder) -> LimitEstimate:
    return LimitEstimate(float(value), 0.0, 0.0, tag, tuple(ladder.values), [])


def stratum_curvature_limit(
    space: StratifiedSpace,
    i: str,
    e: int,
    ladder: Optional[EpsilonLadder] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    runner=None,
) -> LimitEstimate:
    """L(i, e) = lim (1 / (b_{2e} eps^{2e})) (1 / s_{2n-2e-1}) * integral of K_{2(d_i - e)} over V_i cap B_eps.

    No normal Morse index weight is applied.  For a global space the limit
    is taken over balls of radius R growing to infinity.
    """
    if not space.is_complex:
        raise PreconditionError("stratum limits need a complex space")
    s = space.stratum(i)
    n = space.ambient_real_dim // 2
    if not 0 <= e <= n:
        raise RangeError(f"e = {e} outside [0, {n}]")
    ladder = ladder or default_ladder(space)
    tag = (i, e)
    if e > s.complex_dim:
        return _exact(0.0, tag, ladder)
    if s.is_point:
        return _exact(1.0 if e == 0 else 0.0, tag, ladder)
    tab, ladder = _table(space, ladder, samples, seed, runner)
    ser = tab.unweighted(i, 2 * e)
    return extrapolate_limit(_scale(ser, 2 * e), ladder.kind, tag=tag)


def _tol(lhs: float, tol: Optional[float]) -> float:
    return default_tolerance(lhs) if tol is None else float(tol)


def verify_local_gb(space: StratifiedSpace, ladder=None, samples: int = DEFAULT_SAMPLES, seed: int = 0, runner=None, tol=None) -> IdentityReport:
    """1 = sum over k = d_0 .. dim X of lim Lambda_k / (b_k eps^k)."""
    if space.kind != GERM:
        raise PreconditionError("local Gauss-Bonnet needs a germ")
    d0 = space.stratum(space.base_stratum).real_dim
    lims = scaled_limits(space, range(d0, space.dim + 1), ladder, samples, seed, runner)
    rhs = sum(l.value for l in lims.values())
    se = math.sqrt(sum(l.stderr**2 for l in lims.values()))
    terms = {f"k={k}": {"value": l.value, "stderr": l.stderr} for k, l in lims.items()}
    return IdentityReport("local_gb", space.name, 1, rhs, 0.0, se, LOCAL_GB_TOL if tol is None else float(tol), terms)


def _stratum_limits(space, es_for, ladder, samples, seed, runner) -> dict:
    out = {}
    for s in space.strata:
        out[s.id] = {e: stratum_curvature_limit(space, s.id, e, ladder, samples, seed, runner) for e in es_for(s)}
    return out


def verify_main_theorem(
    space: StratifiedSpace,
    phi: Optional[ConstructibleFunction] = None,
    label: str = "1_X",
    ladder=None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    runner=None,
    tol=None,
) -> IdentityReport:
    """phi(0) = eta(V_0, phi) + sum over i != 0 of sum_{e = d_0 + 1}^{d_i} L(i, e) eta(V_i, phi)."""
    if space.kind != GERM or not space.is_complex:
        raise PreconditionError("the local index formula needs a complex germ")
    phi = phi if phi is not None else indicator_of_space(space)
    v0 = space.base_stratum
    d0 = space.stratum(v0).complex_dim
    table = eta_table(space)
    etas = {i: eta(space, phi, i, table) for i in space.ids}
    lims = _stratum_limits(
        space, lambda s: range(d0 + 1, s.complex_dim + 1) if s.id != v0 else (), ladder, samples, seed, runner
    )
    rhs = float(etas[v0])
    var = 0.0
    terms = {v0: {"eta": etas[v0]}}
    for i, per in lims.items():
        if i == v0:
            continue
        tot = sum(l.value for l in per.values())
        se = math.sqrt(sum(l.stderr**2 for l in per.values()))
        rhs += tot * etas[i]
        var += (se * etas[i]) ** 2
        terms[i] = {"eta": etas[i], "L": {str(e): l.value for e, l in per.items()}, "sum": tot, "stderr": se}
    lhs = phi(v0)
    return IdentityReport("main_theorem", space.name, lhs, rhs, 0.0, math.sqrt(var), _tol(lhs, tol), terms, [label])


def euler_obstruction_via_curvature(
    space: StratifiedSpace, ladder=None, samples: int = DEFAULT_SAMPLES, seed: int = 0, runner=None, tol=None
) -> tuple[LimitEstimate, IdentityReport]:
    """Eu_X(0) from the curvature limits of the top strata.

    This is the index formula applied to Eu_X, so eta(V_0, Eu_X) appears; it
    is 1 when V_0 is itself a top stratum and 0 otherwise.
    """
    if space.kind != GERM or not space.is_complex:
        raise PreconditionError("Euler obstruction via curvature needs a complex germ")
    v0 = space.base_stratum
    d0 = space.stratum(v0).complex_dim
    eu = euler_obstruction(space)
    atom = eta(space, eu, v0)
    tops = [t for t in space.top_strata if t != v0]
    value = float(atom)
    var = 0.0
    terms = {v0: {"eta": atom}}
    per_e: dict = {}
    for t in tops:
        s = space.stratum(t)
        row = {}
        for e in range(d0 + 1, s.complex_dim + 1):
            l = stratum_curvature_limit(space, t, e, ladder, samples, seed, runner)
            row[str(e)] = l.value
            value += l.value
            var += l.stderr**2
            per_e[e] = per_e.get(e, 0.0) + l.value
        terms[t] = {"L": row}
    terms["per_e"] = {str(e): v for e, v in sorted(per_e.items())}
    est = LimitEstimate(value, math.sqrt(var), 0.0, "Eu(0)", tuple((ladder or default_ladder(space)).values), [])
    lhs = local_euler_obstruction(space)
    rep = IdentityReport("euler_via_curvature", space.name, lhs, value, 0.0, est.stderr, _tol(lhs, tol), terms, [eu_label(space)])
    return est, rep


def verify_global(
    space: StratifiedSpace,
    variant: str = "gb",
    phi: Optional[ConstructibleFunction] = None,
    ladder: Optional[EpsilonLadder] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    runner=None,
    tol=None,
    label: str = "1_X",
) -> IdentityReport:
    """Global versions as R grows: "gb", "main" (needs phi, default 1_X) or "euler"."""
    if space.kind != GLOBAL:
        raise PreconditionError("global identities need a global space")
    ladder = ladder or default_ladder(space)
    if variant == "gb":
        lhs = euler_characteristic(space, indicator_of_space(space))
        lims = scaled_limits(space, None, ladder, samples, seed, runner)
        rhs = sum(l.value for l in lims.values())
        se = math.sqrt(sum(l.stderr**2 for l in lims.values()))
        terms = {f"k={k}": {"value": l.value, "stderr": l.stderr} for k, l in lims.items()}
        return IdentityReport("global_gb", space.name, lhs, rhs, 0.0, se, _tol(lhs, tol), terms)
    if not space.is_complex:
        raise PreconditionError(f"variant {variant!r} needs a complex space")
    lims = _stratum_limits(space, lambda s: range(0, s.complex_dim + 1), ladder, samples, seed, runner)
    if variant == "main":
        phi = phi if phi is not None else indicator_of_space(space)
        lhs = euler_characteristic(space, phi)
        table = eta_table(space)
        rhs, var, terms = 0.0, 0.0, {}
        for i, per in lims.items():
            h = eta(space, phi, i, table)
            tot = sum(l.value for l in per.values())
            se = math.sqrt(sum(l.stderr**2 for l in per.values()))
            rhs += h * tot
            var += (h * se) ** 2
            terms[i] = {"eta": h, "L": {str(e): l.value for e, l in per.items()}, "sum": tot}
        return IdentityReport("global_main", space.name, lhs, rhs, 0.0, math.sqrt(var), _tol(lhs, tol), terms, [label])
    if variant == "euler":
        lhs = euler_characteristic(space, euler_obstruction(space))
        rhs, var, terms = 0.0, 0.0, {}
        for t in space.top_strata:
            per = lims[t]
            rhs += sum(l.value for l in per.values())
            var += sum(l.stderr**2 for l in per.values())
            terms[t] = {"L": {str(e): l.value for e, l in per.items()}}
        return IdentityReport("global_euler", space.name, lhs, rhs, 0.0, math.sqrt(var), _tol(lhs, tol), terms, [eu_label(space)])
    raise DataError(f"unknown global variant {variant!r}")
