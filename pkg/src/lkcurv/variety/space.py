"""Strata, closure poset and complex-link data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from ..errors import DataError, StratumLookupError
from ..mathkit import stream
from .charts import Chart, gram_sqrt_det

AMBIENT = "X"
GERM = "germ"
GLOBAL = "global"
EPS_MAX = 1.0

AlphaData = Union[None, float, int, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Stratum:
    id: str
    real_dim: int
    is_complex: bool
    charts: tuple[Chart, ...] = ()
    alpha: AlphaData = None
    location: Optional[tuple[float, ...]] = None  # for point strata

    @property
    def complex_dim(self) -> Optional[int]:
        return self.real_dim // 2 if self.is_complex else None

    @property
    def is_point(self) -> bool:
        return self.real_dim == 0


@dataclass(frozen=True)
class LinkTable:
    """chi_link[(i, j)] = chi(complex link of V_i  intersected with closure of V_j).

    ``j`` may be the ambient marker ``"X"``.
    """

    chi_link: Mapping[tuple[str, str], int]

    def get(self, i: str, j: str) -> int:
        if i == j:
            return 0
        try:
            return self.chi_link[(i, j)]
        except KeyError:
            raise DataError(f"link table has no entry for pair ({i}, {j})") from None

    def has(self, i: str, j: str) -> bool:
        return i == j or (i, j) in self.chi_link


@dataclass(frozen=True)
class Annotation:
    value: object
    derivation: str = ""


@dataclass(frozen=True)
class DefiningEquations:
    """Real equations F(x) = 0 cutting out the closure of X, with Jacobian DF.

    ``F`` maps (P, N) to (P, q); ``DF`` maps (P, N) to (P, q, N).
    """

    F: Callable[[np.ndarray], np.ndarray]
    DF: Callable[[np.ndarray], np.ndarray]
    count: int


def holomorphic_equation(g: Callable, dg: Callable, n: int) -> DefiningEquations:
    """One holomorphic equation g(z) = 0 on C^n, as two real equations.

    ``dg(z)`` returns the (P, n) complex gradient.
    """
    from .charts import to_complex

    def F(x):
        v = g(to_complex(x))
        return np.stack([v.real, v.imag], axis=1)

    def DF(x):
        d = dg(to_complex(x))
        out = np.zeros((len(x), 2, 2 * n))
        out[:, 0, 0::2], out[:, 0, 1::2] = d.real, -d.imag
        out[:, 1, 0::2], out[:, 1, 1::2] = d.imag, d.real
        return out

    return DefiningEquations(F, DF, 2)


@dataclass(frozen=True)
class StratifiedSpace:
    name: str
    ambient_real_dim: int
    strata: tuple[Stratum, ...]
    closure_order: frozenset  # strict pairs (i, j) with V_i in closure(V_j)
    kind: str = GERM
    link_table: LinkTable = field(default_factory=lambda: LinkTable({}))
    oracle_annotations: Mapping[str, Annotation] = field(default_factory=dict)
    equidimensional: bool = True
    defining: Optional[DefiningEquations] = None

    # -- lookup -------------------------------------------------------------

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.strata]

    def stratum(self, sid: str) -> Stratum:
        for s in self.strata:
            if s.id == sid:
                return s
        raise StratumLookupError(f"unknown stratum {sid!r} in space {self.name!r}")

    def leq(self, i: str, j: str) -> bool:
        return i == j or (i, j) in self._closure

    @property
    def _closure(self) -> frozenset:
        return _transitive(self.closure_order)

    def below(self, j: str) -> list[str]:
        """Ids i with V_i contained in the closure of V_j (including j)."""
        self.stratum(j)
        return [i for i in self.ids if self.leq(i, j)]

    def sorted_ids(self) -> list[str]:
        """Ids in an order compatible with the closure poset (dimension first)."""
        return sorted(self.ids, key=lambda i: (self.stratum(i).real_dim, self.ids.index(i)))

    @property
    def top_strata(self) -> list[str]:
        return [j for j in self.ids if not any(i != j and self.leq(j, i) for i in self.ids)]

    @property
    def minimal_strata(self) -> list[str]:
        return [i for i in self.ids if not any(j != i and self.leq(j, i) for j in self.ids)]

    @property
    def base_stratum(self) -> str:
        """The stratum V_0 containing the germ point."""
        mins = self.minimal_strata
        if len(mins) != 1:
            raise DataError(f"space {self.name!r} has {len(mins)} minimal strata")
        return mins[0]

    @property
    def dim(self) -> int:
        return max(s.real_dim for s in self.strata)

    @property
    def is_complex(self) -> bool:
        return all(s.is_complex for s in self.strata)

    @property
    def n(self) -> int:
        return self.ambient_real_dim // 2

    def annotation(self, key: str, default=None):
        a = self.oracle_annotations.get(key)
        return default if a is None else a.value

    # -- normal Morse data --------------------------------------------------

    def eta_top(self, i: str) -> int:
        """eta(V_i, 1_X) = 1 - chi(complex link of V_i in X)."""
        return 1 - self.link_table.get(i, AMBIENT)

    def alpha_of(self, i: str):
        """Index data of stratum i: an int for complex strata, else the supplied data."""
        s = self.stratum(i)
        if s.alpha is not None:
            return s.alpha
        if s.is_complex:
            return self.eta_top(i)
        raise DataError(f"real stratum {i!r} has no alpha data")

    def chi_strata(self) -> dict[str, int]:
        out = {}
        for i in self.ids:
            v = self.annotation(f"chi[{i}]")
            if v is not None:
                out[i] = int(v)
        return out


def _transitive(pairs) -> frozenset:
    rel = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            for c, d in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return frozenset(rel)


# --------------------------------------------------------------------------
# validation


@dataclass
class Failure:
    invariant: str
    message: str
    witness: object = None


@dataclass
class ValidationReport:
    space: str
    failures: list[Failure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, invariant, message, witness=None):
        self.failures.append(Failure(invariant, message, witness))

    def summary(self) -> str:
        if self.ok:
            return f"{self.space}: valid"
        return "\n".join(f"{self.space}: {f.invariant}: {f.message}" for f in self.failures)


def interior_samples(space: StratifiedSpace, chart: Chart, count: int, seed: int = 0, tag="interior"):
    """Parameter points of ``chart`` in a radius band away from the germ point."""
    if space.kind == GERM:
        r_lo, r_hi = 0.05 * EPS_MAX, 0.5 * EPS_MAX
    else:
        r_lo, r_hi = 0.5, 8.0
    rng = stream(seed, tag, chart.name)
    out = []
    total = 0
    for _ in range(64):
        z = rng.random((4 * count, chart.sample_dim))
        u, _ = chart.sample(z, r_lo, r_hi)
        x = chart.evaluate(u)
        r = np.linalg.norm(x, axis=1)
        keep = chart.in_domain(u) & (r >= r_lo) & (r <= r_hi)
        out.append(u[keep])
        total += keep.sum()
        if total >= count:
            break
    u = np.vstack(out)[:count]
    return u


def validate(space: StratifiedSpace, n_points: int = 1000, n_deriv: int = 100, seed: int = 0) -> ValidationReport:
    rep = ValidationReport(space.name)
    ids = [s.id for s in space.strata]
    if len(set(ids)) != len(ids):
        rep.add("ids", "duplicate stratum ids", ids)
    if space.kind not in (GERM, GLOBAL):
        rep.add("kind", f"unknown kind {space.kind!r}")

    # poset
    known = set(ids)
    for a, b in space.closure_order:
        if a not in known or b not in known:
            rep.add("order", "closure pair names an unknown stratum", (a, b))
    clo = _transitive(space.closure_order)
    for a, b in clo:
        if a == b or (b, a) in clo:
            rep.add("order violation", "closure order has a cycle", (a, b))
            break
    dims = {s.id: s.real_dim for s in space.strata}
    for a, b in clo:
        if a in dims and b in dims and a != b and not dims[a] < dims[b]:
            rep.add("frontier", f"dim {a} = {dims[a]} is not below dim {b} = {dims[b]}", (a, b))

    for s in space.strata:
        if s.is_complex and s.real_dim % 2:
            rep.add("parity", f"complex stratum {s.id} has odd real dimension {s.real_dim}", s.id)
        if s.real_dim > space.ambient_real_dim:
            rep.add("dimension", f"stratum {s.id} exceeds the ambient dimension", s.id)
        if not s.is_complex and s.alpha is None:
            rep.add("alpha", f"real stratum {s.id} has no alpha data", s.id)
        if s.real_dim > 0 and not s.charts:
            rep.add("charts", f"stratum {s.id} has no charts", s.id)

    if space.kind == GERM and not rep.failures:
        mins = [i for i in ids if not any(j != i and (j, i) in clo for j in ids)]
        if len(mins) != 1:
            rep.add("germ", f"expected one minimal stratum, found {mins}", mins)
        else:
            v0 = mins[0]
            for i in ids:
                if i != v0 and (v0, i) not in clo:
                    rep.add("germ", f"0 is not in the closure of {i}", i)

    # link table
    if space.is_complex and not any(f.invariant == "order violation" for f in rep.failures):
        lt = space.link_table
        for (i, j), v in lt.chi_link.items():
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                rep.add("link", f"non-integer link entry for ({i}, {j})", v)
            if j != AMBIENT and (i, j) not in clo:
                rep.add("link", f"link entry for unrelated pair ({i}, {j})", (i, j))
        for i, j in clo:
            if not lt.has(i, j):
                rep.add("link", f"missing link entry for ({i}, {j})", (i, j))
        for i in ids:
            if not lt.has(i, AMBIENT):
                rep.add("link", f"missing link entry for ({i}, X)", (i, AMBIENT))
        for t in [j for j in ids if not any((j, k) in clo for k in ids)]:
            if lt.has(t, AMBIENT) and lt.get(t, AMBIENT) != 0:
                rep.add("link", f"top stratum {t} must have eta(V, 1_X) = 1", t)

    # charts
    for s in space.strata:
        for c in s.charts:
            if not isinstance(c.sheet_count, (int, np.integer)) or c.sheet_count < 1:
                rep.add("sheet_count", f"chart {c.name or s.id} has sheet_count {c.sheet_count}", c.name)
                continue
            if c.intrinsic_dim != s.real_dim or c.ambient_dim != space.ambient_real_dim:
                rep.add("chart dims", f"chart {c.name} dims ({c.intrinsic_dim}, {c.ambient_dim}) disagree with stratum {s.id}")
                continue
            try:
                u = interior_samples(space, c, n_points, seed)
            except Exception as exc:  # a broken callback is a validation failure, not a crash
                rep.add("chart", f"chart {c.name} failed to sample: {exc}")
                continue
            if len(u) == 0:
                rep.add("chart", f"chart {c.name} has no interior points")
                continue
            J = c.jac(u)
            g = gram_sqrt_det(J)
            scale = np.linalg.norm(J, axis=(1, 2)) ** c.intrinsic_dim
            bad = np.nonzero(g <= 1e-10 * np.maximum(scale, 1e-300))[0]
            if len(bad):
                rep.add("rank", f"chart {c.name} Jacobian is rank deficient", u[bad[0]].tolist())
            if space.defining is not None:
                x = c.evaluate(u)
                F, DF = space.defining.F(x), space.defining.DF(x)
                res = np.linalg.norm(F, axis=1)
                tol = 1e-8 * np.maximum(np.linalg.norm(DF, axis=(1, 2)) * np.linalg.norm(x, axis=1), 1e-300)
                if np.any(res > tol):
                    rep.add("equations", f"chart {c.name} leaves the zero set of the defining equations", x[int(np.argmax(res / tol))].tolist())
            if c.has_analytic_derivatives:
                ud = u[:n_deriv]
                Ja, Jf = J[:n_deriv], c.fd_jac(ud)
                err = np.abs(Ja - Jf).max(axis=(1, 2)) / (1 + np.abs(Ja).max(axis=(1, 2)))
                Jf2 = c.fd_jac(ud + 1e-7 * (1 + np.abs(ud)))
                err = np.where(np.abs(Jf - Jf2).max(axis=(1, 2)) < 1e-3 * (1 + np.abs(Ja).max(axis=(1, 2))), err, 0.0)
                if err.max() > 1e-5:
                    rep.add("derivatives", f"chart {c.name} Jacobian disagrees with finite differences", ud[int(err.argmax())].tolist())
                Ha, (Hf, smooth) = c.hess(ud), c.fd_hess(ud)
                err = np.abs(Ha - Hf).max(axis=(1, 2, 3)) / (1 + np.abs(Ha).max(axis=(1, 2, 3)))
                err = np.where(smooth, err, 0.0)
                if smooth.mean() < 0.9:
                    rep.add("derivatives", f"chart {c.name} is not smooth at most sampled points")
                elif err.max() > 1e-5:
                    rep.add("derivatives", f"chart {c.name} Hessian disagrees with finite differences", ud[int(err.argmax())].tolist())
    return rep


# --------------------------------------------------------------------------
# closures


def restrict_to_closure(space: StratifiedSpace, j: str) -> StratifiedSpace:
    keep = space.below(j)
    kept = set(keep)
    strata = tuple(s for s in space.strata if s.id in kept)
    order = frozenset((a, b) for a, b in _transitive(space.closure_order) if a in kept and b in kept)
    chi = {}
    for (a, b), v in space.link_table.chi_link.items():
        if a in kept and b in kept:
            chi[(a, b)] = v
    for a in keep:
        chi[(a, AMBIENT)] = space.link_table.get(a, j) if space.is_complex else 0
    notes = {k: v for k, v in space.oracle_annotations.items() if k.startswith("chi[") and k[4:-1] in kept}
    name = space.name if j in space.top_strata and len(space.top_strata) == 1 else f"{space.name}|closure({j})"
    return StratifiedSpace(
        name,
        space.ambient_real_dim,
        strata,
        order,
        space.kind,
        LinkTable(chi),
        notes if name != space.name else dict(space.oracle_annotations),
        space.equidimensional,
    )
