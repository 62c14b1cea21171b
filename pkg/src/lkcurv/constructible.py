"""Integer calculus of constructible functions on a stratification poset.

A constructible function is stored in the open basis, phi = sum n_i 1_{V_i}.
Closed indicators 1_{closure(V_j)} are sums of open ones over the strata
below V_j; the inverse change of basis is Moebius inversion on the poset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import DataError, SolverError
from .report import IdentityReport
from .variety.space import AMBIENT, GERM, GLOBAL, StratifiedSpace


@dataclass(frozen=True)
class ConstructibleFunction:
    weights: Mapping[str, int]

    def __call__(self, sid: str) -> int:
        return self.weights[sid]

    def __add__(self, other: "ConstructibleFunction") -> "ConstructibleFunction":
        keys = set(self.weights) | set(other.weights)
        return ConstructibleFunction({k: self.weights.get(k, 0) + other.weights.get(k, 0) for k in sorted(keys)})

    def __rmul__(self, a: int) -> "ConstructibleFunction":
        return ConstructibleFunction({k: int(a) * v for k, v in self.weights.items()})

    def to_dict(self) -> dict:
        return dict(self.weights)


def zero(space: StratifiedSpace) -> ConstructibleFunction:
    return ConstructibleFunction({i: 0 for i in space.ids})


def open_indicator(space: StratifiedSpace, j: str) -> ConstructibleFunction:
    space.stratum(j)
    return ConstructibleFunction({i: int(i == j) for i in space.ids})


def closed_indicator(space: StratifiedSpace, j: str) -> ConstructibleFunction:
    space.stratum(j)
    return ConstructibleFunction({i: int(space.leq(i, j)) for i in space.ids})


def indicator_of_space(space: StratifiedSpace) -> ConstructibleFunction:
    return ConstructibleFunction({i: 1 for i in space.ids})


def check_function(space: StratifiedSpace, phi: ConstructibleFunction) -> None:
    if set(phi.weights) != set(space.ids):
        raise DataError(f"constructible function keys {sorted(phi.weights)} do not match strata {space.ids}")
    for k, v in phi.weights.items():
        if int(v) != v:
            raise DataError(f"weight of {k} is not an integer")


# --------------------------------------------------------------------------
# change of basis


def moebius(space: StratifiedSpace) -> dict[tuple[str, str], int]:
    """Moebius function mu(x, y) of the closure poset, for x <= y."""
    ids = space.sorted_ids()
    mu: dict[tuple[str, str], int] = {}
    for x in ids:
        mu[(x, x)] = 1
        above = [y for y in ids if y != x and space.leq(x, y)]
        for y in above:  # sorted_ids lists lower-dimensional strata first
            mu[(x, y)] = -sum(mu[(x, z)] for z in ids if space.leq(x, z) and space.leq(z, y) and z != y and (x, z) in mu)
    return mu


def to_closed_basis(space: StratifiedSpace, phi: ConstructibleFunction) -> dict[str, int]:
    """Coefficients c_j with phi = sum c_j 1_{closure(V_j)}."""
    check_function(space, phi)
    mu = moebius(space)
    return {j: sum(mu[(j, i)] * phi.weights[i] for i in space.ids if space.leq(j, i)) for j in space.ids}


def from_closed_basis(space: StratifiedSpace, coeffs: Mapping[str, int]) -> ConstructibleFunction:
    for j in coeffs:
        space.stratum(j)
    return ConstructibleFunction({i: sum(int(c) for j, c in coeffs.items() if space.leq(i, j)) for i in space.ids})


def parse_function(space: StratifiedSpace, spec: Mapping) -> ConstructibleFunction:
    """Read {"weights": {...}, "basis": "open" | "closed"} or a flat map with "basis"."""
    spec = dict(spec)
    basis = spec.pop("basis", "open")
    weights = spec.pop("weights", spec)
    weights = {str(k): int(v) for k, v in weights.items()}
    for k in weights:
        space.stratum(k)
    if basis == "closed":
        return from_closed_basis(space, weights)
    if basis != "open":
        raise DataError(f"unknown basis {basis!r}")
    return ConstructibleFunction({i: weights.get(i, 0) for i in space.ids})


# --------------------------------------------------------------------------
# normal Morse indices


@dataclass(frozen=True)
class EtaTable:
    eta: Mapping[tuple[str, str], int]

    def __call__(self, v: str, j: str) -> int:
        return self.eta[(v, j)]


def eta_table(space: StratifiedSpace) -> EtaTable:
    """eta(V_i, 1_{closure(V_j)}) for all pairs."""
    out = {}
    for i in space.ids:
        for j in space.ids:
            if i == j:
                out[(i, j)] = 1
            elif space.leq(i, j):
                if not space.link_table.has(i, j):
                    raise DataError(f"link table has no entry for pair ({i}, {j})")
                out[(i, j)] = 1 - space.link_table.get(i, j)
            else:
                out[(i, j)] = 0
    return EtaTable(out)


def eta(space: StratifiedSpace, phi: ConstructibleFunction, v: str, table: Optional[EtaTable] = None) -> int:
    """Normal Morse index eta(V, phi), by linearity over closed indicators."""
    space.stratum(v)
    table = table or eta_table(space)
    c = to_closed_basis(space, phi)
    return int(sum(cj * table(v, j) for j, cj in c.items() if cj))


# --------------------------------------------------------------------------
# Euler obstructions


def euler_obstruction_basis(space: StratifiedSpace) -> dict[str, ConstructibleFunction]:
    """Eu_{closure(V_j)} for every stratum j: the eta-dual basis.

    For each j the coefficients a_i in the closed basis (supported on the
    closure of V_j) solve eta(V_i, Eu) = delta_ij.  The system is
    unitriangular for the poset and is solved from V_j downwards.
    """
    table = eta_table(space)
    for i in space.ids:
        if space.link_table.chi_link.get((i, i), 0) != 0:
            raise SolverError(f"row {i}: diagonal entry eta(V_{i}, 1_closure) is not 1")
    basis = {}
    for j in space.ids:
        below = [i for i in space.ids if space.leq(i, j)]
        order = sorted(below, key=lambda i: -space.stratum(i).real_dim)
        a = {}
        for i in order:
            if i == j:
                a[i] = 1
                continue
            diag = table(i, i)
            if diag != 1:
                raise SolverError(f"row {i}: diagonal entry {diag} is not 1")
            a[i] = -sum(a[k] * table(i, k) for k in a if k != i)
        basis[j] = from_closed_basis(space, a)
    return basis


def verify_eta_duality(space: StratifiedSpace) -> IdentityReport:
    """eta(V_i, Eu_{closure(V_j)}) = delta_ij; lhs counts pairs, rhs counts matches."""
    basis = euler_obstruction_basis(space)
    table = eta_table(space)
    bad = []
    for i in space.ids:
        for j in space.ids:
            if eta(space, basis[j], i, table) != int(i == j):
                bad.append([i, j])
    n = len(space.ids) ** 2
    return IdentityReport("eta_duality", space.name, n, n - len(bad), terms={"mismatches": bad})


def euler_obstruction(space: StratifiedSpace) -> ConstructibleFunction:
    """Eu_X: sum of the basis elements of the top strata."""
    basis = euler_obstruction_basis(space)
    total = zero(space)
    for t in space.top_strata:
        total = total + basis[t]
    return total


def eu_label(space: StratifiedSpace) -> str:
    return "Eu" if space.equidimensional else "eta-dual basis element"


def local_euler_obstruction(space: StratifiedSpace) -> int:
    """Eu_X(0) for a germ."""
    return euler_obstruction(space)(space.base_stratum)


def corpus_functions(space: StratifiedSpace) -> list[tuple[str, ConstructibleFunction]]:
    """1_X, every closed indicator and every basis element."""
    out = [("1_X", indicator_of_space(space))]
    out += [(f"1_cl({j})", closed_indicator(space, j)) for j in space.ids]
    basis = euler_obstruction_basis(space)
    out += [(f"Eu_cl({j})", basis[j]) for j in space.ids]
    return out


# --------------------------------------------------------------------------
# index formulas


def bdk_local(space: StratifiedSpace, phi: ConstructibleFunction, label: str = "phi") -> IdentityReport:
    """phi(0) = sum_i Eu_{closure(V_i)}(0) eta(V_i, phi)."""
    if space.kind != GERM:
        raise DataError("bdk_local needs a germ")
    check_function(space, phi)
    v0 = space.base_stratum
    basis = euler_obstruction_basis(space)
    table = eta_table(space)
    terms = {}
    rhs = 0
    for i in space.ids:
        e = eta(space, phi, i, table)
        w = basis[i](v0)
        terms[i] = {"Eu(0)": w, "eta": e}
        rhs += w * e
    lhs = phi(v0)
    return IdentityReport("bdk_local", space.name, lhs, rhs, terms=terms, notes=[label])


def euler_characteristic(space: StratifiedSpace, phi: ConstructibleFunction, chi_strata: Optional[Mapping[str, int]] = None) -> int:
    """chi(X, phi) = sum n_i chi(V_i)."""
    check_function(space, phi)
    chi = dict(space.chi_strata() if chi_strata is None else chi_strata)
    total = 0
    for i, n in phi.weights.items():
        if n == 0:
            continue
        if i not in chi:
            raise DataError(f"no Euler characteristic for stratum {i}")
        total += n * chi[i]
    return int(total)


def global_euler_obstructions(space: StratifiedSpace, chi_strata: Optional[Mapping[str, int]] = None) -> dict[str, int]:
    """Eu(closure(V_j)) = chi(X, Eu_{closure(V_j)})."""
    basis = euler_obstruction_basis(space)
    return {j: euler_characteristic(space, basis[j], chi_strata) for j in space.ids}


def bdk_global(
    space: StratifiedSpace,
    phi: ConstructibleFunction,
    chi_strata: Optional[Mapping[str, int]] = None,
    global_eu: Optional[Mapping[str, float]] = None,
    label: str = "phi",
) -> IdentityReport:
    """chi(X, phi) = sum_i Eu(closure(V_i)) eta(V_i, phi)."""
    if space.kind != GLOBAL:
        raise DataError("bdk_global needs a global space")
    lhs = euler_characteristic(space, phi, chi_strata)
    eus = dict(global_euler_obstructions(space, chi_strata) if global_eu is None else global_eu)
    table = eta_table(space)
    terms = {}
    rhs = 0
    for i in space.ids:
        e = eta(space, phi, i, table)
        if e and i not in eus:
            raise DataError(f"no global Euler obstruction for the closure of {i}")
        terms[i] = {"Eu": eus.get(i), "eta": e}
        rhs += (eus.get(i) or 0) * e
    return IdentityReport("bdk_global", space.name, lhs, rhs, terms=terms, notes=[label])
