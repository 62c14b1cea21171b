"""Builtin verification corpus.

Complex-link Euler characteristics are data.  Each entry records how it was
obtained: a point count of a generic affine line near 0 for curve germs, and
chi(Y) - chi(Y cap H) for a cone over a smooth projective curve Y.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import StratumLookupError
from .charts import Bounded, Homogeneous, Radial, holomorphic_chart, linear_chart
from .space import AMBIENT, GERM, GLOBAL, Annotation, LinkTable, StratifiedSpace, Stratum, holomorphic_equation

ORIGIN2 = (0.0,) * 4
ORIGIN3 = (0.0,) * 6


def _notes(items: dict) -> dict:
    return {k: Annotation(v[0], v[1]) for k, v in items.items()}


def complex_line_chart(direction, name: str):
    """z -> z * direction, a complex line through 0 in C^n."""
    w = np.asarray(direction, dtype=complex)
    n = len(w)
    c = float(np.linalg.norm(w))
    return holomorphic_chart(
        lambda z: z[:, :1] * w,
        lambda z: np.broadcast_to(w[None, :, None], (len(z), n, 1)).copy(),
        lambda z: np.zeros((len(z), 1, 1, n), dtype=complex),
        1,
        n,
        name=name,
        radial=Homogeneous(1.0, c, c),
    )


def _point(sid: str, n: int) -> Stratum:
    return Stratum(sid, 0, True, (), location=(0.0,) * (2 * n))


def _line_stratum(sid, direction):
    return Stratum(sid, 2, True, (complex_line_chart(direction, sid),))


# --------------------------------------------------------------------------
# curve germs in C^2


def smooth_line() -> StratifiedSpace:
    return StratifiedSpace(
        "smooth_line",
        4,
        (_line_stratum("V_0", [1, 0]),),
        frozenset(),
        GERM,
        LinkTable({("V_0", AMBIENT): 0}),
        _notes(
            {
                "eu0": (1, "smooth germ"),
                "chi_ball": (1, "contractible"),
                "lelong": (1, "linear"),
                "sigma": ({0: 1, 1: 1, 2: 1, 3: 0, 4: 0}, "transversal slices of a line"),
            }
        ),
    )


def node() -> StratifiedSpace:
    return StratifiedSpace(
        "node",
        4,
        (_point("V_0", 2), _line_stratum("V_1", [1, 0]), _line_stratum("V_2", [0, 1])),
        frozenset({("V_0", "V_1"), ("V_0", "V_2")}),
        GERM,
        LinkTable({("V_0", "V_1"): 1, ("V_0", "V_2"): 1, ("V_0", AMBIENT): 2, ("V_1", AMBIENT): 0, ("V_2", AMBIENT): 0}),
        _notes(
            {
                "eu0": (2, "triangular solve from chi_link"),
                "chi_ball": (1, "cone over two circles"),
                "lelong": (2, "two planes"),
                "chi_link[V_0]": (2, "a generic affine line near 0 meets xy = 0 in 2 points"),
                "sigma": ({0: 1, 1: 2, 2: 2, 3: 0, 4: 0}, "each line meets a generic affine slice once"),
                "polar_chi[1]": (2, "a generic real hyperplane slice is two segments"),
            }
        ),
    )


def three_lines() -> StratifiedSpace:
    dirs = {"V_1": [1, 0], "V_2": [0, 1], "V_3": [1, -1]}
    strata = (_point("V_0", 2),) + tuple(_line_stratum(k, d) for k, d in dirs.items())
    chi = {("V_0", k): 1 for k in dirs}
    chi[("V_0", AMBIENT)] = 3
    chi.update({(k, AMBIENT): 0 for k in dirs})
    return StratifiedSpace(
        "three_lines",
        4,
        strata,
        frozenset(("V_0", k) for k in dirs),
        GERM,
        LinkTable(chi),
        _notes(
            {
                "eu0": (3, "triangular solve from chi_link"),
                "chi_ball": (1, "cone over three circles"),
                "lelong": (3, "three planes"),
                "chi_link[V_0]": (3, "a generic affine line meets xy(x+y) = 0 in 3 points"),
                "sigma": ({0: 1, 1: 3, 2: 3, 3: 0, 4: 0}, "each line meets a generic affine slice once"),
            }
        ),
    )


def _cusp_chart():
    return holomorphic_chart(
        lambda z: np.concatenate([z**3, z**2], axis=1),
        lambda z: np.stack([3 * z**2, 2 * z], axis=1),
        lambda z: np.stack([6 * z, np.full_like(z, 2)], axis=1).reshape(len(z), 1, 1, 2),
        1,
        2,
        name="V_1",
        radial=Radial(lambda r: np.sqrt(r**6 + r**4), _cusp_inverse),
    )


def _cusp_inverse(r: float) -> float:
    # rho^4 + rho^6 = r^2: real root s = rho^2 of s^3 + s^2 - r^2
    roots = np.roots([1.0, 1.0, 0.0, -r * r])
    s = max(x.real for x in roots if abs(x.imag) < 1e-9 * (1 + abs(x)))
    return math.sqrt(max(s, 0.0))


def cusp() -> StratifiedSpace:
    return StratifiedSpace(
        "cusp",
        4,
        (_point("V_0", 2), Stratum("V_1", 2, True, (_cusp_chart(),))),
        frozenset({("V_0", "V_1")}),
        GERM,
        LinkTable({("V_0", "V_1"): 2, ("V_0", AMBIENT): 2, ("V_1", AMBIENT): 0}),
        _notes(
            {
                "eu0": (2, "triangular solve from chi_link"),
                "chi_ball": (1, "cone over a trefoil"),
                "lelong": (2, "multiplicity of x^2 = y^3"),
                "chi_link[V_0]": (2, "Newton point count of a generic affine line near 0"),
                "sigma": ({0: 1, 1: 2, 2: 2, 3: 0, 4: 0}, "multiplicity 2"),
            }
        ),
    )


# --------------------------------------------------------------------------
# cones over plane curves in C^3


def _plane_chart():
    A = np.array([[1, 0], [0, 1], [-1, -1]], dtype=complex)
    return holomorphic_chart(
        lambda z: z @ A.T,
        lambda z: np.broadcast_to(A, (len(z), 3, 2)).copy(),
        lambda z: np.zeros((len(z), 2, 2, 3), dtype=complex),
        2,
        3,
        name="V_1",
        radial=Homogeneous(1.0, 1.0, math.sqrt(3.0)),
    )


def _quadric_chart():
    def f(z):
        u, v = z[:, 0], z[:, 1]
        return np.stack([u * u, v * v, u * v], axis=1)

    def df(z):
        u, v = z[:, 0], z[:, 1]
        o = np.zeros_like(u)
        return np.stack([np.stack([2 * u, o], 1), np.stack([o, 2 * v], 1), np.stack([v, u], 1)], axis=1)

    def d2f(z):
        H = np.zeros((len(z), 2, 2, 3), dtype=complex)
        H[:, 0, 0, 0] = 2
        H[:, 1, 1, 1] = 2
        H[:, 0, 1, 2] = 1
        H[:, 1, 0, 2] = 1
        return H

    return holomorphic_chart(f, df, d2f, 2, 3, name="V_1", radial=Homogeneous(2.0, math.sqrt(3.0) / 2.0, 1.0), sheet_count=2)


OMEGA = np.exp(2j * np.pi / 3)


def _fermat_piece(lo: int, mid: int, hi: int, branch: int):
    """Piece of x^3 + y^3 + z^3 = 0 with |x_lo| <= |x_mid| <= |x_hi|.

    Parameters are (x_lo, x_hi); x_mid is a chosen cube root.
    """
    rot = OMEGA**branch

    def solve(z):
        a, b = z[:, 0], z[:, 1]
        w = -(a**3 + b**3)
        return rot * np.exp(np.log(w + (w == 0)) / 3.0) * (w != 0)

    def place(a, b, c):
        out = [None, None, None]
        out[lo], out[hi], out[mid] = a, b, c
        return out

    def f(z):
        c = solve(z)
        return np.stack(place(z[:, 0], z[:, 1], c), axis=1)

    def df(z):
        a, b = z[:, 0], z[:, 1]
        c = solve(z)
        one, zero = np.ones_like(a), np.zeros_like(a)
        rows = place(np.stack([one, zero], 1), np.stack([zero, one], 1), np.stack([-a * a / c**2, -b * b / c**2], 1))
        return np.stack(rows, axis=1)

    def d2f(z):
        a, b = z[:, 0], z[:, 1]
        c = solve(z)
        ca, cb = -a * a / c**2, -b * b / c**2
        H = np.zeros((len(z), 2, 2, 3), dtype=complex)
        H[:, 0, 0, mid] = -2 * a / c**2 + 2 * a * a / c**3 * ca
        H[:, 1, 1, mid] = -2 * b / c**2 + 2 * b * b / c**3 * cb
        H[:, 0, 1, mid] = 2 * a * a / c**3 * cb
        H[:, 1, 0, mid] = H[:, 0, 1, mid]
        return H

    def contains(u):
        z = u[:, 0::2] + 1j * u[:, 1::2]
        c = solve(z)
        ma, mb, mc = np.abs(z[:, 0]), np.abs(z[:, 1]), np.abs(c)
        return (ma <= mc) & (mc <= mb)

    return holomorphic_chart(
        f, df, d2f, 2, 3, name=f"V_1[{lo}{mid}{hi}.{branch}]", radial=Homogeneous(1.0, 1.0, math.sqrt(2.0)), contains=contains,
        maps_into_closure=True,
    )


def _fermat_charts():
    charts = []
    for lo in range(3):
        for hi in range(3):
            if hi == lo:
                continue
            mid = 3 - lo - hi
            for b in range(3):
                charts.append(_fermat_piece(lo, mid, hi, b))
    return tuple(charts)


_CONE_EQUATIONS = {
    1: lambda: holomorphic_equation(lambda z: z.sum(axis=1), lambda z: np.ones_like(z), 3),
    2: lambda: holomorphic_equation(
        lambda z: z[:, 0] * z[:, 1] - z[:, 2] ** 2,
        lambda z: np.stack([z[:, 1], z[:, 0], -2 * z[:, 2]], axis=1),
        3,
    ),
    3: lambda: holomorphic_equation(lambda z: (z**3).sum(axis=1), lambda z: 3 * z**2, 3),
}


def cone_over_plane_curve(d: int) -> StratifiedSpace:
    """Affine cone over a smooth plane curve of degree d (d = 1, 2, 3)."""
    charts = {1: lambda: (_plane_chart(),), 2: lambda: (_quadric_chart(),), 3: _fermat_charts}
    if d not in charts:
        raise StratumLookupError(f"cone_over_plane_curve is available for d in 1, 2, 3, not {d}")
    chi_y = 3 * d - d * d
    chi_link = chi_y - d
    eu = 2 * d - d * d
    notes = {
        "eu0": (eu, "triangular solve from chi_link"),
        "chi_ball": (1, "cone"),
        "lelong": (d, "degree of the cone"),
        "chi_link[V_0]": (chi_link, "chi(Y) - chi(Y cap H) = (3d - d^2) - d"),
        "L[V_1,2]": (d, "density of a degree d cone"),
        "L[V_1,1]": (d - d * d, "Eu minus density"),
        "sigma": ({0: 1, 1: eu, 2: eu, 3: d, 4: d, 5: 0, 6: 0}, "curvature limits and the polar relations"),
    }
    if d == 1:
        notes["polar_chi[1]"] = (1, "a hyperplane slice of a plane near 0 is a convex set")
        notes["polar_chi[2]"] = (1, "a codimension-2 slice of a plane near 0 is a convex set")
    name = {1: "cone_over_plane_curve_1", 2: "quadric_cone", 3: "cone_over_plane_curve_3"}[d]
    return StratifiedSpace(
        name,
        6,
        (_point("V_0", 3), Stratum("V_1", 4, True, charts[d]())),
        frozenset({("V_0", "V_1")}),
        GERM,
        LinkTable({("V_0", "V_1"): chi_link, ("V_0", AMBIENT): chi_link, ("V_1", AMBIENT): 0}),
        _notes(notes),
        defining=_CONE_EQUATIONS[d](),
    )


# --------------------------------------------------------------------------
# global affine curves


def parabola_global() -> StratifiedSpace:
    chart = holomorphic_chart(
        lambda z: np.concatenate([z, z**2], axis=1),
        lambda z: np.stack([np.ones_like(z), 2 * z], axis=1),
        lambda z: np.stack([np.zeros_like(z), np.full_like(z, 2)], axis=1).reshape(len(z), 1, 1, 2),
        1,
        2,
        name="V_0",
        radial=Radial(lambda r: np.sqrt(r**2 + r**4), lambda r: math.sqrt(0.5 * (math.sqrt(1 + 4 * r * r) - 1))),
    )
    return StratifiedSpace(
        "parabola_global",
        4,
        (Stratum("V_0", 2, True, (chart,)),),
        frozenset(),
        GLOBAL,
        LinkTable({("V_0", AMBIENT): 0}),
        _notes(
            {
                "chi[V_0]": (1, "X is isomorphic to C"),
                "chi_X": (1, "X is isomorphic to C"),
                "eu_global": (1, "smooth, so Eu(X) = chi(X)"),
                "degree": (2, "volume growth equals the degree"),
            }
        ),
    )


def _nodal_hi(r: float) -> float:
    roots = np.roots([1.0, 0.0, -1.0, -r])
    return max(x.real for x in roots if abs(x.imag) < 1e-9 * (1 + abs(x)))


def nodal_cubic_global() -> StratifiedSpace:
    chart = holomorphic_chart(
        lambda z: np.concatenate([z**2 - 1, z**3 - z], axis=1),
        lambda z: np.stack([2 * z, 3 * z**2 - 1], axis=1),
        lambda z: np.stack([np.full_like(z, 2), 6 * z], axis=1).reshape(len(z), 1, 1, 2),
        1,
        2,
        name="V_1",
        radial=Bounded(lambda r: math.sqrt(max(r ** (2.0 / 3.0) - 1.0, 0.0)), _nodal_hi),
    )
    return StratifiedSpace(
        "nodal_cubic_global",
        4,
        (_point("V_0", 2), Stratum("V_1", 2, True, (chart,))),
        frozenset({("V_0", "V_1")}),
        GLOBAL,
        LinkTable({("V_0", "V_1"): 2, ("V_0", AMBIENT): 2, ("V_1", AMBIENT): 0}),
        _notes(
            {
                "chi[V_0]": (1, "a point"),
                "chi[V_1]": (-1, "C minus two points"),
                "chi_X": (0, "normalization C identifies two points: 1 - 2 + 1"),
                "eu_global": (1, "chi(X, Eu_X) = -1 + 2"),
                "degree": (3, "volume growth equals the degree"),
                "eu0": (2, "node"),
            }
        ),
    )


# --------------------------------------------------------------------------
# real sanity inputs


def _nappe_chart(sign: float, name: str):
    def f(u):
        s = np.linalg.norm(u, axis=1, keepdims=True)
        return np.concatenate([u, sign * s], axis=1)

    def jac(u):
        s = np.linalg.norm(u, axis=1)
        J = np.zeros((len(u), 3, 2))
        J[:, 0, 0] = 1
        J[:, 1, 1] = 1
        J[:, 2, :] = sign * u / s[:, None]
        return J

    def hess(u):
        a, b = u[:, 0], u[:, 1]
        s3 = np.linalg.norm(u, axis=1) ** 3
        H = np.zeros((len(u), 2, 2, 3))
        H[:, 0, 0, 2] = sign * b * b / s3
        H[:, 1, 1, 2] = sign * a * a / s3
        H[:, 0, 1, 2] = -sign * a * b / s3
        H[:, 1, 0, 2] = H[:, 0, 1, 2]
        return H

    from .charts import Chart

    r2 = math.sqrt(2.0)
    return Chart(2, 3, f, jac, hess, radial=Homogeneous(1.0, r2, r2), name=name)


def real_cone_apex_alpha(x, v):
    v = np.atleast_2d(v)
    return np.where(np.abs(v[:, 2]) > 1.0 / math.sqrt(2.0), 1.0, -1.0)


def real_cone() -> StratifiedSpace:
    return StratifiedSpace(
        "real_cone",
        3,
        (
            Stratum("V_0", 0, False, (), alpha=real_cone_apex_alpha, location=(0.0, 0.0, 0.0)),
            Stratum("V_1", 2, False, (_nappe_chart(1.0, "V_1"),), alpha=1),
            Stratum("V_2", 2, False, (_nappe_chart(-1.0, "V_2"),), alpha=1),
        ),
        frozenset({("V_0", "V_1"), ("V_0", "V_2")}),
        GERM,
        LinkTable({}),
        _notes(
            {
                "chi_ball": (1, "cone over two circles, contractible"),
                "apex_alpha_mean": (1 - math.sqrt(2.0), "lower half-link is a circle or two arcs"),
                "area_density": (math.sqrt(2.0), "two nappes at 45 degrees"),
            }
        ),
        equidimensional=True,
    )


def real_plane() -> StratifiedSpace:
    chart = linear_chart(np.eye(2), name="V_0")
    return StratifiedSpace(
        "real_plane",
        2,
        (Stratum("V_0", 2, False, (chart,), alpha=1),),
        frozenset(),
        GERM,
        LinkTable({}),
        _notes({"chi_ball": (1, "a disk")}),
    )


# --------------------------------------------------------------------------
# registry


REGISTRY: dict[str, Callable[[], StratifiedSpace]] = {
    "smooth_line": smooth_line,
    "node": node,
    "cusp": cusp,
    "three_lines": three_lines,
    "cone_over_plane_curve_1": lambda: cone_over_plane_curve(1),
    "quadric_cone": lambda: cone_over_plane_curve(2),
    "cone_over_plane_curve_3": lambda: cone_over_plane_curve(3),
    "parabola_global": parabola_global,
    "nodal_cubic_global": nodal_cubic_global,
    "real_cone": real_cone,
    "real_plane": real_plane,
}

ALIASES = {
    "cone_over_plane_curve_2": "quadric_cone",
    "cone_over_plane_curve(1)": "cone_over_plane_curve_1",
    "cone_over_plane_curve(2)": "quadric_cone",
    "cone_over_plane_curve(3)": "cone_over_plane_curve_3",
}

COMPLEX_GERMS = [
    "smooth_line",
    "node",
    "cusp",
    "three_lines",
    "cone_over_plane_curve_1",
    "quadric_cone",
    "cone_over_plane_curve_3",
]
GLOBAL_SPACES = ["parabola_global", "nodal_cubic_global"]
REAL_GERMS = ["real_cone", "real_plane"]

_CACHE: dict[str, StratifiedSpace] = {}


def names() -> list[str]:
    return list(REGISTRY)


def canonical_name(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in REGISTRY:
        raise StratumLookupError(f"unknown builtin {name!r}; known: {', '.join(REGISTRY)}")
    return name


def builtin(name: str) -> StratifiedSpace:
    name = canonical_name(name)
    if name not in _CACHE:
        _CACHE[name] = REGISTRY[name]()
    return _CACHE[name]
