"""Variety-definition files (JSON).

Example::

    {
      "name": "node",
      "ambient_real_dim": 4,
      "kind": "germ",
      "strata": [
        {"id": "V_0", "real_dim": 0, "is_complex": true, "chart": {"type": "point"}},
        {"id": "V_1", "real_dim": 2, "is_complex": true,
         "chart": {"type": "explicit", "complex": true, "params": ["t"], "map": ["t", "0"],
                   "radial": {"kind": "homogeneous", "degree": 1, "c_lo": 1, "c_hi": 1}}}
      ],
      "closure_order": [["V_0", "V_1"]],
      "link_table": [["V_0", "V_1", 1], ["V_0", "X", 2], ["V_1", "X", 0]],
      "oracle_annotations": {"eu0": 2}
    }

A ``"bounded"`` radial block only promises |u| <= rho_max; add
``"monotone": true`` when |phi| grows along every parameter ray, which lets
shells be cut exactly per ray instead of by rejection.

Explicit maps are sympy expressions.  With ``"complex": true`` the
parameters are complex variables and the map must be holomorphic in them.
Implicit charts give real polynomial equations in ambient coordinates
``x0 .. x{N-1}`` plus the indices of the free coordinates.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np
import sympy as sp

from ..errors import ParseError, SchemaError, ValidationFailure
from .charts import Bounded, Chart, Homogeneous, ImplicitChart, Radial, holomorphic_chart
from .space import AMBIENT, Annotation, LinkTable, StratifiedSpace, Stratum, validate

RADIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["homogeneous", "bounded"]},
        "degree": {"type": "number", "exclusiveMinimum": 0},
        "c_lo": {"type": "number", "exclusiveMinimum": 0},
        "c_hi": {"type": "number", "exclusiveMinimum": 0},
        "rho_max": {"type": "number", "exclusiveMinimum": 0},
        "monotone": {"type": "boolean"},
    },
    "required": ["kind"],
}

CHART_SCHEMA = {
    "type": "object",
    "properties": {
        "type": {"enum": ["explicit", "implicit", "builtin", "point"]},
        "sheet_count": {"type": "integer", "minimum": 0},
        "complex": {"type": "boolean"},
        "params": {"type": "array", "items": {"type": "string"}},
        "map": {"type": "array", "items": {"type": ["string", "number"]}},
        "equations": {"type": "array", "items": {"type": "string"}},
        "free": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "seed": {"type": "array", "items": {"type": "number"}},
        "name": {"type": "string"},
        "stratum": {"type": "string"},
        "radial": RADIAL_SCHEMA,
    },
    "required": ["type"],
}

SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "ambient_real_dim": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["germ", "global"]},
        "strata": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "real_dim": {"type": "integer", "minimum": 0},
                    "is_complex": {"type": "boolean"},
                    "chart": CHART_SCHEMA,
                    "charts": {"type": "array", "items": CHART_SCHEMA},
                    "alpha": {"type": ["number", "string"]},
                },
                "required": ["id", "real_dim", "is_complex"],
            },
        },
        "closure_order": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "link_table": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "string"}, {"type": "string"}, {"type": "integer"}],
                "minItems": 3,
                "maxItems": 3,
            },
        },
        "oracle_annotations": {"type": "object"},
        "equidimensional": {"type": "boolean"},
    },
    "required": ["ambient_real_dim", "kind", "strata", "closure_order", "link_table"],
}


def _parse(expr, symbols):
    try:
        return sp.sympify(expr, locals={s.name: s for s in symbols})
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ParseError(f"cannot parse expression {expr!r}: {exc}") from None


def _lambdify_vector(symbols, exprs, is_complex: bool):
    f = sp.lambdify(symbols, list(exprs), modules="numpy")
    dtype = complex if is_complex else float

    def call(cols, P):
        vals = f(*cols)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=dtype), (P,)) for v in vals], axis=1)

    return call


def _radial(spec, chart_params=None):
    if spec is None:
        return Bounded(lambda r: 0.0, lambda r: (chart_params or {}).get("rho_max", 1.0))
    if spec["kind"] == "homogeneous":
        return Homogeneous(float(spec.get("degree", 1.0)), float(spec["c_lo"]), float(spec["c_hi"]))
    rho_max = float(spec.get("rho_max", 1.0))
    return Bounded(lambda r: 0.0, lambda r: rho_max, bool(spec.get("monotone", False)))


def _explicit_chart(spec, N: int, name: str) -> Chart:
    params = [sp.Symbol(p) for p in spec.get("params", [])]
    if not params or "map" not in spec:
        raise SchemaError(f"explicit chart {name!r} needs params and map")
    exprs = [_parse(str(e), params) for e in spec["map"]]
    sheet = int(spec.get("sheet_count", 1))
    radial = _radial(spec.get("radial"))
    k = len(params)
    if spec.get("complex", False):
        n = len(exprs)
        if 2 * n != N:
            raise SchemaError(f"chart {name!r}: {n} complex components for ambient dimension {N}")
        d1 = [[sp.diff(e, p) for p in params] for e in exprs]
        d2 = [[[sp.diff(e, p, q) for e in exprs] for q in params] for p in params]
        f = _lambdify_vector(params, exprs, True)
        g = _lambdify_vector(params, [x for row in d1 for x in row], True)
        h = _lambdify_vector(params, [x for a in d2 for b in a for x in b], True)

        def cols(z):
            return [z[:, i] for i in range(k)]

        return holomorphic_chart(
            lambda z: f(cols(z), len(z)),
            lambda z: g(cols(z), len(z)).reshape(len(z), n, k),
            lambda z: h(cols(z), len(z)).reshape(len(z), k, k, n),
            k,
            n,
            name=name,
            radial=radial,
            sheet_count=sheet,
        )
    if len(exprs) != N:
        raise SchemaError(f"chart {name!r}: {len(exprs)} components for ambient dimension {N}")
    d1 = [[sp.diff(e, p) for p in params] for e in exprs]
    d2 = [[[sp.diff(e, p, q) for e in exprs] for q in params] for p in params]
    f = _lambdify_vector(params, exprs, False)
    g = _lambdify_vector(params, [x for row in d1 for x in row], False)
    h = _lambdify_vector(params, [x for a in d2 for b in a for x in b], False)

    def rcols(u):
        return [u[:, i] for i in range(k)]

    return Chart(
        k,
        N,
        map=lambda u: f(rcols(u), len(u)),
        jacobian=lambda u: g(rcols(u), len(u)).reshape(len(u), N, k),
        hessian=lambda u: h(rcols(u), len(u)).reshape(len(u), k, k, N),
        radial=radial,
        sheet_count=sheet,
        name=name,
    )


def _implicit_chart(spec, N: int, name: str) -> Chart:
    xs = [sp.Symbol(f"x{i}") for i in range(N)]
    eqs = [_parse(e, xs) for e in spec.get("equations", [])]
    free = tuple(int(i) for i in spec.get("free", []))
    if not eqs or not free or any(i >= N for i in free):
        raise SchemaError(f"implicit chart {name!r} needs equations and valid free coordinates")
    for e in eqs:
        if not e.is_polynomial(*xs):
            raise ParseError(f"implicit equation {e} is not polynomial")
    c = len(eqs)
    D1 = [[sp.diff(e, x) for x in xs] for e in eqs]
    D2 = [[[sp.diff(e, x, y) for y in xs] for x in xs] for e in eqs]
    F = _lambdify_vector(xs, eqs, False)
    dF = _lambdify_vector(xs, [v for r in D1 for v in r], False)
    d2F = _lambdify_vector(xs, [v for a in D2 for b in a for v in b], False)

    def cols(x):
        return [x[:, i] for i in range(N)]

    seed_vals = spec.get("seed")
    seed = None
    if seed_vals is not None:
        arr = np.asarray(seed_vals, dtype=float)
        seed = lambda u: np.broadcast_to(arr, (len(u), len(arr))).copy()
    ic = ImplicitChart(
        lambda x: F(cols(x), len(x)),
        lambda x: dF(cols(x), len(x)).reshape(len(x), c, N),
        lambda x: d2F(cols(x), len(x)).reshape(len(x), c, N, N),
        free,
        N,
        seed=seed,
    )
    return ic.chart(name=name, radial=_radial(spec.get("radial")), sheet_count=int(spec.get("sheet_count", 1)))


def _alpha(value, N: int):
    if value is None or isinstance(value, (int, float)):
        return value
    xs = [sp.Symbol(f"x{i}") for i in range(N)]
    vs = [sp.Symbol(f"v{i}") for i in range(N)]
    expr = _parse(value, xs + vs)
    f = sp.lambdify(xs + vs, expr, modules="numpy")

    def alpha(x, v):
        x, v = np.atleast_2d(x), np.atleast_2d(v)
        out = f(*[x[:, i] for i in range(N)], *[v[:, i] for i in range(N)])
        return np.broadcast_to(np.asarray(out, dtype=float), (len(v),))

    return alpha


def from_dict(data: dict, run_validation: bool = True) -> StratifiedSpace:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"variety file does not match the schema: {exc.message}") from None
    from .corpus import builtin

    N = int(data["ambient_real_dim"])
    strata = []
    for s in data["strata"]:
        specs = s.get("charts") or ([s["chart"]] if "chart" in s else [])
        charts = []
        for i, spec in enumerate(specs):
            name = spec.get("name", s["id"] if len(specs) == 1 else f"{s['id']}[{i}]")
            t = spec["type"]
            if t == "point":
                continue
            if t == "explicit":
                charts.append(_explicit_chart(spec, N, name))
            elif t == "implicit":
                charts.append(_implicit_chart(spec, N, name))
            elif t == "builtin":
                src = builtin(spec.get("name", ""))
                charts.extend(src.stratum(spec.get("stratum", s["id"])).charts)
        if "sheet_count" in (specs[0] if specs else {}) and specs[0]["type"] == "builtin":
            charts = [_with_sheets(c, int(specs[0]["sheet_count"])) for c in charts]
        strata.append(
            Stratum(
                s["id"],
                int(s["real_dim"]),
                bool(s["is_complex"]),
                tuple(charts),
                alpha=_alpha(s.get("alpha"), N),
                location=(0.0,) * N if int(s["real_dim"]) == 0 else None,
            )
        )
    ids = {s.id for s in strata}
    order = frozenset((a, b) for a, b in data["closure_order"])
    chi = {}
    for i, j, v in data["link_table"]:
        if i not in ids or (j not in ids and j != AMBIENT):
            raise SchemaError(f"link table entry ({i}, {j}) names an unknown stratum")
        chi[(i, j)] = int(v)
    if all(s.is_complex for s in strata):
        from .space import _transitive

        for a, b in sorted(_transitive(order)):
            if (a, b) not in chi:
                raise SchemaError(f"link table is missing the closure pair ({a}, {b})")
        for a in sorted(ids):
            if (a, AMBIENT) not in chi:
                raise SchemaError(f"link table is missing the pair ({a}, X)")
    notes = {}
    for k, v in (data.get("oracle_annotations") or {}).items():
        if isinstance(v, dict) and "value" in v:
            notes[k] = Annotation(v["value"], v.get("derivation", ""))
        else:
            notes[k] = Annotation(v, "")
    space = StratifiedSpace(
        data.get("name", "loaded"),
        N,
        tuple(strata),
        order,
        data["kind"],
        LinkTable(chi),
        notes,
        bool(data.get("equidimensional", True)),
    )
    if run_validation:
        rep = validate(space, n_points=200, n_deriv=20)
        if not rep.ok:
            raise ValidationFailure(rep.summary(), rep)
    return space


def _with_sheets(chart: Chart, sheets: int) -> Chart:
    from dataclasses import replace

    return replace(chart, sheet_count=sheets)


def loads(text: str, run_validation: bool = True) -> StratifiedSpace:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return from_dict(data, run_validation)


def load(path, run_validation: bool = True) -> StratifiedSpace:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from None
    return loads(text, run_validation)
