import json
from pathlib import Path

import numpy as np
import pytest

from lkcurv.errors import ParseError, SchemaError, StratumLookupError, ValidationFailure
from lkcurv.variety import GERM, GLOBAL, builtin, linear_chart, load, loads, names, restrict_to_closure, validate
from lkcurv.variety.charts import gram_sqrt_det
from lkcurv.variety.corpus import canonical_name

from conftest import COMPLEX_GERMS, GLOBALS, REAL_GERMS

DATA = Path(__file__).parent / "data"


def test_corpus_names():
    assert set(names()) == set(COMPLEX_GERMS + GLOBALS + REAL_GERMS)
    assert canonical_name("cone_over_plane_curve(2)") == "quadric_cone"
    with pytest.raises(StratumLookupError):
        builtin("no_such_space")


@pytest.mark.parametrize("name", COMPLEX_GERMS + GLOBALS + REAL_GERMS)
def test_builtins_validate(name):
    rep = validate(builtin(name), n_points=300, n_deriv=30)
    assert rep.ok, rep.summary()


@pytest.mark.parametrize("name", COMPLEX_GERMS + REAL_GERMS)
def test_germs_have_one_base_stratum(name):
    s = builtin(name)
    assert s.kind == GERM
    assert all(s.leq(s.base_stratum, i) for i in s.ids)


@pytest.mark.parametrize("name", GLOBALS)
def test_globals(name):
    assert builtin(name).kind == GLOBAL


@pytest.mark.parametrize("name", ["node", "cusp", "quadric_cone"])
def test_charts_land_on_requested_sphere(name):
    s = builtin(name)
    rng = np.random.default_rng(0)
    for st in s.strata:
        for ch in st.charts:
            th = rng.standard_normal((64, ch.intrinsic_dim))
            th /= np.linalg.norm(th, axis=1, keepdims=True)
            rho = ch.radial_solve(th, 0.1)
            ok = np.isfinite(rho)
            x = ch.evaluate(rho[ok, None] * th[ok])
            np.testing.assert_allclose(np.linalg.norm(x, axis=1), 0.1, rtol=1e-9)


@pytest.mark.parametrize("name", ["quadric_cone", "cone_over_plane_curve_3", "cone_over_plane_curve_1"])
def test_defining_equations_vanish_on_charts(name):
    s = builtin(name)
    assert s.defining is not None
    for st in s.strata:
        for ch in st.charts:
            z = np.random.default_rng(1).random((50, ch.sample_dim))
            u, _ = ch.sample(z, 0.01, 0.3)
            x = ch.evaluate(u)
            assert np.abs(s.defining.F(x)).max() < 1e-10


def test_chart_sample_weights_integrate_area():
    # flat plane in R^3: parameter area of the shell [0.1, 0.3] is pi (0.09 - 0.01)
    ch = linear_chart(np.eye(3)[:, :2], "plane")
    from lkcurv.variety.charts import Homogeneous

    ch = type(ch)(**{**ch.__dict__, "radial": Homogeneous(1.0, 1.0, 1.0)})
    z = np.random.default_rng(0).random((4096, ch.sample_dim))
    u, w = ch.sample(z, 0.1, 0.3)
    assert np.mean(w) == pytest.approx(np.pi * 0.08, rel=1e-12)
    r = np.linalg.norm(ch.evaluate(u), axis=1)
    assert r.min() >= 0.1 - 1e-12 and r.max() <= 0.3 + 1e-12


def test_gram_determinant():
    J = np.array([[[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]])
    assert gram_sqrt_det(J)[0] == pytest.approx(2.0)


def test_load_node_file():
    s = load(DATA / "node_file.json")
    assert s.name == "node_file"
    assert s.ids == ["V_0", "V_1", "V_2"]
    assert s.eta_top("V_0") == -1


def test_load_bounded_monotone_chart():
    s = load(DATA / "cusp_file.json")
    ch = s.stratum("V_1").charts[0]
    assert ch.radial.monotone
    z = np.random.default_rng(0).random((512, ch.sample_dim))
    u, w = ch.sample(z, 0.01, 0.02)
    r = np.linalg.norm(ch.evaluate(u), axis=1)
    # per-ray shells put every sample inside the requested annulus
    assert ((r >= 0.01 - 1e-12) & (r <= 0.02 + 1e-12)).mean() > 0.99


def test_loader_errors():
    with pytest.raises(ParseError):
        loads("{not json")
    with pytest.raises(SchemaError):
        loads(json.dumps({"name": "x", "kind": "germ"}))
    bad = json.loads((DATA / "node_file.json").read_text())
    bad["closure_order"] = [["V_1", "V_0"], ["V_0", "V_2"]]
    with pytest.raises(SchemaError):
        loads(json.dumps(bad))
    bad = json.loads((DATA / "node_file.json").read_text())
    bad["strata"][1]["real_dim"] = 3
    with pytest.raises(ValidationFailure):
        loads(json.dumps(bad))


def test_validation_flags_cycles_and_frontier():
    data = json.loads((DATA / "node_file.json").read_text())
    data["closure_order"].append(["V_1", "V_2"])
    data["link_table"].append(["V_1", "V_2", 0])
    s = loads(json.dumps(data), run_validation=False)
    rep = validate(s, n_points=50, n_deriv=5)
    assert not rep.ok
    assert any(f.invariant == "frontier" for f in rep.failures)


def test_restrict_to_closure(node):
    sub = restrict_to_closure(node, "V_1")
    assert sub.ids == ["V_0", "V_1"]
    assert sub.top_strata == ["V_1"]
