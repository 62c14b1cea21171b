import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lkcurv.constructible import (
    ConstructibleFunction,
    bdk_global,
    bdk_local,
    closed_indicator,
    corpus_functions,
    eta,
    eta_table,
    euler_characteristic,
    euler_obstruction,
    euler_obstruction_basis,
    from_closed_basis,
    global_euler_obstructions,
    indicator_of_space,
    local_euler_obstruction,
    moebius,
    open_indicator,
    parse_function,
    to_closed_basis,
    verify_eta_duality,
)
from lkcurv.errors import DataError
from lkcurv.variety import builtin

from conftest import COMPLEX_GERMS, GLOBALS

# multiplicity for plane curves, 2d - d^2 for cones over smooth plane curves of degree d
EU = {
    "smooth_line": 1,
    "node": 2,
    "cusp": 2,
    "three_lines": 3,
    "cone_over_plane_curve_1": 1,
    "quadric_cone": 0,
    "cone_over_plane_curve_3": -3,
}


@pytest.mark.parametrize("name, value", sorted(EU.items()))
def test_local_euler_obstruction(name, value):
    assert local_euler_obstruction(builtin(name)) == value


@pytest.mark.parametrize("name", COMPLEX_GERMS + GLOBALS)
def test_eta_duality(name):
    s = builtin(name)
    basis = euler_obstruction_basis(s)
    tab = eta_table(s)
    for i in s.ids:
        for j in s.ids:
            assert eta(s, basis[j], i, tab) == int(i == j)
    assert verify_eta_duality(s).passed


@pytest.mark.parametrize("name", COMPLEX_GERMS)
def test_bdk_local_for_corpus_functions(name):
    s = builtin(name)
    for label, phi in corpus_functions(s):
        rep = bdk_local(s, phi, label)
        assert rep.passed and rep.lhs == rep.rhs, label


@pytest.mark.parametrize("name", GLOBALS)
def test_bdk_global_for_corpus_functions(name):
    s = builtin(name)
    for label, phi in corpus_functions(s):
        assert bdk_global(s, phi, label=label).passed, label


def test_global_values():
    par, nod = builtin("parabola_global"), builtin("nodal_cubic_global")
    assert euler_characteristic(par, indicator_of_space(par)) == 1
    assert euler_characteristic(nod, indicator_of_space(nod)) == 0
    assert euler_characteristic(nod, euler_obstruction(nod)) == 1
    eus = global_euler_obstructions(nod)
    assert eus[nod.base_stratum] == 1


def test_node_tables(node):
    tab = eta_table(node)
    assert tab("V_0", "V_1") == 0
    assert node.eta_top("V_0") == -1
    assert euler_obstruction(node).weights == {"V_0": 2, "V_1": 1, "V_2": 1}


def test_moebius_inverts_closure(node):
    mu = moebius(node)
    assert mu[("V_0", "V_0")] == 1
    assert mu[("V_0", "V_1")] == -1


@settings(deadline=None, max_examples=40)
@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4), st.sampled_from(["node", "three_lines", "cusp"]))
def test_basis_change_roundtrip(ws, name):
    s = builtin(name)
    phi = ConstructibleFunction({i: w for i, w in zip(s.ids, ws)})
    assert from_closed_basis(s, to_closed_basis(s, phi)).weights == phi.weights


@settings(deadline=None, max_examples=40)
@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4), st.sampled_from(COMPLEX_GERMS))
def test_bdk_is_linear(ws, name):
    s = builtin(name)
    phi = ConstructibleFunction({i: w for i, w in zip(s.ids, ws)})
    assert bdk_local(s, phi).passed


def test_function_algebra(node):
    a = open_indicator(node, "V_1")
    b = closed_indicator(node, "V_1")
    assert (a + 2 * b).weights == {"V_0": 2, "V_1": 3, "V_2": 0}


def test_parse_function(node):
    f = parse_function(node, {"basis": "closed", "weights": {"V_1": 1, "V_2": 1}})
    assert f.weights == {"V_0": 2, "V_1": 1, "V_2": 1}
    with pytest.raises(DataError):
        parse_function(node, {"basis": "weird", "weights": {}})


def test_bdk_rejects_mismatched_function(node):
    with pytest.raises(DataError):
        bdk_local(node, ConstructibleFunction({"V_0": 1}))
