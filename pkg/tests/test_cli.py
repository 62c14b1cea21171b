import csv
import io
import json
import subprocess
import sys

import pytest

from lkcurv import cli
from lkcurv.report import SCHEMA_VERSION, IdentityReport, emit_report
from lkcurv.variety import names

FAST = ["--samples", "256", "--eps-ladder", "0.4:5"]


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA_VERSION
    assert [r["name"] for r in doc["results"]] == list(names())


def test_describe(capsys):
    code, out, _ = run(capsys, "describe", "--space", "node")
    assert code == 0
    desc = json.loads(out)["results"][0]
    assert desc["Eu(0)"] == 2
    assert len(desc["strata"]) == 3


def test_describe_real_space(capsys):
    code, out, _ = run(capsys, "describe", "--space", "real_cone")
    assert code == 0
    assert "eta" not in json.loads(out)["results"][0]


def test_curvature_csv(capsys):
    code, out, _ = run(capsys, "curvature", "--space", "smooth_line", "--k", "2", "--format", "csv", *FAST)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["k", "eps", "stratum", "value", "stderr"]
    assert len(rows) == 10  # one stratum plus the total, five radii each
    assert [r["stratum"] for r in rows].count("total") == 5
    assert all("np." not in v for r in rows for v in r.values())


def test_limits_json(capsys):
    code, out, _ = run(capsys, "limits", "--space", "node", "--k", "2", *FAST)
    assert code == 0
    (lim,) = json.loads(out)["results"]
    assert lim["k"] == 2 and lim["value"] == pytest.approx(2, abs=0.05)


def test_polar_csv(capsys):
    code, out, _ = run(capsys, "polar", "--space", "node", "--k", "2", "--draws", "8", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["draw"] for r in rows] == [str(i) for i in range(8)]


def test_morse_fixed_direction(capsys):
    code, out, _ = run(capsys, "morse", "--space", "smooth_line", "--v", "1,0,0,0")
    assert code == 0
    (rep,) = json.loads(out)["results"]
    assert rep["pass"] and rep["lhs"] == 1


def test_fu(capsys):
    code, out, _ = run(capsys, "fu", "--space", "node", *FAST)
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_verify_prints_summary(capsys):
    code, out, err = run(capsys, "verify", "local-gb", "--space", "smooth_line", *FAST)
    assert code == 0
    assert "local_gb" in err and "pass" in err
    assert json.loads(out)["results"][0]["identity"] == "local_gb"


# -- exit codes ----------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "nonsense"],
        ["verify", "global", "--space", "node"],
        ["describe", "--space", "no_such_space"],
        ["curvature", "--space", "node", "--eps-ladder", "0.4:2"],
        ["curvature", "--space", "node", "--k", "9"],
        ["morse", "--space", "node", "--v", "1,0"],
        ["morse", "--space", "node", "--v", "a,b,c,d"],
        ["curvature", "--space", "node", "--samples", "0"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 2
    assert out == ""


def test_failed_identity_exits_1(capsys, monkeypatch):
    bad = lambda space, cfg, runner: [IdentityReport("local_gb", space.name, 1, 2)]
    monkeypatch.setitem(cli.SUITE_TABLE, "local-gb", (cli.SUITE_TABLE["local-gb"][0], bad))
    code, out, err = run(capsys, "verify", "local-gb", "--space", "node")
    assert code == 1
    assert json.loads(out)["pass"] is False
    assert "FAIL" in err


def test_computation_error_recorded(capsys, monkeypatch):
    from lkcurv.errors import DivergenceError

    def boom(space, cfg, runner):
        raise DivergenceError("no limit")

    monkeypatch.setitem(cli.SUITE_TABLE, "local-gb", (cli.SUITE_TABLE["local-gb"][0], boom))
    code, out, _ = run(capsys, "verify", "local-gb", "--space", "node")
    assert code == 1
    (res,) = json.loads(out)["results"]
    assert res["pass"] is False and res["error"].startswith("DivergenceError")


def test_space_file(capsys):
    code, out, _ = run(capsys, "describe", "--space", "tests/data/node_file.json")
    assert code == 0
    assert json.loads(out)["results"][0]["Eu(0)"] == 2


# -- reports ----------------------------------------------------------------------


def test_empty_report_is_valid():
    doc = json.loads(emit_report([], "json", "verify"))
    assert doc["results"] == [] and doc["pass"] is True
    assert emit_report([], "csv") == "k,eps,stratum,value,stderr\n"


def test_report_rounding():
    doc = json.loads(emit_report([IdentityReport("x", "s", 1.0, 1.0 + 1e-15, abs_tol=1e-9)], "json"))
    r = doc["results"][0]
    assert r["rhs"] == 1.0 and r["pass"] is True
    # zero tolerance means exact
    assert not IdentityReport("x", "s", 1.0, 1.0 + 1e-15).passed


def test_threads_do_not_change_output(capsys, monkeypatch):
    argv = ["verify", "local-gb", "--space", "node", "--seed", "3", *FAST]
    outs = []
    for t in ("1", "4"):
        code, out, _ = run(capsys, *argv, "--threads", t)
        assert code == 0
        outs.append(out)
    monkeypatch.setenv("LKCURV_THREADS", "3")
    outs.append(run(capsys, *argv)[1])
    assert outs[0] == outs[1] == outs[2]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lkcurv.cli", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "list"
