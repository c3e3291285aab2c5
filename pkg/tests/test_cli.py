import csv
import json

import pytest

from shellhom.cli import (EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY,
                          dumps_json, parse_grid, run)
from shellhom.config import loads_config

BASE = """
[surface]
spec = "flat:Lx=1,Ly=1"
quadrature = 2

[material]
kind = "svk"
mu = "1+step(frac(y1)-0.5)"
lambda = "0"

[discretization]
ny = 2
nz = 1
nt = 2

[regime]
gamma1 = 1.0
"""


def _write(tmp_path, text=BASE, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(tmp_path, *argv, text=BASE, out="out"):
    cfg = _write(tmp_path, text)
    o = tmp_path / out
    code = run([argv[0], "--config", cfg, "--out", str(o), *argv[1:]])
    return code, o


def test_cellform_writes_outputs(tmp_path, capsys):
    code, out = _run(tmp_path, "cellform")
    assert code == EXIT_OK
    js = json.loads((out / "cellform.json").read_text())
    assert len(js["matrix"]) == 3
    assert (out / "diagnostics.txt").read_text().startswith("exit 0")
    assert "matrix" in capsys.readouterr().out


def test_cellform_is_deterministic(tmp_path):
    _, a = _run(tmp_path, "cellform", out="a")
    _, b = _run(tmp_path, "cellform", out="b")
    assert (a / "cellform.json").read_bytes() == (b / "cellform.json").read_bytes()


def test_resolved_config_round_trips(tmp_path):
    _, out = _run(tmp_path, "cellform", "--regime", "gamma1=inf", "--ny", "3")
    text = (out / "resolved-config.toml").read_text()
    cfg = loads_config(text)
    assert cfg["regime"]["gamma1"] == "inf"
    assert cfg["discretization"]["ny"] == 3
    assert cfg.to_toml() == text


def test_sweep_csv(tmp_path):
    code, out = _run(tmp_path, "sweep", "--gamma1", "0.1:10:3log")
    assert code == EXIT_OK
    rows = list(csv.reader((out / "sweep.csv").open()))
    assert rows[0] == ["gamma1", "M11", "M22", "M33", "M12", "M13", "M23"]
    assert [r[0] for r in rows[1:]] == ["0", "0.10000000000000001", "1", "10", "inf"]


def test_energy_json(tmp_path):
    text = BASE + '\n[immersion]\nspec = "roll:R=1"\n'
    code, out = _run(tmp_path, "energy", text=text)
    assert code == EXIT_OK
    js = json.loads((out / "energy.json").read_text())
    assert js["finite"] is True and js["value"] > 0 and js["nodes"] == 4


@pytest.mark.parametrize("suite", ["geometry", "material", "relaxation"])
def test_verify_suites_pass(tmp_path, suite):
    text = BASE.replace("flat:Lx=1,Ly=1", "sphere:R=2,cap=30")
    code, out = _run(tmp_path, "verify", suite, text=text)
    assert code == EXIT_OK
    assert json.loads((out / f"verify-{suite}.json").read_text())["pass"]


def test_verify_failure_exit_code(tmp_path):
    text = BASE.replace('lambda = "0"', 'lambda = "-1"')
    code, out = _run(tmp_path, "verify", "material", text=text)
    assert code == EXIT_VERIFY
    assert (out / "diagnostics.txt").read_text().startswith("exit 4")


def test_solver_failure_exit_code(tmp_path):
    text = BASE.replace('lambda = "0"', 'lambda = "-1"').replace(
        '"1+step(frac(y1)-0.5)"', '"1"')
    code, out = _run(tmp_path, "cellform", text=text)
    assert code == EXIT_SOLVER
    assert "IndefiniteSystem" in (out / "diagnostics.txt").read_text()


@pytest.mark.parametrize("text,argv", [
    (BASE.replace("ny = 2", "ny = 40"), ()),
    (BASE.replace("[regime]", "[bogus]\nx = 1\n[regime]"), ()),
    (BASE.replace("gamma1 = 1.0", 'gamma1 = "fast"'), ()),
    (BASE.replace("[regime]\ngamma1 = 1.0", ""), ()),
    (BASE + "\nnot toml ===", ()),
    (BASE, ("--point", "5,5")),
    (BASE, ("--regime", "gamma2=1")),
])
def test_config_errors(tmp_path, text, argv):
    code, _ = _run(tmp_path, "cellform", *argv, text=text)
    assert code == EXIT_CONFIG


def test_missing_config_file_and_bad_arguments(tmp_path):
    assert run(["cellform", "--config", str(tmp_path / "none.toml"),
                "--out", str(tmp_path)]) == EXIT_CONFIG
    assert run(["nonsense"]) == EXIT_CONFIG


def test_threescale_and_limsup(tmp_path):
    text = BASE.replace('mu = "1+step(frac(y1)-0.5)"', 'mu = "1"') + """
[immersion]
spec = "id"

[experiment.pair]
type = "threescale"
f = "cos(2*pi*y1)"
phi = "cos(2*pi*y1)"
limit = "cos(2*pi*y1)"
n_slow = 4

[experiment.rec]
type = "limsup"
w = ["0.1*sin(2*pi*x1)", "0", "0"]
n_slow = 16
n_t = 4
"""
    code, out = _run(tmp_path, "threescale", "--hs", "0.01", text=text)
    assert code == EXIT_OK
    rows = list(csv.reader((out / "threescale.csv").open()))
    assert rows[0] == ["h", "lhs", "rhs", "gap"]
    assert (out / "threescale-flat.csv").exists()
    code, out = _run(tmp_path, "limsup", "--hs", "0.01", text=text, out="o2")
    assert code == EXIT_OK
    rows = list(csv.reader((out / "limsup.csv").open()))
    assert len(rows) == 2
    assert abs(float(rows[1][3])) <= 0.05 * float(rows[1][2])


def test_grid_parsing_and_json_format():
    assert parse_grid("1,2.5") == [1.0, 2.5]
    assert parse_grid("0:1:3lin") == [0.0, 0.5, 1.0]
    assert len(parse_grid("1e-3:1e3:7log")) == 7
    assert dumps_json({"a": 0.1, "b": [1, float("inf")]}) == \
        '{\n  "a": 0.10000000000000001,\n  "b": [1, "inf"]\n}\n'
