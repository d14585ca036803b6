import json
import pathlib
import subprocess
import sys

import pytest

from boundary_reaction.cli import ALL_ORDER, ConfigError, dumps_json, main, parse_config

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "demos" / "configs"

MANUFACTURED = """
[weight]
kind = p_laplacian
p = 2
alpha = 0

[nonlinearity]
f = linear

[grid]
n = 1
y_extent = 3.141592653589793
x_extent = 6
ny = 16
nx = 16

[boundary]
far_field = dirichlet
profile = exp_cos

[initial]
field = exp_cos
scale = 0.9
"""


def test_manufactured_config_is_valid():
    run, s = parse_config(MANUFACTURED)
    assert s.weight.kind == "p_laplacian" and s.weight.p == 2.0 and s.weight.alpha == 0.0
    assert s.f.name == "linear" and s.g.name == "zero"
    assert run.grid == {"n": 1, "y_extent": 3.141592653589793, "x_extent": 6.0, "ny": 16, "nx": 16}
    assert run.tolerances["tol_sym"] == 1e-3


@pytest.mark.parametrize("override,message", [
    ("weight.p=0.5", "p must exceed 1"),
    ("weight.alpha=1.0", "alpha must lie strictly inside (-1,1)"),
])
def test_structural_violations(override, message):
    with pytest.raises(ConfigError) as exc:
        parse_config(MANUFACTURED, [override])
    assert message in exc.value.errors


def test_all_errors_reported_together():
    text = MANUFACTURED.replace("p = 2", "p = 0.5\ncolour = blue").replace("nx = 16", "") + "\n[extras]\nx = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, ["tol_sym=-1"])
    errs = exc.value.errors
    assert "p must exceed 1" in errs
    assert "unknown key weight.colour" in errs
    assert "unknown section [extras]" in errs
    assert "missing required key grid.nx" in errs
    assert "verify.tol_sym must be positive" in errs


def test_missing_required_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("[grid]\nn = 1\n")
    assert {"missing required key weight.kind", "missing required key nonlinearity.f"} <= set(exc.value.errors)


def test_radii_must_increase():
    with pytest.raises(ConfigError) as exc:
        parse_config(MANUFACTURED, ["verify.radii=3,2,4"])
    assert "verify.radii must be positive and strictly increasing" in exc.value.errors


def test_json_is_deterministic_and_round_trips():
    obj = {"b": [0.1, float("nan")], "a": {"y": 1, "x": 1 / 3}, "c": [{"k": True}]}
    text = dumps_json(obj)
    assert text == dumps_json(dict(reversed(list(obj.items()))))
    back = json.loads(text)
    assert back["a"]["x"] == 1 / 3 and back["b"][1] is None and list(back) == ["a", "b", "c"]


def run_cli(tmp_path, name, *args):
    out = tmp_path / "out"
    code = main([name, "--config", str(tmp_path / "s.ini"), "--out", str(out), *args])
    return code, out


def test_all_writes_seven_reports(tmp_path):
    (tmp_path / "s.ini").write_text(MANUFACTURED)
    code, out = run_cli(tmp_path, "all", "--seed", "3")
    assert code == 0
    reports = sorted(p.name for p in out.glob("*.json"))
    assert reports == sorted(f"{n}.json" for n in ALL_ORDER) and len(reports) == 7
    assert (out / "solve_u.bin").exists() and any(out.glob("solve_*.csv"))
    solve = json.loads((out / "solve.json").read_text())
    assert solve["passed"] and solve["seed"] == 3


def test_reports_are_byte_identical(tmp_path):
    (tmp_path / "s.ini").write_text(MANUFACTURED)
    a = tmp_path / "a"
    b = tmp_path / "b"
    for d in (a, b):
        assert main(["all", "--config", str(tmp_path / "s.ini"), "--out", str(d), "--seed", "7"]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_config_error_exits_one(tmp_path, capsys):
    (tmp_path / "s.ini").write_text(MANUFACTURED.replace("p = 2", "p = 0.5"))
    code, _ = run_cli(tmp_path, "solve")
    assert code == 1
    assert "p must exceed 1" in capsys.readouterr().err


def test_missing_config_exits_one(tmp_path):
    code, _ = run_cli(tmp_path, "solve")
    assert code == 1


def test_mean_curvature_weight_check(tmp_path):
    out = tmp_path / "out"
    assert main(["check-weight", "--config", str(CONFIGS / "mean_curvature.ini"), "--out", str(out)]) == 0
    report = json.loads((out / "check-weight.json").read_text())
    assert report["muckenhoupt_constant"] == pytest.approx(4 / 3, rel=1e-8)


@pytest.mark.parametrize("cmd", ["poincare", "capacity"])
def test_saddle_violates_capacity_limit(tmp_path, cmd):
    out = tmp_path / "out"
    assert main([cmd, "--config", str(CONFIGS / "saddle.ini"), "--out", str(out)]) == 2
    report = json.loads((out / f"{cmd}.json").read_text())
    assert not report["passed"] and report["violations"]
    floor = report["capacity_floor"] if cmd == "poincare" else report["floor"]
    assert floor == pytest.approx(292.78, rel=1e-4)


def test_tolerance_override_changes_verdict(tmp_path):
    (tmp_path / "s.ini").write_text(MANUFACTURED)
    code, out = run_cli(tmp_path, "identity-check", "--tol-override", "tol_identity=1e-300")
    report = json.loads((out / "identity-check.json").read_text())
    assert (code == 2) == bool(report["violations"])


def test_module_entry_point(tmp_path):
    (tmp_path / "s.ini").write_text(MANUFACTURED)
    proc = subprocess.run([sys.executable, "-m", "boundary_reaction", "check-weight", "--config",
                           str(tmp_path / "s.ini"), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "check-weight: ok" in proc.stdout
