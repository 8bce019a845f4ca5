import json
import shutil
from pathlib import Path

import pytest

from mplab.cli import main
from mplab.config import load_config, parse_config
from mplab.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["run", str(SCENARIOS / name), "--out", str(out), *extra])
    return code, out


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    text = capsys.readouterr().out
    for name in ("linear_mixed", "c1_degenerate", "three_cylinders"):
        assert name in text


def test_abp_scenario(tmp_path):
    code, out = run(tmp_path, "abp_linear_mixed")
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["theorems"][0]["outputs"]["bound"] == pytest.approx(2.718281828459045)
    assert "2.71828182846" in (out / "report.txt").read_text()
    header = (out / doc["csv"][0]).read_text().splitlines()[0]
    assert header == "x1,x2,value"


def test_c1_scenario_exit_2(tmp_path):
    code, out = run(tmp_path, "c1_counterexample")
    assert code == 2
    text = (out / "report.txt").read_text()
    assert "growth hypothesis" in text
    assert "max u >= 1 in the interior" in text


def test_quadratic_scenario_exit_2(tmp_path):
    code, _ = run(tmp_path, "quadratic_growth")
    assert code == 2


@pytest.mark.parametrize("name", ["narrow_strip", "lattice_strips", "bellman_isaacs", "mp_linear_mixed"])
def test_passing_scenarios(tmp_path, name):
    code, _ = run(tmp_path, name)
    assert code == 0


def test_byte_identical_reruns(tmp_path):
    _, a = run(tmp_path / "a", "c1_counterexample")
    _, b = run(tmp_path / "b", "c1_counterexample")
    for f in ("report.json", "report.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert any(c.isdigit() for c in (a / "run.log").read_text())


def test_flags_override(tmp_path):
    code, out = run(tmp_path, "abp_linear_mixed", "--tolerance", "1e-8", "--threads", "2")
    assert code == 0
    assert json.loads((out / "report.json").read_text())["tolerance"] == 1e-8


def test_scenario_file_path_and_default_out(tmp_path):
    target = tmp_path / "scn"
    shutil.copytree(SCENARIOS / "abp_linear_mixed", target)
    assert main(["run", str(target / "scenario.yaml")]) == 0
    assert (target / "out" / "report.json").exists()


def test_config_error_line_and_field(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\noperator:\n  preset: laplacian\ntheorems:\n  - id: ABP\n    bogus: 1\n")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert info.value.line == 6
    assert info.value.field == "theorems.0.bogus"
    assert main(["run", str(bad)]) == 1


@pytest.mark.parametrize(
    "text",
    [
        "name: x\noperator: {preset: laplacian}\n",  # nothing to do
        "name: x\noperator: {preset: laplacian, kind: linear}\ntheorems: [{id: MP}]\n",
        "name: x\noperator: {preset: laplacian}\ntheorems: [{id: FOO}]\n",
        "name: [unclosed\n",
        "- just a list\n",
        "name: x\noperator: {preset: laplacian}\ntheorems: [{id: MP}]\nextra: 1\n",
    ],
)
def test_config_rejections(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_runtime_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "s.yaml"
    bad.write_text("name: x\noperator: {preset: nonexistent}\ntheorems: [{id: MP}]\n")
    assert main(["run", str(bad)]) == 1
    assert "nonexistent" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing")]) == 1


def test_inline_operator(tmp_path):
    cfg = parse_config(
        """
name: inline
operator:
  kind: supinf
  families:
    - - {A: [[1.0, 0.0], [0.0, 1.0]], b: [0.0, 0.0], c: 0.0}
domain: {dim: 2, dirs: [[1.0, 0.0]], widths: [1.0]}
theorems: [{id: MP, grid: {h: 0.1, R: 1.0}}]
"""
    )
    op, dom = cfg.build()
    assert op.n == 2 and dom.k == 1
