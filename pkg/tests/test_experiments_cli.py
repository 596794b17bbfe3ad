import csv
import io
import json

import pytest
from click.testing import CliRunner

from laminaire import cli
from laminaire import experiments as ex


def _config(tmp_path, name, out=None, **params):
    lines = ["[experiment]", f"name = {name}", "seed = 7"]
    if out is not None:
        lines.append(f"out = {out}")
    if params:
        lines.append("[params]")
        lines += [f"{k} = {v}" for k, v in params.items()]
    path = tmp_path / f"{name}.ini"
    path.write_text("\n".join(lines) + "\n")
    return path


def _run(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args])


def test_list_experiments_and_fixtures():
    res = _run("list-experiments")
    assert res.exit_code == 0
    assert res.output.split() == list(cli.EXPERIMENT_NAMES)
    res = _run("fixtures")
    assert res.exit_code == 0 and "demailly" in res.output and "henon" in res.output


def test_unknown_experiment_exits_2_without_files(tmp_path):
    out = tmp_path / "out"
    res = _run("run", _config(tmp_path, "nope", out))
    assert res.exit_code == 2
    assert not out.exists()


def test_missing_config_exits_2(tmp_path):
    assert _run("run", tmp_path / "absent.ini").exit_code == 2


def test_lemma45_reports_and_is_byte_identical(tmp_path):
    cfg = _config(tmp_path, "lemma45", atoms=2000)
    a, b = tmp_path / "a", tmp_path / "b"
    ra = _run("run", cfg, "--out", a)
    rb = _run("run", cfg, "--out", b)
    assert ra.exit_code == 0 and rb.exit_code == 0
    assert "PASS  rerun_byte_identical" in ra.output
    for name in ("lemma45.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["experiment"] == "lemma45" and summary["pass"] is True
    assert summary["parameters"]["seed"] == 7


def test_seed_override_changes_the_sample(tmp_path):
    cfg = _config(tmp_path, "lemma45", atoms=2000)
    _run("run", cfg, "--out", tmp_path / "a")
    _run("run", cfg, "--out", tmp_path / "b", "--seed", 8)
    sa = json.loads((tmp_path / "a" / "summary.json").read_text())
    sb = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert sb["parameters"]["seed"] == 8
    assert (tmp_path / "a" / "lemma45.csv").read_text() != (tmp_path / "b" / "lemma45.csv").read_text()
    assert sa["criteria"][0]["name"] == sb["criteria"][0]["name"]


def test_empty_result_writes_header_only():
    res = ex.ExperimentResult("x", ("r", "lambda"), [], [])
    assert ex.render_csv(res) == "r,lambda\n"


def test_csv_floats_roundtrip():
    res = ex.ExperimentResult("x", ("a", "b"), [[0.1, 1 / 3]], [])
    row = list(csv.reader(io.StringIO(ex.render_csv(res))))[1]
    assert [float(v) for v in row] == [0.1, 1 / 3]


def test_pipeline_column_schema(tmp_path):
    out = tmp_path / "p"
    res = _run("run", _config(tmp_path, "pipeline", out, r_sequence=0.8, iterate=1, h=0.2))
    assert res.exit_code in (0, 1)
    header = (out / "pipeline.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["r", "lambda", "defect_mass"]
    assert header[-1] == "rate_ratio"
    rows = list(csv.reader(io.StringIO((out / "pipeline.csv").read_text())))[1:]
    assert len(rows) == 1 and float(rows[0][0]) == 0.8


def test_unwritable_output_fails(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = _run("run", _config(tmp_path, "lemma45", atoms=500), "--out", blocker / "sub")
    assert res.exit_code != 0


@pytest.mark.parametrize("params", [
    {"r_sequence": "0.4 0.8"},
    {"r_sequence": "0.8 -0.4"},
    {"lambda": "1.5"},
    {"iterate": "two"},
])
def test_invalid_parameters_exit_2(tmp_path, params):
    res = _run("run", _config(tmp_path, "pipeline", tmp_path / "o", **params))
    assert res.exit_code == 2
    assert "error:" in res.output


def test_invalid_henon_map_exits_2(tmp_path):
    res = _run("run", _config(tmp_path, "henon_mu", tmp_path / "o", a=0))
    assert res.exit_code == 2


def test_config_aliases_and_reserved_keys(tmp_path):
    cfg = cli.load_config(_config(tmp_path, "demailly_self", tmp_path / "o", sigma_sequence="0.2 0.1"))
    assert cfg.seed == 7 and cfg.params == {"sigmas": "0.2 0.1"}
