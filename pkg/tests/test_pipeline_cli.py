import json
from pathlib import Path

import pytest

from pvtwin import cli
from pvtwin.config import load_config
from pvtwin.errors import MissingArtifactError
from pvtwin.pipeline import run_pipeline

SMALL = Path(__file__).parent / "data" / "small_config.json"


@pytest.fixture(scope="module")
def small():
    return load_config(SMALL)


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_report_without_detect_names_detect(small, tmp_path):
    run_pipeline(small, tmp_path, ["simulate", "losses", "synth", "inject", "train"])
    with pytest.raises(MissingArtifactError) as info:
        run_pipeline(small, tmp_path, ["report"])
    assert info.value.stage == "detect"


def test_stage_without_upstream_names_it(small, tmp_path):
    with pytest.raises(MissingArtifactError) as info:
        run_pipeline(small, tmp_path, ["losses"])
    assert info.value.stage == "simulate"


def test_simulate_rerun_is_byte_identical(small, tmp_path):
    run_pipeline(small, tmp_path / "a", ["simulate", "synth"])
    run_pipeline(small, tmp_path / "b", ["simulate", "synth"])
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a.keys() == b.keys() and a == b
    man = json.loads((tmp_path / "a" / "synth" / "manifest.json").read_text())
    assert set(man) == {"stage", "seed", "master_seed", "config_sha256", "inputs", "outputs"}
    assert "simulate/monitoring_B.csv" in man["inputs"]


def test_seed_override_changes_outputs(small, tmp_path):
    run_pipeline(small, tmp_path / "a", ["simulate"])
    run_pipeline(small.with_seed(8), tmp_path / "b", ["simulate"])
    assert _tree(tmp_path / "a") != _tree(tmp_path / "b")


def test_cli_success_and_missing_upstream(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.main(["--config", str(SMALL), "--out", out, "simulate"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "ok" and doc["stages"][0]["stage"] == "simulate"
    assert cli.main(["--config", str(SMALL), "--out", out, "report"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] and err["stage"] == "detect"


def test_cli_flags_after_subcommand(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(SMALL), "--out", str(tmp_path), "--seed", "3"]) == 0
    man = json.loads((tmp_path / "simulate" / "manifest.json").read_text())
    assert man["master_seed"] == 3


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["bogus"]) == 2
    last = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(last)["error"] == "usage_error"
    assert cli.main(["--config", str(tmp_path / "none.json"), "--out", str(tmp_path), "simulate"]) == 1
    assert "error" in json.loads(capsys.readouterr().err)
