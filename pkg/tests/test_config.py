import json

import pytest

from pvtwin.config import STAGES, load_config, parse_config
from pvtwin.errors import ConfigurationError


def test_reference_config_systems(ref_config):
    assert [s.name for s in ref_config.systems] == ["A", "B"]
    a, b = ref_config.system("A"), ref_config.system("B")
    assert a.array.modules_per_string * a.array.strings * 400 == pytest.approx(51_200)
    assert b.inverter.P_AC0 == pytest.approx(27_600, rel=0.01)
    with pytest.raises(ConfigurationError):
        ref_config.system("Z")


def test_stage_seeds_distinct_and_stable(ref_config):
    seeds = [ref_config.stage_seed(s) for s in STAGES]
    assert len(set(seeds)) == len(seeds)
    assert seeds == [load_config().stage_seed(s) for s in STAGES]
    assert ref_config.with_seed(99).stage_seed("synth") != ref_config.stage_seed("synth")
    with pytest.raises(ConfigurationError):
        ref_config.stage_seed("deploy")


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("site"),
    lambda r: r.update(systems=[]),
    lambda r: r.update(seed=-1),
    lambda r: r.update(seed="7"),
    lambda r: r["systems"][0].update(module="no_such_module"),
    lambda r: r["systems"][0].update(modules_per_string=0),
    lambda r: r.update(systems=r["systems"] + r["systems"][:1]),
])
def test_invalid_config_rejected(ref_config, mutate):
    raw = json.loads(json.dumps(ref_config.raw))
    mutate(raw)
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(bad)
