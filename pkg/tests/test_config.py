from dataclasses import fields

import pytest
import yaml

from atomhom import config as cf
from atomhom.config import ScenarioConfig, load_config_text
from atomhom.errors import ConfigError
from atomhom.experiment import PulseSchedule, SourceSpec


def test_defaults_round_trip():
    cfg = ScenarioConfig.default()
    again = load_config_text(cfg.to_yaml())
    assert again == cfg
    assert load_config_text(again.to_yaml()).to_yaml() == cfg.to_yaml()
    assert again.config_hash() == cfg.config_hash()


def test_every_field_has_a_key():
    assert {f.name for f in fields(SourceSpec)} == {f for f, _ in cf._SOURCE_KEYS.values()}
    assert {f.name for f in fields(PulseSchedule)} == {f for f, _ in cf._SCHEDULE_KEYS.values()}


def test_keys_carry_units():
    d = ScenarioConfig.default().to_dict()
    assert "dv_z_cm_per_s" in d["volumes"]["c"]
    assert "coherence_sigma_t_us" in d["source"]
    assert "tau_grid_us" in d["scan"]


def test_partial_override():
    cfg = load_config_text("schedule:\n  eta: 0.5\nrun_seed: 9\n")
    base = ScenarioConfig.default()
    assert cfg.schedule.eta == 0.5 and cfg.run_seed == 9
    assert cfg.source == base.source
    assert cfg.config_hash() != base.config_hash()


def test_empty_file_is_default():
    assert load_config_text("") == ScenarioConfig.default()


@pytest.mark.parametrize("text,line,path", [
    ("source:\n  family: tmsv\n  bogus: 1\n", 3, "source.bogus"),
    ("schedule:\n  eta: 1.5\n", 2, "schedule"),
    ("volumes:\n  e:\n    dv_z_cm_per_s: 1.0\n", 2, "volumes.e"),
    ("scan:\n  shots_per_tau: abc\n", 2, "scan.shots_per_tau"),
    ("run_seed: 1\nextra: {}\n", 2, "extra"),
    ("source:\n  v_center_a_cm_per_s: [1, 2]\n", 2, "source.v_center_a_cm_per_s"),
    ("detector:\n  enabled: 3\n", 2, "detector.enabled"),
    ("source: [1\n", 2, None),
])
def test_errors_point_at_line(text, line, path):
    with pytest.raises(ConfigError) as exc:
        load_config_text(text)
    assert exc.value.line == line
    assert exc.value.path == path
    assert str(exc.value).startswith(f"line {line}: ")


def test_overlapping_output_volumes_rejected():
    text = "volumes:\n  d:\n    center_cm_per_s: [0.0, 0.0, 12.1]\n"
    with pytest.raises(ConfigError, match="overlap"):
        load_config_text(text)


def test_scan_validation():
    with pytest.raises(ConfigError, match="shots_per_tau"):
        load_config_text("scan:\n  shots_per_tau: 0\n")
    with pytest.raises(ConfigError, match="ascending"):
        load_config_text("volume_scan:\n  sizes_cm_per_s: [0.6, 0.3]\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        cf.load_config(tmp_path / "nope.yaml")


def test_dump_is_plain_yaml():
    d = yaml.safe_load(ScenarioConfig.default().to_yaml())
    assert d["run_seed"] == 2015
    assert d["volumes"]["c"]["center_cm_per_s"] == [0.0, 0.0, 12.1]
