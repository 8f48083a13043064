from pathlib import Path

import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from config import ConfigError, dump_config, parse_config, parse_config_text, with_overrides
from models.schemas import AttackVariant, ObjectiveFunction, ScenarioConfig

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


class TestParse:
    def test_empty_file_gives_defaults(self):
        cfg = parse_config_text("")
        assert cfg == ScenarioConfig()
        assert (cfg.n_sensors, cfg.n_attackers, cfg.sim_seconds) == (30, 5, 1800.0)
        assert cfg.objective_function == ObjectiveFunction.MRHOF

    def test_values_comments_and_quotes(self):
        cfg = parse_config_text(
            "# copycat scenario\n"
            "attack_variant = \"SPOOFED\"   # replay under the victim's id\n"
            "replay_interval_s = 2\n"
            "objective_function = 'OF0'\n"
            "\n"
            "radio.base_loss_prob = 0.1\n"
            "rpl.redundancy_k = 5\n"
        )
        assert cfg.attack_variant == AttackVariant.SPOOFED
        assert cfg.replay_interval_s == 2.0
        assert cfg.objective_function == ObjectiveFunction.OF0
        assert cfg.radio.base_loss_prob == 0.1
        assert cfg.radio.comm_range_m == 50.0
        assert cfg.rpl.redundancy_k == 5

    def test_zero_replay_interval_names_key_and_line(self):
        with pytest.raises(ConfigError) as e:
            parse_config_text("seed = 3\n\nreplay_interval_s = 0\n")
        assert e.value.key == "replay_interval_s"
        assert e.value.line == 3
        assert "replay_interval_s (line 3)" in str(e.value)

    def test_nested_value_error_names_line(self):
        with pytest.raises(ConfigError) as e:
            parse_config_text("radio.base_loss_prob = 1.5\n")
        assert e.value.key == "radio.base_loss_prob"
        assert e.value.line == 1

    @pytest.mark.parametrize("text", ["colour = blue\n", "radio.colour = 1\n", "rpl = 3\n", "nope.k = 1\n"])
    def test_unknown_keys(self, text):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text(text)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as e:
            parse_config_text("seed = 1\nseed = 2\n")
        assert e.value.line == 2

    def test_line_without_equals(self):
        with pytest.raises(ConfigError) as e:
            parse_config_text("seed 1\n")
        assert e.value.line == 1

    def test_cross_field_rule(self):
        with pytest.raises(ConfigError):
            parse_config_text("n_sensors = 3\nn_attackers = 4\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "absent.conf")

    def test_reads_file(self, tmp_path):
        path = tmp_path / "s.conf"
        path.write_text("n_sensors = 8\nn_attackers = 2\n", encoding="utf-8")
        cfg = parse_config(path)
        assert (cfg.n_sensors, cfg.n_attackers) == (8, 2)


class TestDump:
    def test_lists_every_field(self):
        text = dump_config(ScenarioConfig())
        keys = [line.split(" = ")[0] for line in text.splitlines()]
        assert "replay_interval_s" in keys
        assert "radio.comm_range_m" in keys
        assert "detector.fence_k" in keys
        assert len(keys) == len(set(keys))

    @given(
        seed=st.integers(0, 2 ** 64 - 1),
        variant=st.sampled_from(list(AttackVariant)),
        interval=st.floats(0.001, 100, allow_nan=False),
        loss=st.floats(0, 0.99, allow_nan=False),
    )
    def test_dump_parses_back(self, seed, variant, interval, loss):
        cfg = with_overrides(ScenarioConfig(), seed=seed, attack_variant=variant, replay_interval_s=interval)
        cfg = with_overrides(cfg, radio={**cfg.radio.model_dump(), "base_loss_prob": loss})
        assert parse_config_text(dump_config(cfg)) == cfg


def test_overrides_are_validated():
    with pytest.raises(ValidationError):
        with_overrides(ScenarioConfig(), replay_interval_s=0)
    assert with_overrides(ScenarioConfig(), replications=3).replications == 3


def test_reference_scenario_matches_defaults():
    assert parse_config(SCENARIOS / "reference.conf") == ScenarioConfig(data_start_jitter_s=60.0)


def test_generation_is_aligned_unless_a_scenario_spreads_it():
    assert ScenarioConfig().data_start_jitter_s == 0.0
    assert parse_config(SCENARIOS / "of0_spoofed.conf").data_start_jitter_s == 60.0


def test_shipped_scenarios_parse():
    cfg = parse_config(SCENARIOS / "of0_spoofed.conf")
    assert (cfg.objective_function, cfg.attack_variant) == (ObjectiveFunction.OF0, AttackVariant.SPOOFED)
