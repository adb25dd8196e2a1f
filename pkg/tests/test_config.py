import json

import pytest

from qkdsim.config import (
    SEED_ENV,
    ConfigError,
    SessionConfig,
    config_keys,
    from_flat,
    load_config,
    parse_text,
    read_flat,
    to_flat,
)


def write(tmp_path, text, name="session.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParsing:
    def test_key_value_with_comments(self, tmp_path):
        p = write(tmp_path, "# header\nprotocol = sarg  # trailing\n\nsource.mu = 0.2\n")
        cfg = load_config(p, env={})
        assert cfg.protocol == "sarg" and cfg.source.mu == 0.2

    def test_json_nested_and_flat_agree(self, tmp_path):
        nested = write(tmp_path, json.dumps({"protocol": "sarg", "channel": {"length_km": 40}}), "a.json")
        flat = write(tmp_path, json.dumps({"protocol": "sarg", "channel.length_km": 40}), "b.json")
        assert load_config(nested, env={}) == load_config(flat, env={})

    def test_defaults(self, tmp_path):
        assert load_config(write(tmp_path, ""), env={}) == SessionConfig()

    def test_round_trip_text(self, tmp_path):
        cfg = from_flat({"protocol": "sarg", "eve.strategy": "pns", "source.mu": 0.37})
        assert load_config(write(tmp_path, cfg.to_text()), env={}) == cfg

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_text("protocol = bb84\nsource.mu 0.1\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as info:
            parse_text("source.mu = 1\nsource.mu = 2\n")
        assert info.value.field == "source.mu"

    def test_malformed_json(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed JSON"):
            read_flat(write(tmp_path, "{not json", "x.json"))


class TestSeedOverride:
    def test_environment_wins(self, tmp_path):
        p = write(tmp_path, "session.seed = 3\n")
        assert load_config(p, env={SEED_ENV: "77"}).session.seed == 77
        assert load_config(p, env={}).session.seed == 3

    def test_empty_variable_ignored(self, tmp_path):
        assert load_config(write(tmp_path, "session.seed = 3\n"), env={SEED_ENV: ""}).session.seed == 3


class TestValidation:
    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as info:
            from_flat({"source.muu": 0.1})
        assert info.value.field == "source.muu"

    @pytest.mark.parametrize("key,value", [
        ("protocol", "e91"),
        ("source.kind", "laser"),
        ("source.mu", -0.1),
        ("channel.length_km", -1),
        ("detector.efficiency", 1.5),
        ("detector.dark_prob", 2),
        ("optics.visibility", 1.01),
        ("eve.strategy", "clone"),
        ("eve.omega", -0.2),
        ("eve.pns_policy", "greedy"),
        ("session.pulses", 0),
        ("session.sample_fraction", 1.0),
        ("analysis.ec_efficiency", 0.9),
        ("analysis.leakage", "collective"),
        ("monitor.coincidence_window", 0),
        ("trojan.fraction", 1.5),
    ])
    def test_out_of_range_names_field(self, key, value):
        with pytest.raises(ConfigError) as info:
            from_flat({key: value})
        assert info.value.field == key
        assert key in str(info.value)

    @pytest.mark.parametrize("key,value", [("session.pulses", "1.5"), ("source.mu", "abc"),
                                           ("session.seed", "nan"), ("source.mu", "nan")])
    def test_type_errors(self, key, value):
        with pytest.raises(ConfigError) as info:
            from_flat({key: value})
        assert info.value.field == key

    def test_integer_from_float_text(self):
        assert from_flat({"session.pulses": "1e6"}).session.pulses == 1_000_000

    def test_p_multi_bound(self):
        with pytest.raises(ConfigError) as info:
            from_flat({"source.kind": "single_photon", "source.p1": 0.9, "source.p_multi": 0.2})
        assert info.value.field == "source.p_multi"

    def test_case_insensitive_words(self):
        assert from_flat({"protocol": " SARG "}).protocol == "sarg"


class TestHelpers:
    def test_keys_cover_every_field(self):
        keys = config_keys()
        assert "channel.length_km" in keys and "protocol" in keys
        assert to_flat(SessionConfig()) == keys

    def test_replace(self):
        cfg = SessionConfig().with_value("channel.length_km", 12)
        assert cfg.channel.length_km == 12.0 and cfg.protocol == "bb84"
        with pytest.raises(ConfigError):
            cfg.with_value("channel.length_km", -3)

    def test_derived_models(self):
        cfg = from_flat({"source.kind": "single_photon", "detector.efficiency": 0.5})
        assert cfg.source_model().pmf()[1] == 1.0
        assert all(d.efficiency == 0.5 for d in cfg.detectors())
