"""Config schema, YAML loading, dotted overrides, validation errors."""

import pytest

from spikeq.config import (
    ConfigError,
    EncoderConfig,
    ExperimentConfig,
    config_from_dict,
    load_config,
    parse_scalar,
)


class TestDefaults:
    def test_encoder_type_defaults(self):
        assert (EncoderConfig(type="learned").m_neurons, EncoderConfig(type="learned").t_steps) == (8, 10)
        log = EncoderConfig(type="log_scale")
        assert (log.m_neurons, log.t_steps) == (10, 30)
        tern = EncoderConfig(type="ternary")
        assert (tern.m_neurons, tern.t_steps) == (8, 10)

    def test_explicit_dims_override_type_defaults(self):
        enc = EncoderConfig(type="log_scale", m_neurons=6, t_steps=12)
        assert (enc.m_neurons, enc.t_steps) == (6, 12)

    def test_experiment_defaults_consistent(self):
        cfg = ExperimentConfig()
        assert cfg.link.d_tap == 41
        assert cfg.encoder.n_classes == 256
        assert cfg.snn.n_hidden == 80
        assert cfg.train.batch_size == 256
        assert cfg.sweep.min_bit_errors == 100


class TestFromDict:
    def test_nested_sections(self):
        cfg = config_from_dict(
            {
                "seed": 5,
                "link": {"fiber_length_km": 2.0},
                "train": {"alpha": 0.01},
            }
        )
        assert cfg.seed == 5
        assert cfg.link.fiber_length_km == 2.0
        assert cfg.train.alpha == 0.01

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError, match="train.alpa"):
            config_from_dict({"train": {"alpa": 0.5}})

    def test_unknown_top_level_named(self):
        with pytest.raises(ConfigError, match="sneed"):
            config_from_dict({"sneed": 1})

    def test_alpha_out_of_range_names_field(self):
        with pytest.raises(ConfigError, match="alpha"):
            config_from_dict({"train": {"alpha": 2.0}})

    def test_bad_encoder_type(self):
        with pytest.raises(ConfigError, match="encoder.type"):
            config_from_dict({"encoder": {"type": "morse"}})


class TestYamlLoading:
    def test_file_with_comments_and_overrides(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(
            "# experiment\n"
            "seed: 9\n"
            "link:\n"
            "  fiber_length_km: 3.0  # km\n"
            "train:\n"
            "  epochs: 2\n"
        )
        cfg = load_config(str(path), overrides=[("train.alpha", "1e-2"), ("link.d_tap", "21")])
        assert cfg.seed == 9
        assert cfg.link.fiber_length_km == 3.0
        assert cfg.train.alpha == 0.01
        assert cfg.link.d_tap == 21

    def test_train_seed_inherits_experiment_seed(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("seed: 1234\n")
        cfg = load_config(str(path))
        assert cfg.train.seed == 1234

    def test_explicit_train_seed_kept(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("seed: 1\ntrain:\n  seed: 77\n")
        assert load_config(str(path)).train.seed == 77

    def test_invalid_yaml_reported(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("train: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_env_var_overrides_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPIKEQ_OUTPUT_DIR", str(tmp_path / "env_dir"))
        cfg = config_from_dict({"output_dir": "elsewhere"})
        assert cfg.output_dir == str(tmp_path / "env_dir")


class TestScalarParsing:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("1e-2", 0.01),
            ("42", 42),
            ("true", True),
            ("null", None),
            ("[1, 2]", [1, 2]),
            ("last", "last"),
            ("-19.5", -19.5),
        ],
    )
    def test_values(self, text, expected):
        assert parse_scalar(text) == expected
