"""Tests for YAML configuration loading."""

from pathlib import Path

import pytest

from core.config import (
    ConfigError,
    _substitute_env_vars,
    _substitute_env_vars_recursive,
    apply_overrides,
    build_config,
    load_config,
    parse_override,
)
from core.models import NET_PRESETS


class TestSubstituteEnvVars:
    """Tests for environment variable substitution."""

    def test_simple_substitution(self, monkeypatch):
        """Simple ${VAR} substitution."""
        monkeypatch.setenv("TEST_VAR", "hello")
        assert _substitute_env_vars("${TEST_VAR}") == "hello"

    def test_default_value_used(self, monkeypatch):
        """Default value used when var not set."""
        monkeypatch.delenv("UNSET_VAR", raising=False)
        assert _substitute_env_vars("${UNSET_VAR:-default}") == "default"

    def test_default_value_not_used_when_set(self, monkeypatch):
        """Default value not used when var is set."""
        monkeypatch.setenv("SET_VAR", "actual")
        assert _substitute_env_vars("${SET_VAR:-default}") == "actual"

    def test_multiple_substitutions(self, monkeypatch):
        """Multiple substitutions in one string."""
        monkeypatch.setenv("A", "1")
        monkeypatch.setenv("B", "2")
        assert _substitute_env_vars("${A} and ${B}") == "1 and 2"

    def test_unset_without_default_preserved(self, monkeypatch):
        """Unset var without default is preserved as-is."""
        monkeypatch.delenv("MISSING", raising=False)
        assert _substitute_env_vars("${MISSING}") == "${MISSING}"

    def test_substituted_numbers_coerced(self, monkeypatch):
        """A substituted value is re-read as a YAML scalar."""
        monkeypatch.setenv("REPEATS", "5")
        data = _substitute_env_vars_recursive({"experiment": {"num_repeats": "${REPEATS}"}})
        assert data["experiment"]["num_repeats"] == 5

    def test_plain_strings_untouched(self):
        """Strings without references keep their type."""
        data = _substitute_env_vars_recursive({"tag": "123", "items": ["a", 1]})
        assert data == {"tag": "123", "items": ["a", 1]}


class TestOverrides:
    """Tests for dotted-key overrides."""

    def test_parse_override(self):
        """Values are parsed as YAML."""
        assert parse_override("train.epochs=5") == (["train", "epochs"], 5)
        assert parse_override("drp.enabled=false") == (["drp", "enabled"], False)
        assert parse_override("experiment.tag=run-a") == (["experiment", "tag"], "run-a")

    def test_missing_equals(self):
        """An override needs key=value."""
        with pytest.raises(ConfigError, match="Invalid override"):
            parse_override("train.epochs")

    def test_apply_creates_sections(self):
        """Missing sections are created on the way down."""
        data = apply_overrides({}, ["train.lambda_rex=0", "experiment.base_seed=7"])
        assert data == {"train": {"lambda_rex": 0}, "experiment": {"base_seed": 7}}

    def test_overrides_win(self):
        """Overrides replace values from the file."""
        config = build_config({"train": {"epochs": 10}}, ["train.epochs=3"])
        assert config.spec.train.epochs == 3

    def test_input_not_mutated(self):
        """build_config leaves the caller's mapping alone."""
        data = {"train": {"epochs": 10}}
        build_config(data, ["train.epochs=3"])
        assert data == {"train": {"epochs": 10}}


class TestBuildConfig:
    """Tests for build_config."""

    def test_defaults(self):
        """An empty mapping yields the desk defaults."""
        config = build_config({})
        assert config.spec.n == 600
        assert config.spec.p == 30
        assert config.spec.coefficients.num_nonnull == 6
        assert config.spec.net_preset == "desk"
        assert config.settings.workers == 1

    def test_experiment_section_is_top_level(self):
        """experiment keys land on the spec itself."""
        config = build_config({"experiment": {"n": 200, "p": 10, "num_repeats": 3}})
        assert config.spec.n == 200
        assert config.spec.num_repeats == 3

    def test_dataset_tag_shortcut(self):
        """A dataset tag expands to the registered spec."""
        config = build_config({"dataset": {"tag": "J+G"}})
        assert config.spec.dataset.kind == "copula"
        assert config.spec.dataset.copula.family == "joe"
        assert config.spec.dataset.copula.marginal == "gamma"

    def test_tag_with_override_field(self):
        """Fields next to a tag refine it."""
        config = build_config({"dataset": {"tag": "C+U", "copula": {"theta": 4.0}}})
        assert config.spec.dataset.copula.theta == 4.0
        assert config.spec.dataset.copula.family == "clayton"

    def test_unknown_dataset_tag(self):
        """An unknown tag names the field."""
        with pytest.raises(ConfigError) as exc_info:
            build_config({"dataset": {"tag": "nope"}})
        assert "dataset.tag" in exc_info.value.details[0]

    def test_mixture_preset(self):
        """mixture.preset resolves to named weights."""
        config = build_config({"dataset": {"mixture": {"preset": "pi-6"}}})
        assert config.spec.dataset.mixture.weights == (0.314, 0.041, 0.645)

    def test_unknown_mixture_preset(self):
        """An unknown preset lists the valid ones."""
        with pytest.raises(ConfigError, match="Invalid mixture preset"):
            build_config({"dataset": {"mixture": {"preset": "pi-0"}}})

    def test_net_section_implies_custom(self):
        """A net section switches to the custom architecture."""
        config = build_config({"net": {"num_heads": 2, "num_layers": 1, "hidden_dim": 8}})
        assert config.spec.net_preset == "custom"
        assert config.spec.net_config().hidden_dim == 8

    def test_unknown_section(self):
        """Unknown top-level sections are rejected."""
        with pytest.raises(ConfigError, match="Unknown configuration sections") as exc_info:
            build_config({"optimizer": {}})
        assert exc_info.value.details[0].startswith("optimizer:")

    def test_validation_details(self):
        """Validation errors list the failing field."""
        with pytest.raises(ConfigError, match="Invalid configuration") as exc_info:
            build_config({"train": {"epochs": 0}})
        assert any(d.startswith("train.epochs") for d in exc_info.value.details)

    def test_nonnull_exceeds_p(self):
        """m larger than p is rejected."""
        with pytest.raises(ConfigError, match="Invalid configuration"):
            build_config({"experiment": {"p": 4}, "coefficients": {"num_nonnull": 6}})

    def test_invalid_format(self):
        """Unknown report formats are rejected."""
        with pytest.raises(ConfigError, match="Invalid report format"):
            build_config({"settings": {"formats": ["csv", "xlsx"]}})

    def test_workers_bounds(self):
        """Worker count must be at least 1."""
        with pytest.raises(ConfigError):
            build_config({"settings": {"workers": 0}})


class TestLoadConfig:
    """Tests for load_config function."""

    def test_loads_valid_config(self, tmp_path):
        """Loads valid configuration file."""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("""
experiment:
  n: 300
  p: 12
  tag: small
coefficients:
  num_nonnull: 4
drp:
  alpha: 0.3
settings:
  workers: 2
  formats: [csv, json]
""")
        config = load_config(config_file)

        assert config.spec.n == 300
        assert config.spec.tag == "small"
        assert config.spec.drp.alpha == 0.3
        assert config.settings.workers == 2
        assert config.settings.formats == ["csv", "json"]

    def test_env_vars_in_file(self, tmp_path, monkeypatch):
        """Environment references are substituted before validation."""
        monkeypatch.setenv("KNOCKOFF_OUT", "/tmp/knockoffs")
        monkeypatch.delenv("KNOCKOFF_SEED", raising=False)
        config_file = tmp_path / "config.yaml"
        config_file.write_text("""
experiment:
  base_seed: ${KNOCKOFF_SEED:-11}
settings:
  output_dir: ${KNOCKOFF_OUT}
""")
        config = load_config(config_file)

        assert config.spec.base_seed == 11
        assert config.settings.output_dir == "/tmp/knockoffs"

    def test_none_path_uses_defaults(self):
        """No file means defaults plus overrides."""
        config = load_config(None, ["experiment.num_repeats=2"])
        assert config.spec.num_repeats == 2

    def test_file_not_found(self, tmp_path):
        """Error when file doesn't exist."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nonexistent.yaml")

    def test_path_is_directory(self, tmp_path):
        """Error when path is a directory."""
        with pytest.raises(ConfigError, match="not a file"):
            load_config(tmp_path)

    def test_invalid_yaml(self, tmp_path):
        """Error on invalid YAML syntax."""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("train: [unclosed")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            load_config(config_file)

    def test_empty_file(self, tmp_path):
        """Error on empty file."""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("")
        with pytest.raises(ConfigError, match="empty"):
            load_config(config_file)

    def test_non_mapping_root(self, tmp_path):
        """Error when the root is a list."""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="YAML mapping"):
            load_config(config_file)

    def test_error_names_file(self, tmp_path):
        """Validation errors mention the file path."""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("train:\n  epochs: -1\n")
        with pytest.raises(ConfigError, match="config.yaml"):
            load_config(config_file)


class TestShippedConfigs:
    """The configs/ directory validates."""

    CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

    def test_desk(self, monkeypatch):
        """The desk config expands the dataset tag."""
        monkeypatch.delenv("KNOCKOFF_REPEATS", raising=False)
        monkeypatch.setenv("KNOCKOFF_WORKERS", "3")
        config = load_config(self.CONFIG_DIR / "desk.yaml")

        assert config.spec.dataset.kind == "mixture"
        assert config.spec.dataset.mixture.weights == (0.4, 0.2, 0.4)
        assert config.spec.num_repeats == 30
        assert config.settings.workers == 3

    def test_full(self):
        """The full-size config selects the full-size net."""
        config = load_config(self.CONFIG_DIR / "full-mg.yaml")
        assert config.spec.net_config() == NET_PRESETS["full"]
        assert config.spec.p == 100
