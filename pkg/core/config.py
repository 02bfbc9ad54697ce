"""Configuration loading for experiment files."""

import copy
import os
import re
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, ValidationError

from .errors import KnockoffLabError
from .models import MIXTURE_WEIGHT_PRESETS, REPORT_FORMATS, ExperimentSpec

# Sections accepted at the top level of a configuration file
SECTIONS = {
    "dataset",
    "coefficients",
    "response",
    "train",
    "net",
    "drp",
    "selection",
    "experiment",
    "ablation",
    "settings",
}


class ConfigSettings(BaseModel):
    """Run settings that do not change trial results."""

    workers: int = Field(1, ge=1, le=256, description="Concurrent trials")
    output_dir: str = Field("./results", description="Directory for reports and artifacts")
    save_results: bool = Field(True, description="Whether to write report files")
    formats: list[str] = Field(
        default_factory=lambda: list(REPORT_FORMATS), description="Report formats to emit"
    )


class ExperimentConfigFile(BaseModel):
    """Complete experiment configuration file structure."""

    spec: ExperimentSpec = Field(default_factory=ExperimentSpec)
    settings: ConfigSettings = Field(default_factory=ConfigSettings)


class ConfigError(KnockoffLabError):
    """Error loading or validating configuration."""


def _substitute_env_vars(value: str) -> str:
    """Substitute environment variables in a string.

    Supports ${VAR} and ${VAR:-default} syntax.

    Args:
        value: String potentially containing env var references

    Returns:
        String with env vars substituted
    """
    pattern = r"\$\{([A-Z_][A-Z0-9_]*)(?::-([^}]*))?\}"

    def replacer(match: re.Match) -> str:
        var_name = match.group(1)
        default = match.group(2)
        env_value = os.environ.get(var_name)

        if env_value is not None:
            return env_value
        if default is not None:
            return default
        return match.group(0)

    return re.sub(pattern, replacer, value)


def _coerce_scalar(value: str) -> Any:
    """Re-read a fully substituted string as a YAML scalar ("5" -> 5)."""
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError:
        return value
    return parsed if isinstance(parsed, (int, float, bool)) or parsed is None else value


def _substitute_env_vars_recursive(obj):
    """Recursively substitute env vars in a data structure."""
    if isinstance(obj, str):
        substituted = _substitute_env_vars(obj)
        return _coerce_scalar(substituted) if substituted != obj else substituted
    elif isinstance(obj, dict):
        return {k: _substitute_env_vars_recursive(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [_substitute_env_vars_recursive(item) for item in obj]
    else:
        return obj


# =============================================================================
# Overrides
# =============================================================================


def parse_override(item: str) -> tuple[list[str], Any]:
    """Split 'section.key=value' into a key path and a YAML-parsed value."""
    if "=" not in item:
        raise ConfigError(f"Invalid override '{item}'", ["Expected section.key=value"])
    key, raw = item.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(f"Invalid override '{item}'", ["Empty key"])
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid override value in '{item}'", [str(e)])
    return path, value


def apply_overrides(data: dict, overrides: list[str] | None) -> dict:
    """Apply 'section.key=value' overrides to a raw configuration mapping."""
    for item in overrides or []:
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[path[-1]] = value
    return data


# =============================================================================
# Assembly
# =============================================================================


def _dataset_payload(dataset: dict) -> dict:
    """Expand `tag` and `mixture.preset` shortcuts of the dataset section."""
    from .datagen import dataset_from_tag

    dataset = dict(dataset)
    payload: dict = {}
    tag = dataset.pop("tag", None)
    if tag is not None:
        try:
            payload = dataset_from_tag(str(tag)).model_dump()
        except ValueError as e:
            raise ConfigError("Invalid dataset tag", [f"dataset.tag: {e}"])
    for key, value in dataset.items():
        if isinstance(value, dict) and isinstance(payload.get(key), dict):
            payload[key] = {**payload[key], **value}
        else:
            payload[key] = value

    mixture = payload.get("mixture")
    if isinstance(mixture, dict) and "preset" in mixture:
        mixture = dict(mixture)
        preset = mixture.pop("preset")
        if preset not in MIXTURE_WEIGHT_PRESETS:
            valid = ", ".join(MIXTURE_WEIGHT_PRESETS)
            raise ConfigError(
                "Invalid mixture preset",
                [f"dataset.mixture.preset: unknown preset '{preset}'", f"Valid presets: {valid}"],
            )
        mixture["weights"] = list(MIXTURE_WEIGHT_PRESETS[preset])
        payload["mixture"] = mixture
    return payload


def _spec_payload(data: dict) -> dict:
    payload = dict(data.get("experiment") or {})
    for section in ("coefficients", "response", "train", "drp", "selection", "ablation"):
        if section in data and data[section] is not None:
            payload[section] = data[section]
    if data.get("dataset"):
        payload["dataset"] = _dataset_payload(data["dataset"])
    if data.get("net"):
        payload["net"] = data["net"]
        payload.setdefault("net_preset", "custom")
    return payload


def _validation_details(error: ValidationError) -> list[str]:
    details = []
    for item in error.errors():
        loc = ".".join(str(x) for x in item["loc"])
        details.append(f"{loc}: {item['msg']}")
    return details


def build_config(
    data: dict | None = None, overrides: list[str] | None = None
) -> ExperimentConfigFile:
    """Validate a raw configuration mapping (plus overrides) into a config object.

    Raises:
        ConfigError: Unknown sections or validation failures
    """
    data = apply_overrides(copy.deepcopy(data or {}), overrides)
    unknown = sorted(set(data) - SECTIONS)
    if unknown:
        raise ConfigError(
            "Unknown configuration sections",
            [f"{name}: not one of {', '.join(sorted(SECTIONS))}" for name in unknown],
        )

    try:
        spec = ExperimentSpec.model_validate(_spec_payload(data))
        settings = ConfigSettings.model_validate(data.get("settings") or {})
    except ValidationError as e:
        raise ConfigError("Invalid configuration", _validation_details(e))

    bad_formats = [f for f in settings.formats if f not in REPORT_FORMATS]
    if bad_formats:
        raise ConfigError(
            "Invalid report format",
            [f"settings.formats: unknown format '{f}'" for f in bad_formats]
            + [f"Valid formats: {', '.join(sorted(REPORT_FORMATS))}"],
        )
    return ExperimentConfigFile(spec=spec, settings=settings)


def read_config_data(path: Path) -> dict:
    """Read and env-substitute a YAML configuration file.

    Raises:
        ConfigError: If the file cannot be read or is not a mapping
    """
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")

    if not path.is_file():
        raise ConfigError(f"Path is not a file: {path}")

    try:
        with open(path, "r") as f:
            raw_data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML syntax in {path}", [str(e)])

    if raw_data is None:
        raise ConfigError(f"Configuration file is empty: {path}")

    if not isinstance(raw_data, dict):
        raise ConfigError(
            f"Configuration must be a YAML mapping, got {type(raw_data).__name__}"
        )

    return _substitute_env_vars_recursive(raw_data)


def load_config(path: Path | None, overrides: list[str] | None = None) -> ExperimentConfigFile:
    """Load and validate an experiment configuration file.

    Args:
        path: Path to the YAML configuration file, or None for defaults
        overrides: 'section.key=value' strings applied after loading

    Returns:
        Validated ExperimentConfigFile

    Raises:
        ConfigError: If file cannot be loaded or validation fails
    """
    data = read_config_data(path) if path is not None else {}
    try:
        return build_config(data, overrides)
    except ConfigError as e:
        if path is None:
            raise
        raise ConfigError(f"{e.message} in {path}", e.details)
