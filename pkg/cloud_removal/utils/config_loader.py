"""TOML configuration files and command-line overrides

A config file has up to five sections mirroring the config models::

    [filter]
    lp_sigma = 4.0

    [extraction]
    gate_v = { center = 0.65, slope = 12.0 }

    [restore]
    alpha = 0.6

    [synth]
    seed = 3

    [prior]
    prompt = "remove cloud"

Overrides use ``section.key=value`` (nested keys allowed, e.g.
``extraction.gate_v.center=0.7``) with the value parsed as a TOML literal and
falling back to a plain string.
"""

import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

from pydantic import ValidationError

from cloud_removal.exceptions import ConfigError
from cloud_removal.schemas.config_schemas import PipelineConfig, PriorSpec, SynthConfig

logger = logging.getLogger(__name__)

SECTIONS = ("filter", "extraction", "restore", "synth", "prior")


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def parse_override(item: str) -> Dict[str, Any]:
    """Turn ``section.key=value`` into a nested dict"""
    key, sep, text = item.partition("=")
    parts = [p.strip() for p in key.split(".")]
    if not sep or len(parts) < 2 or not all(parts):
        raise ConfigError(f"Override must look like section.key=value, got '{item}'")
    if parts[0] not in SECTIONS:
        raise ConfigError(f"Unknown config section '{parts[0]}' in override '{item}'")

    nested: Dict[str, Any] = {parts[-1]: _parse_value(text.strip())}
    for part in reversed(parts[:-1]):
        nested = {part: nested}
    return nested


def load_raw_config(
    path: Optional[str | Path] = None, overrides: Sequence[str] = ()
) -> Dict[str, Any]:
    """Read a config file (optional) and apply overrides in order

    Args:
        path: TOML file
        overrides: ``section.key=value`` strings

    Returns:
        Nested dict keyed by section
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Cannot parse config file {path}: {e}") from e
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown config sections in {path}: {unknown}")
        for name, section in raw.items():
            if not isinstance(section, dict):
                raise ConfigError(f"Config entry '{name}' in {path} must be a [section]")
        logger.info(f"Loaded config from {path}")

    for item in overrides:
        raw = _merge(raw, parse_override(item))
    return raw


def _validate(model, payload: Mapping[str, Any], label: str):
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(f"Invalid {label} configuration: {e}") from e


def pipeline_config(raw: Mapping[str, Any], restore_flags: Optional[Mapping[str, Any]] = None):
    """PipelineConfig from the filter/extraction/restore sections, flags applied last"""
    payload = {name: raw.get(name, {}) for name in ("filter", "extraction", "restore")}
    if restore_flags:
        payload["restore"] = _merge(payload["restore"], restore_flags)
    return _validate(PipelineConfig, payload, "pipeline")


def synth_config(raw: Mapping[str, Any], flags: Optional[Mapping[str, Any]] = None) -> SynthConfig:
    return _validate(SynthConfig, _merge(raw.get("synth", {}), flags or {}), "synth")


def prior_spec(raw: Mapping[str, Any], channel: Mapping[str, Any]) -> PriorSpec:
    """PriorSpec from the [prior] section plus the channel chosen on the command line"""
    return _validate(PriorSpec, _merge(raw.get("prior", {}), channel), "prior")
