from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path("configs/default.yml")


def _load_yaml(path: Path) -> dict:
    with path.open("r", encoding="utf-8") as handle:
        return yaml.safe_load(handle) or {}


def deep_update(base: dict, override: Mapping[str, Any]) -> dict:
    """Recursively merge ``override`` into ``base`` (in place) and return it."""

    for key, value in override.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, Mapping):
            base[key] = deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(config_paths: Iterable[str | Path] | None = None) -> dict:
    """Load the base configuration and apply optional YAML overrides in order.

    The first path is the base file (``configs/default.yml`` when none is
    given); every following path is deep-merged on top of it.
    """

    supplied_paths = [Path(p) for p in (config_paths or [])]

    if supplied_paths:
        base_path, extra_paths = supplied_paths[0], supplied_paths[1:]
    else:
        base_path, extra_paths = DEFAULT_CONFIG, []

    if not base_path.exists():
        raise FileNotFoundError(f"The base configuration file {base_path} was not found.")

    config = _load_yaml(base_path)

    for override_path in extra_paths:
        if not override_path.exists():
            raise FileNotFoundError(f"Config override not found: {override_path}")
        config = deep_update(config, _load_yaml(override_path))
        logger.info("Loaded configuration override from %s", override_path)

    return config


def section(config: Mapping[str, Any], name: str) -> dict:
    """Return a config section as a plain dict (empty when absent)."""

    value = config.get(name) or {}
    if not isinstance(value, Mapping):
        raise TypeError(f"Config section {name!r} must be a mapping, got {type(value).__name__}")
    return dict(value)
