from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from cfsurv.config import deep_update, load_config, section


def _write(path: Path, payload: dict) -> Path:
    path.write_text(yaml.safe_dump(payload), encoding="utf-8")
    return path


def test_overrides_are_merged_in_order(tmp_path: Path) -> None:
    base = _write(tmp_path / "base.yml", {"fit": {"level": 0.95, "n_starts": 3}, "seed": 1})
    first = _write(tmp_path / "first.yml", {"fit": {"level": 0.9}})
    second = _write(tmp_path / "second.yml", {"fit": {"level": 0.8}, "seed": 7})
    config = load_config([base, first, second])
    assert config == {"fit": {"level": 0.8, "n_starts": 3}, "seed": 7}


def test_missing_files_raise(tmp_path: Path) -> None:
    base = _write(tmp_path / "base.yml", {"seed": 1})
    with pytest.raises(FileNotFoundError):
        load_config([tmp_path / "absent.yml"])
    with pytest.raises(FileNotFoundError):
        load_config([base, tmp_path / "absent.yml"])


def test_empty_yaml_is_an_empty_mapping(tmp_path: Path) -> None:
    empty = tmp_path / "empty.yml"
    empty.write_text("", encoding="utf-8")
    assert load_config([empty]) == {}


def test_deep_update_replaces_non_mappings() -> None:
    base = {"gof": {"levels": [0.05, 0.1], "B": 250}, "threads": 1}
    merged = deep_update(base, {"gof": {"levels": [0.01]}, "threads": {"n": 2}})
    assert merged["gof"] == {"levels": [0.01], "B": 250}
    assert merged["threads"] == {"n": 2}


def test_section_returns_a_copy() -> None:
    config = {"fit": {"level": 0.95}, "cif": None}
    fit = section(config, "fit")
    fit["level"] = 0.5
    assert config["fit"]["level"] == 0.95
    assert section(config, "cif") == {}
    assert section(config, "absent") == {}
    with pytest.raises(TypeError):
        section({"fit": [1, 2]}, "fit")
