from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest
import yaml

import main
from cfsurv.config import deep_update, load_config
from cfsurv.errors import ValidationError
from cfsurv.firststage import FirstStageKind
from cfsurv.pipeline import EXIT_INPUT, EXIT_OK, ColumnMap, RunConfig, read_metadata
from cfsurv.simkit import DEFAULT_ADMIN_MAX, DgpSpec, generate

BASE_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.yml"


@pytest.fixture
def override(tmp_path: Path) -> Path:
    path = tmp_path / "override.yml"
    path.write_text(
        yaml.safe_dump(
            {
                "logging": {"file": None},
                "output": {"directory": str(tmp_path / "outputs")},
                "fit": {"n_starts": 1},
            }
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="module")
def simulated_csv(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "baseline.csv"
    generate(DgpSpec(n=600, seed=17)).to_frame(include_truth=True).to_csv(path, index=False)
    return path


def _cli(override: Path, *args: str) -> int:
    return main.main([args[0], "--base-config", str(BASE_CONFIG), "--config", str(override), *args[1:]])


def _read_metadata(path: Path) -> dict:
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
    assert first.startswith("# ")
    return json.loads(first[2:])


def test_default_config_resolves_every_command() -> None:
    config = load_config([BASE_CONFIG])
    for command in ("simulate", "replicate"):
        run_config = RunConfig.from_mapping(config, command)
        assert run_config.seed == 20240611
        assert run_config.simulation.seed == 20240611
    assert RunConfig.from_mapping(config, "simulate").output == Path("outputs/simulate.csv")
    assert RunConfig.from_mapping(config, "replicate").output == Path("outputs/replicate.json")
    with pytest.raises(ValidationError):
        RunConfig.from_mapping(config, "fit")


def test_run_config_rejects_bad_settings() -> None:
    config = load_config([BASE_CONFIG])
    config["output"]["format"] = "parquet"
    with pytest.raises(ValidationError):
        RunConfig.from_mapping(config, "simulate")
    config = load_config([BASE_CONFIG])
    config["columns"]["weight"] = "w"
    with pytest.raises(ValidationError):
        RunConfig.from_mapping(config, "simulate")


def test_column_map_normalises_names() -> None:
    columns = ColumnMap.from_mapping({"y": "Follow Up", "covariates": ["Age ", "X 2"], "admin": "Admin"})
    assert columns.y == "follow_up"
    assert columns.covariates == ("age", "x_2")
    assert columns.required(competing=False)[-1] == "admin"
    assert ColumnMap(cause="cause").required(competing=True)[-1] == "cause"


def test_simulate_writes_csv_with_metadata(tmp_path: Path, override: Path) -> None:
    output = tmp_path / "sim.csv"
    status = _cli(override, "simulate", "--output", str(output), "--n", "200", "--seed", "5")
    assert status == EXIT_OK
    assert _read_metadata(output)["seed"] == 5
    frame = pd.read_csv(output, comment="#")
    assert len(frame) == 200
    assert {"y", "delta", "xi", "x1", "w_tilde", "z", "true_v"} <= set(frame.columns)


def test_default_config_calibrates_and_keeps_design_links() -> None:
    config = load_config([BASE_CONFIG])
    run_config = RunConfig.from_mapping(config, "replicate")
    assert run_config.calibrate
    assert run_config.fit_link is None


def test_replicate_link_flag_reaches_the_simulation() -> None:
    args = main._build_parser().parse_args(["replicate", "--link", "probit"])
    overrides = main._overrides(args)
    assert overrides["simulation"]["fit_link"] == FirstStageKind.BINARY_PROBIT.value
    assert "first_stage" not in overrides
    config = deep_update(load_config([BASE_CONFIG]), overrides)
    assert RunConfig.from_mapping(config, "replicate").fit_link.kind is FirstStageKind.BINARY_PROBIT

    fit_args = main._build_parser().parse_args(["fit", "--input", "data.csv", "--link", "probit"])
    assert main._overrides(fit_args)["first_stage"]["kind"] == FirstStageKind.BINARY_PROBIT.value


def test_read_metadata_of_a_plain_csv(simulated_csv: Path) -> None:
    assert read_metadata(simulated_csv) == {}


def test_simulated_csv_fits_without_the_log_flag(tmp_path: Path, override: Path) -> None:
    data_path = tmp_path / "sim.csv"
    assert _cli(override, "simulate", "--output", str(data_path), "--n", "600", "--seed", "9") == EXIT_OK
    metadata = read_metadata(data_path)
    assert metadata["time_scale"] == "log"
    assert metadata["design"]["scenario"] == "baseline"
    assert metadata["design"]["admin_max"] != DEFAULT_ADMIN_MAX
    assert len(metadata["design"]["truth"]["beta_c"]) == 2

    frame = pd.read_csv(data_path, comment="#")
    shares = frame[["delta", "xi"]].mean()
    assert shares["delta"] == pytest.approx(0.4, abs=0.08)
    assert shares["xi"] == pytest.approx(0.4, abs=0.08)

    output = tmp_path / "fit.json"
    status = _cli(override, "fit", "--input", str(data_path), "--output", str(output), "--theta-fixed", "1,0.5")
    assert status == EXIT_OK
    document = json.loads(output.read_text(encoding="utf-8"))
    assert sum(document["event_counts"].values()) == 600


def test_fit_writes_json(tmp_path: Path, override: Path, simulated_csv: Path) -> None:
    output = tmp_path / "fit.json"
    status = _cli(
        override, "fit", "--input", str(simulated_csv), "--already-log", "--output", str(output),
        "--theta-fixed", "1,0.5", "--seed", "3",
    )
    assert status == EXIT_OK
    document = json.loads(output.read_text(encoding="utf-8"))
    assert document["command"] == "fit"
    assert document["seed"] == 3
    assert document["fit"]["variant"] == "two-step"
    assert document["fit"]["estimates"]["theta2"] == 0.5
    assert sum(document["event_counts"].values()) == 600


def test_fit_writes_csv_table(tmp_path: Path, override: Path, simulated_csv: Path) -> None:
    output = tmp_path / "fit.csv"
    status = _cli(
        override, "fit", "--input", str(simulated_csv), "--already-log", "--output", str(output),
        "--format", "csv", "--variant", "naive", "--theta-fixed", "1,1",
    )
    assert status == EXIT_OK
    table = pd.read_csv(output, comment="#")
    assert {"parameter", "estimate", "se", "p_value"} <= set(table.columns)
    assert "lambda_T" not in set(table["parameter"])


def test_input_errors_map_to_exit_code_two(tmp_path: Path, override: Path, simulated_csv: Path) -> None:
    missing = tmp_path / "nope.csv"
    assert _cli(override, "fit", "--input", str(missing)) == EXIT_INPUT

    broken = tmp_path / "broken.csv"
    pd.read_csv(simulated_csv).drop(columns="xi").to_csv(broken, index=False)
    assert _cli(override, "fit", "--input", str(broken), "--already-log") == EXIT_INPUT

    # log-times include negative values, which are not valid raw times
    frame = pd.read_csv(simulated_csv)
    if (frame["y"] <= 0).any():
        assert _cli(override, "fit", "--input", str(simulated_csv)) == EXIT_INPUT

    assert main.main(["simulate", "--base-config", str(tmp_path / "absent.yml")]) == EXIT_INPUT


def test_gof_rejects_small_bootstrap(tmp_path: Path, override: Path, simulated_csv: Path) -> None:
    status = _cli(
        override, "gof", "--input", str(simulated_csv), "--already-log", "--B", "20",
        "--theta-fixed", "1,0.5", "--output", str(tmp_path / "gof.json"),
    )
    assert status == EXIT_INPUT


@pytest.mark.slow
def test_cif_command_end_to_end(tmp_path: Path, override: Path) -> None:
    no_vcov = tmp_path / "no_vcov.yml"
    no_vcov.write_text(yaml.safe_dump({"fit": {"compute_vcov": False}}), encoding="utf-8")
    data_path = tmp_path / "cmprsk.csv"
    generate(DgpSpec(scenario="cmprsk-r3", n=800, seed=2)).to_frame().to_csv(data_path, index=False)
    output = tmp_path / "cif.csv"
    status = _cli(
        override, "cif", "--config", str(no_vcov), "--input", str(data_path), "--already-log",
        "--cause", "cause", "--r", "3", "--k", "2", "--times", "1,2,3", "--output", str(output),
    )
    assert status == EXIT_OK
    curves = pd.read_csv(output, comment="#")
    assert set(curves["cause"]) == {1, 2}
    assert curves["cif"].between(0.0, 1.0).all()
    assert (tmp_path / "cif_fit.json").exists()


@pytest.mark.slow
def test_replicate_command_end_to_end(tmp_path: Path, override: Path) -> None:
    output = tmp_path / "rep.json"
    status = _cli(
        override, "replicate", "--n", "300", "--N", "2", "--variant", "two-step", "--output", str(output),
    )
    assert status == EXIT_OK
    document = json.loads(output.read_text(encoding="utf-8"))
    assert document["report"]["N"] == 2
    assert (tmp_path / "rep_table.csv").exists()
