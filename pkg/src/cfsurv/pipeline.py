"""Command workflows behind the CLI: fit, gof, simulate, replicate and cif."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import pandas as pd

from common.data_ingestion import normalise_label, prepare_survival_frame

from .cmprsk import CmprskDataset, cif_curve, fit_cmprsk, nonparametric_cif
from .config import section
from .data import Dataset
from .errors import (
    ConvergenceError,
    DomainError,
    EstimationError,
    GofError,
    InferenceError,
    NumericError,
    ValidationError,
)
from .estimator import FitConfig, FitVariant, fit
from .firststage import FirstStageKind, FirstStageSpec, control_value
from .gof import DEFAULT_B, QUADRATURE_NODES, bootstrap_gof
from .simkit import DgpSpec, Scenario, calibrate_shares, generate, replicate, replicate_cif

LOGGER = logging.getLogger(__name__)

COMMANDS = ("fit", "gof", "simulate", "replicate", "cif")
FORMATS = ("json", "csv")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3
EXIT_INFERENCE = 4

LINKS = {
    "logit": FirstStageKind.BINARY_LOGIT,
    "probit": FirstStageKind.BINARY_PROBIT,
    "linear": FirstStageKind.CONTINUOUS_LINEAR,
    "one-sided": FirstStageKind.BINARY_ONE_SIDED_LOGIT,
}


@dataclass(frozen=True)
class ColumnMap:
    """CSV column names; ``covariates`` excludes the intercept."""

    y: str = "y"
    delta: str = "delta"
    xi: str = "xi"
    z: str = "z"
    instrument: str = "w_tilde"
    covariates: tuple[str, ...] = ("x1",)
    admin: Optional[str] = None
    cause: Optional[str] = None

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "ColumnMap":
        settings = dict(settings or {})
        unknown = set(settings) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"Unknown column settings: {sorted(unknown)}")
        if "covariates" in settings:
            settings["covariates"] = tuple(settings["covariates"] or ())
        normalised = {
            key: (tuple(normalise_label(c) for c in value) if key == "covariates" else normalise_label(value))
            for key, value in settings.items()
        }
        return cls(**normalised)

    def required(self, competing: bool) -> list[str]:
        base = [self.y, self.z, self.instrument, *self.covariates]
        if competing:
            return base + [self.cause]
        return base + [self.delta, self.xi] + ([self.admin] if self.admin else [])


@dataclass(frozen=True)
class CifSettings:
    times: tuple[float, ...] = ()
    grid: tuple[float, float, int] = (0.0, 6.0, 61)
    profile_x: tuple[float, ...] = (0.0,)
    profile_w_tilde: float = 1.0
    profile_z: float = 1.0
    r: int = 2
    k: int = 2
    theta_fixed: Optional[tuple[float, ...]] = None
    t_max: Optional[float] = None

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "CifSettings":
        settings = dict(settings or {})
        unknown = set(settings) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"Unknown cif settings: {sorted(unknown)}")
        for key in ("times", "grid", "profile_x", "theta_fixed"):
            if settings.get(key) is not None:
                settings[key] = tuple(settings[key])
        return cls(**settings)

    def time_grid(self) -> np.ndarray:
        if self.times:
            return np.asarray(sorted(self.times), dtype=float)
        start, stop, num = self.grid
        return np.linspace(float(start), float(stop), int(num))


@dataclass(frozen=True)
class RunConfig:
    command: str
    output: Path
    input: Optional[Path] = None
    fmt: str = "json"
    columns: ColumnMap = field(default_factory=ColumnMap)
    first_stage: FirstStageSpec = field(default_factory=FirstStageSpec)
    fit: FitConfig = field(default_factory=FitConfig)
    variants: tuple[FitVariant, ...] = (FitVariant.TWO_STEP, FitVariant.NAIVE, FitVariant.INDEPENDENT)
    B: int = DEFAULT_B
    levels: tuple[float, ...] = (0.05, 0.10)
    nodes: int = QUADRATURE_NODES
    simulation: DgpSpec = field(default_factory=DgpSpec)
    N: int = 100
    calibrate: bool = True
    fit_link: Optional[FirstStageSpec] = None
    cif: CifSettings = field(default_factory=CifSettings)
    already_log: bool = False
    seed: int = 0
    threads: int = 1
    resolved: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"Unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.fmt not in FORMATS:
            raise ValidationError(f"Unknown output format {self.fmt!r}; expected one of {FORMATS}")
        if self.command in ("fit", "gof") and self.input is None:
            raise ValidationError(f"{self.command} needs an input CSV")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")

    @classmethod
    def from_mapping(cls, config: Mapping[str, Any], command: str) -> "RunConfig":
        """Build the run settings from a resolved configuration dictionary."""

        io = section(config, "io")
        output = section(config, "output")
        gof = section(config, "gof")
        sim = section(config, "simulation")
        seed = int(config.get("seed", 0))
        fit_settings = section(config, "fit")
        variants = tuple(FitVariant(v) for v in fit_settings.pop("variants", [v.value for v in cls.variants]))

        sim_n_rep = int(sim.pop("N", 100))
        calibrate = bool(sim.pop("calibrate", True))
        fit_link = sim.pop("fit_link", None)
        sim.setdefault("seed", seed)

        out_dir = Path(output.get("directory", "outputs"))
        fmt = str(output.get("format", "json"))
        out_path = output.get("path") or out_dir / f"{command}.{'csv' if command == 'simulate' else fmt}"
        return cls(
            command=command,
            output=Path(out_path),
            input=Path(io["input"]) if io.get("input") else None,
            fmt=fmt,
            columns=ColumnMap.from_mapping(section(config, "columns")),
            first_stage=FirstStageSpec.from_mapping(section(config, "first_stage")),
            fit=FitConfig.from_mapping(fit_settings),
            variants=variants,
            B=int(gof.get("B", DEFAULT_B)),
            levels=tuple(float(level) for level in gof.get("levels", (0.05, 0.10))),
            nodes=int(gof.get("nodes", QUADRATURE_NODES)),
            simulation=DgpSpec.from_mapping(sim),
            N=sim_n_rep,
            calibrate=calibrate,
            fit_link=None if fit_link is None else FirstStageSpec(kind=fit_link),
            cif=CifSettings.from_mapping(section(config, "cif")),
            already_log=bool(io.get("already_log", False)),
            seed=seed,
            threads=int(config.get("threads", 1)),
            resolved=json.loads(json.dumps(dict(config), default=str)),
        )


# ----------------------------------------------------------------------------
# ingestion and output


def read_metadata(path: Path) -> dict:
    """Run metadata from the leading ``#`` line of a CSV written by this package, else ``{}``."""

    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline()
    if not first.startswith("# "):
        return {}
    try:
        metadata = json.loads(first[2:])
    except json.JSONDecodeError:
        return {}
    return metadata if isinstance(metadata, dict) else {}


def _read_frame(cfg: RunConfig, competing: bool) -> pd.DataFrame:
    if cfg.input is None or not cfg.input.exists():
        raise FileNotFoundError(f"Input file not found: {cfg.input}")
    LOGGER.info("Loading survival data from %s", cfg.input)
    already_log = cfg.already_log
    if not already_log and read_metadata(cfg.input).get("time_scale") == "log":
        LOGGER.info("%s records log-times in its header; skipping the log transform", cfg.input)
        already_log = True
    raw = pd.read_csv(cfg.input, comment="#")
    try:
        return prepare_survival_frame(
            raw,
            required_columns=cfg.columns.required(competing),
            time_column=cfg.columns.y,
            already_log=already_log,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def load_dataset(cfg: RunConfig) -> Dataset:
    """Read the input CSV into a ``Dataset`` (log-times unless ``already_log``)."""

    cols = cfg.columns
    frame = _read_frame(cfg, competing=False)
    data = Dataset.from_frame(
        frame,
        y=cols.y,
        delta=cols.delta,
        xi=cols.xi,
        z=cols.z,
        instrument=cols.instrument,
        covariates=cols.covariates,
    )
    if cols.admin:
        total = data.delta + data.xi + frame[cols.admin].to_numpy(dtype=int)
        if np.any(total != 1):
            raise ValidationError("delta + xi + admin must equal 1 on every row")
    if not data.has_admin_censoring:
        LOGGER.info("No administratively censored records; the admin factor drops out")
    LOGGER.info("Loaded %d records: %s", data.n, data.event_counts())
    return data


def load_cmprsk_dataset(cfg: RunConfig) -> CmprskDataset:
    cols = cfg.columns
    if cols.cause is None:
        return CmprskDataset.from_dataset(load_dataset(cfg))
    frame = _read_frame(cfg, competing=True)
    return CmprskDataset.from_frame(
        frame,
        r=cfg.cif.r,
        y=cols.y,
        cause=cols.cause,
        z=cols.z,
        instrument=cols.instrument,
        covariates=cols.covariates,
    )


def _metadata(cfg: RunConfig) -> dict:
    return {"command": cfg.command, "seed": cfg.seed, "config": cfg.resolved}


def write_json(payload: Mapping[str, Any], path: Path, cfg: RunConfig) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {**_metadata(cfg), **payload}
    with path.open("w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, default=_json_default)
    LOGGER.info("Wrote %s", path)
    return path


def write_csv(frame: pd.DataFrame, path: Path, cfg: RunConfig, extra: Optional[Mapping[str, Any]] = None) -> Path:
    """CSV with the run metadata (plus ``extra``) as a leading ``#`` comment line."""

    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {**_metadata(cfg), **(extra or {})}
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write("# " + json.dumps(metadata, default=_json_default) + "\n")
        frame.to_csv(handle, index=False)
    LOGGER.info("Wrote %d rows to %s", len(frame), path)
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return str(value)


def _sibling(path: Path, suffix: str, extension: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}.{extension}")


# ----------------------------------------------------------------------------
# commands


def run_fit(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    result = fit(data, cfg.first_stage, cfg.fit)
    payload = {"event_counts": data.event_counts(), "fit": result.to_dict()}
    if cfg.fmt == "csv":
        if result.vcov is not None:
            table = result.summary().reset_index()
        else:
            table = pd.DataFrame({"parameter": result.names, "estimate": result.estimates})
        write_csv(table, cfg.output, cfg)
    else:
        write_json(payload, cfg.output, cfg)
    if result.vcov is None and cfg.fit.compute_vcov:
        LOGGER.error("Estimates written, but standard errors are unavailable")
        return EXIT_INFERENCE
    return EXIT_OK


def run_gof(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    fitted = fit(data, cfg.first_stage, replace(cfg.fit, compute_vcov=False))
    result = bootstrap_gof(
        data, fitted, B=cfg.B, seed=cfg.seed, threads=cfg.threads, levels=cfg.levels, nodes=cfg.nodes
    )
    write_json({"fit": fitted.to_dict(), "gof": result.to_dict()}, cfg.output, cfg)
    boot = pd.DataFrame({"b": np.arange(result.B), "t_cm": result.boot_stats})
    write_csv(boot, _sibling(cfg.output, "bootstrap", "csv"), cfg)
    return EXIT_OK


def _simulation_spec(cfg: RunConfig) -> DgpSpec:
    spec = cfg.simulation
    if cfg.calibrate and spec.scenario is not Scenario.CMPRSK_R3 and spec.admin_max is not None:
        spec = calibrate_shares(spec)
    return spec


def _design(spec: DgpSpec) -> dict:
    truth = spec.cmprsk_truth if spec.scenario is Scenario.CMPRSK_R3 else spec.truth
    return {
        "scenario": spec.scenario.value,
        "admin_max": spec.admin_max,
        "truth": {item.name: getattr(truth, item.name) for item in fields(truth)},
    }


def run_simulate(cfg: RunConfig) -> int:
    spec = _simulation_spec(cfg)
    data = generate(spec)
    frame = data.to_frame(include_truth=True)
    write_csv(frame, cfg.output, cfg, extra={"time_scale": "log", "design": _design(spec)})
    return EXIT_OK


def run_replicate(cfg: RunConfig) -> int:
    spec = _simulation_spec(cfg)
    if spec.scenario is Scenario.CMPRSK_R3:
        report = replicate_cif(
            spec,
            cfg.N,
            cfg.cif.time_grid(),
            profile=((1.0, *cfg.cif.profile_x), cfg.cif.profile_w_tilde, cfg.cif.profile_z),
            cfg=replace(cfg.fit, compute_vcov=False),
            t_max=cfg.cif.t_max,
            threads=cfg.threads,
            first_stage=cfg.fit_link,
        )
        table = report.cif_table
    else:
        configs = [replace(cfg.fit, variant=variant) for variant in cfg.variants]
        report = replicate(spec, configs, cfg.N, threads=cfg.threads, first_stage=cfg.fit_link)
        table = report.table
    csv_path = cfg.output if cfg.fmt == "csv" else _sibling(cfg.output, "table", "csv")
    write_csv(table, csv_path, cfg)
    json_path = cfg.output if cfg.fmt == "json" else _sibling(cfg.output, "summary", "json")
    write_json({**_design(spec), "report": report.to_dict()}, json_path, cfg)
    return EXIT_OK


def run_cif(cfg: RunConfig) -> int:
    data = load_cmprsk_dataset(cfg)
    settings = cfg.cif
    result = fit_cmprsk(data, cfg.first_stage, cfg.fit, k=settings.k, theta_fixed=settings.theta_fixed)
    times = settings.time_grid()
    x = np.array([1.0, *settings.profile_x])
    if x.size != data.x.shape[1]:
        raise ValidationError(f"profile_x needs {data.x.shape[1] - 1} covariate values")
    w = np.append(x, settings.profile_w_tilde)
    v = 0.0
    if result.gamma_hat.size:
        v = control_value(cfg.first_stage, result.gamma_hat, w, settings.profile_z)
    labels = np.where(data.cause <= settings.k, data.cause, 0)
    aj = nonparametric_cif(data.y, labels)

    frames = []
    for cause in range(1, settings.k + 1):
        frames.append(
            pd.DataFrame(
                {
                    "time": times,
                    "cause": cause,
                    "cif": cif_curve(result.params_hat, cause, times, x, settings.profile_z, v),
                    "nonparametric": aj.evaluate(cause, times) if cause in aj.causes else 0.0,
                }
            )
        )
    write_csv(pd.concat(frames, ignore_index=True), cfg.output, cfg)
    write_json({"fit": result.to_dict(), "profile": {"x": x, "w_tilde": settings.profile_w_tilde,
                                                      "z": settings.profile_z, "v": v}},
               _sibling(cfg.output, "fit", "json"), cfg)
    return EXIT_OK


HANDLERS = {
    "fit": run_fit,
    "gof": run_gof,
    "simulate": run_simulate,
    "replicate": run_replicate,
    "cif": run_cif,
}


def run(config: RunConfig) -> int:
    """Execute one command and map failures onto exit codes."""

    LOGGER.info("Running %s (seed=%d, threads=%d)", config.command, config.seed, config.threads)
    try:
        return HANDLERS[config.command](config)
    except (ValidationError, DomainError, FileNotFoundError, KeyError) as exc:
        LOGGER.error("Input error: %s", exc)
        return EXIT_INPUT
    except (ConvergenceError, EstimationError, GofError) as exc:
        LOGGER.error("Estimation failed: %s", exc)
        return EXIT_CONVERGENCE
    except (InferenceError, NumericError) as exc:
        LOGGER.error("Inference failed: %s", exc)
        return EXIT_INFERENCE


__all__ = [
    "COMMANDS",
    "CifSettings",
    "ColumnMap",
    "EXIT_CONVERGENCE",
    "EXIT_INFERENCE",
    "EXIT_INPUT",
    "EXIT_OK",
    "LINKS",
    "RunConfig",
    "load_cmprsk_dataset",
    "load_dataset",
    "read_metadata",
    "run",
    "write_csv",
    "write_json",
]
