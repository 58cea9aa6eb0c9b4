from __future__ import annotations

import argparse
import logging
from typing import Any, Sequence

from cfsurv.config import deep_update, load_config
from cfsurv.errors import CfsurvError
from cfsurv.logging_utils import configure_logging
from cfsurv.pipeline import COMMANDS, EXIT_INPUT, LINKS, RunConfig, run

logger = logging.getLogger(__name__)


DEFAULT_CONFIG = "configs/default.yml"


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _name_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Control-function survival estimation under dependent censoring",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def _add_common_arguments(subparser: argparse.ArgumentParser) -> None:
        subparser.add_argument(
            "--config",
            action="append",
            dest="config_overrides",
            default=[],
            help=(
                f"Configuration override YAML applied on top of {DEFAULT_CONFIG}. "
                "Can be supplied multiple times."
            ),
        )
        subparser.add_argument("--base-config", default=DEFAULT_CONFIG, help="Base configuration file.")
        subparser.add_argument("--output", help="Output file path.")
        subparser.add_argument("--format", choices=("json", "csv"), help="Output format.")
        subparser.add_argument("--seed", type=int, help="Random seed (echoed in every output).")
        subparser.add_argument("--threads", type=int, help="Worker processes for bootstrap/replication loops.")

    def _add_data_arguments(subparser: argparse.ArgumentParser) -> None:
        subparser.add_argument("--input", required=True, help="CSV file with a header row.")
        subparser.add_argument(
            "--already-log",
            action="store_true",
            default=None,
            help="The time column already holds log-times.",
        )
        subparser.add_argument("--y", help="Follow-up time column.")
        subparser.add_argument("--delta", help="Event indicator column for T.")
        subparser.add_argument("--xi", help="Event indicator column for C.")
        subparser.add_argument("--admin", help="Administrative censoring indicator column (optional).")
        subparser.add_argument("--z", help="Endogenous covariate column.")
        subparser.add_argument("--instrument", help="Instrument column.")
        subparser.add_argument("--covariates", type=_name_list, help="Comma-separated exogenous covariates.")

    def _add_model_arguments(subparser: argparse.ArgumentParser) -> None:
        subparser.add_argument("--variant", choices=("two-step", "naive", "independent", "oracle"))
        subparser.add_argument("--link", choices=sorted(LINKS), help="First-stage model.")
        subparser.add_argument(
            "--theta-fixed",
            type=_float_list,
            help="Hold the transformation exponents fixed, e.g. 1,1.",
        )

    fit_parser = subparsers.add_parser("fit", help="Fit the model to a CSV data set")
    _add_common_arguments(fit_parser)
    _add_data_arguments(fit_parser)
    _add_model_arguments(fit_parser)

    gof_parser = subparsers.add_parser("gof", help="Bootstrap goodness-of-fit test")
    _add_common_arguments(gof_parser)
    _add_data_arguments(gof_parser)
    _add_model_arguments(gof_parser)
    gof_parser.add_argument("--B", type=int, dest="B", help="Bootstrap replicates.")

    sim_parser = subparsers.add_parser("simulate", help="Write one simulated data set")
    _add_common_arguments(sim_parser)
    sim_parser.add_argument("--scenario", help="Simulation design.")
    sim_parser.add_argument("--n", type=int, help="Sample size.")

    rep_parser = subparsers.add_parser("replicate", help="Monte-Carlo replication study")
    _add_common_arguments(rep_parser)
    _add_model_arguments(rep_parser)
    rep_parser.add_argument("--scenario", help="Simulation design.")
    rep_parser.add_argument("--n", type=int, help="Sample size.")
    rep_parser.add_argument("--N", type=int, dest="N", help="Number of replications.")
    rep_parser.add_argument("--times", type=_float_list, help="CIF time grid (competing-risks design).")

    cif_parser = subparsers.add_parser("cif", help="Cumulative incidence curves from a competing-risks fit")
    _add_common_arguments(cif_parser)
    _add_data_arguments(cif_parser)
    _add_model_arguments(cif_parser)
    cif_parser.add_argument("--cause", help="Cause label column (0 = administratively censored).")
    cif_parser.add_argument("--r", type=int, help="Number of latent times.")
    cif_parser.add_argument("--k", type=int, help="Number of competing risks of interest.")
    cif_parser.add_argument("--times", type=_float_list, help="Time grid (log scale).")

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Translate supplied command-line flags into a nested config mapping."""

    values = vars(args)
    out: dict[str, Any] = {}

    def put(path: Sequence[str], value: Any) -> None:
        if value is None:
            return
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    put(("io", "input"), values.get("input"))
    put(("io", "already_log"), values.get("already_log"))
    put(("output", "path"), values.get("output"))
    put(("output", "format"), values.get("format"))
    put(("seed",), values.get("seed"))
    put(("threads",), values.get("threads"))
    for column in ("y", "delta", "xi", "admin", "z", "instrument", "covariates", "cause"):
        put(("columns", column), values.get(column))
    put(("fit", "variant"), values.get("variant"))
    if args.command == "replicate" and values.get("variant"):
        put(("fit", "variants"), [values["variant"]])
    if values.get("link"):
        # for replicate the link replaces each design's default fitting link
        target = ("simulation", "fit_link") if args.command == "replicate" else ("first_stage", "kind")
        put(target, LINKS[values["link"]].value)
    if values.get("theta_fixed") is not None:
        put(("fit", "theta_mode"), "fixed")
        put(("fit", "theta_fixed"), values["theta_fixed"])
    put(("gof", "B"), values.get("B"))
    put(("simulation", "scenario"), values.get("scenario"))
    put(("simulation", "n"), values.get("n"))
    put(("simulation", "N"), values.get("N"))
    put(("cif", "times"), values.get("times"))
    put(("cif", "r"), values.get("r"))
    put(("cif", "k"), values.get("k"))
    return out


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command not in COMMANDS:
        raise ValueError(f"Unsupported command: {args.command}")

    try:
        config = load_config([args.base_config, *args.config_overrides])
    except FileNotFoundError as exc:
        configure_logging(None)
        logger.error("%s", exc)
        return EXIT_INPUT
    config = deep_update(config, _overrides(args))
    configure_logging(config.get("logging"))

    try:
        run_config = RunConfig.from_mapping(config, args.command)
    except (CfsurvError, ValueError, TypeError) as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_INPUT

    status = run(run_config)
    if status == 0:
        logger.info("%s complete; output written to %s", args.command, run_config.output)
    return status


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
