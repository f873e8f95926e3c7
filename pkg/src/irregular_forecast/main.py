"""Command-line entry point."""

import argparse
import sys
import uuid
from pathlib import Path
from typing import Callable, Dict, List, Optional

import structlog
from pydantic import ValidationError

from irregular_forecast import __version__
from irregular_forecast.cli.commands import (
    CommandResult,
    cmd_extract,
    cmd_forecast,
    cmd_sweep,
    cmd_validate,
)
from irregular_forecast.models.pipeline import Variant
from irregular_forecast.models.run_config import (
    RunConfig,
    check_inputs,
    describe_validation_error,
    load_run_config,
)
from irregular_forecast.utils.exceptions import (
    AllCellsFailedError,
    ConfigurationError,
    DataError,
    ExternalFeatureError,
    InsufficientObservationsError,
    IrregularForecastError,
)
from irregular_forecast.utils.logging import bind_run_context, setup_logging

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_ALL_FAILED = 3

Command = Callable[..., CommandResult]

COMMANDS: Dict[str, Command] = {
    "extract": cmd_extract,
    "forecast": cmd_forecast,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irregular-forecast",
        description="Feature extraction and forecasting for irregular time series.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="INI run config")
    common.add_argument("--output", type=Path, help="override the command's output path")
    common.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    common.add_argument("--seed", type=int, help="seed for every stochastic component")
    common.add_argument(
        "--variant",
        choices=[variant.value for variant in Variant],
        help="design-matrix variant for extract and forecast",
    )
    common.add_argument(
        "--external-features", type=Path, help="external feature bundle CSV for the merged variant"
    )
    common.add_argument("--log-level", help="override IRREGULAR_FORECAST_LOG_LEVEL")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("extract", parents=[common], help="write the feature matrix")
    subparsers.add_parser("forecast", parents=[common], help="forecast the next bin per entity")
    subparsers.add_parser("sweep", parents=[common], help="evaluate a frequency grid")
    subparsers.add_parser("validate", parents=[common], help="summarize input timestamps")
    return parser


def _prepare_config(args: argparse.Namespace) -> RunConfig:
    if args.jobs is not None and args.jobs < 1:
        raise ConfigurationError(f"--jobs must be at least 1, got {args.jobs}", config_key="jobs")
    config = load_run_config(args.config)
    config = config.with_overrides(
        seed=args.seed,
        variant=Variant(args.variant) if args.variant else None,
        external_features=args.external_features,
    )
    check_inputs(config)
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    bind_run_context(args.command, uuid.uuid4().hex[:12])
    logger = structlog.get_logger(__name__)

    try:
        config = _prepare_config(args)
        logger.info("Run started", config=str(args.config), seed=config.seed)
        COMMANDS[args.command](config, output=args.output, jobs=args.jobs)
    except ValidationError as e:
        return _fail(EXIT_CONFIG, describe_validation_error(e))
    except ConfigurationError as e:
        return _fail(EXIT_CONFIG, e.message)
    except (DataError, InsufficientObservationsError, ExternalFeatureError) as e:
        return _fail(EXIT_DATA, e.message)
    except AllCellsFailedError as e:
        return _fail(EXIT_ALL_FAILED, e.message)
    except IrregularForecastError as e:
        logger.error("Run failed", error_code=e.error_code, details=e.details)
        return _fail(EXIT_DATA, e.message)

    logger.info("Run finished")
    return EXIT_OK


def _fail(code: int, message: str) -> int:
    print(f"error: {' '.join(message.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
