from dotenv import load_dotenv

load_dotenv()

import argparse
import sys
from pathlib import Path

from pydantic import ValidationError

from patchscale.config.state import State
from patchscale.core.errors import DataError, NumericalError, PipelineStageError
from patchscale.core.pipeline import Pipeline
from patchscale.enums.enums import (
    ActivityMode,
    ActivityYears,
    CIMethod,
    SignificanceMode,
    Stage,
    TStatisticForm,
)
from patchscale.schema.run_config import RunConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; usage errors exit 1 here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _choices(enum):
    return [member.value for member in enum]


def _common_parser() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="RunConfig JSON; explicit flags override it")
    common.add_argument("--output-dir", type=Path, help="Artifact directory (default: out)")
    common.add_argument("--seed", type=int, help="Top-level seed for every random stage")
    common.add_argument("--jobs", type=int, help="Worker processes for per-series work")
    common.add_argument("--log-level", help="loguru level, e.g. DEBUG")

    data = common.add_argument_group("market data")
    data.add_argument("--tape", type=Path, help="Trade-CSV input")
    data.add_argument("--synth", help="Synth preset name (paper-like, small) or SynthConfig JSON")
    data.add_argument("--min-trades-per-year", type=int)
    data.add_argument("--min-active-days", type=int)
    data.add_argument("--activity-mode", choices=_choices(ActivityMode))
    data.add_argument("--activity-years", choices=_choices(ActivityYears))
    data.add_argument(
        "--filter-synthetic",
        action="store_true",
        default=None,
        help="Apply the activity filter to synthetic tapes too",
    )

    seg = common.add_argument_group("segmentation")
    seg.add_argument("--threshold", type=float, help="Significance threshold in (0, 1)")
    seg.add_argument("--significance-mode", choices=_choices(SignificanceMode))
    seg.add_argument("--t-form", choices=_choices(TStatisticForm))
    seg.add_argument("--mc-trials", type=int)

    patches = common.add_argument_group("patches")
    patches.add_argument("--theta", type=float, help="Directional share in (0.5, 1]")
    patches.add_argument("--min-patch-trades", type=int)

    estimators = common.add_argument_group("estimators")
    estimators.add_argument("--k", dest="k_policy", help="auto | fraction:<f> | fixed:<k>")
    estimators.add_argument("--ci-method", choices=_choices(CIMethod))
    estimators.add_argument("--bootstrap-samples", type=int)
    estimators.add_argument("--min-firm-patches", type=int)
    estimators.add_argument(
        "--no-plots", dest="plots", action="store_false", default=None, help="Skip plot data"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="patchscale",
        description=(
            "Detect directional trading patches in per-firm signed traded-value series "
            "and measure their tail exponents, allometric relations and lognormality."
        ),
    )
    common = _common_parser()
    commands = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "synth": "generate a synthetic tape and its ground truth",
        "ingest": "parse a tape and apply the firm activity filter",
        "segment": "segment every series and export patches",
        "analyze": "fit tails, allometry and lognormality per stock",
        "report": "assemble the report, summary table and plot data",
        "all": "run every stage in order",
    }
    for name, text in help_text.items():
        commands.add_parser(name, parents=[common], help=text)
    return parser


CONFIG_FIELDS = (
    "output_dir",
    "seed",
    "jobs",
    "tape",
    "synth",
    "min_trades_per_year",
    "min_active_days",
    "activity_mode",
    "activity_years",
    "filter_synthetic",
    "threshold",
    "significance_mode",
    "t_form",
    "mc_trials",
    "theta",
    "min_patch_trades",
    "k_policy",
    "ci_method",
    "bootstrap_samples",
    "min_firm_patches",
    "plots",
)


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    settings = State.get_settings()
    defaults = {"seed": settings.seed, "jobs": settings.jobs, "mc_trials": settings.mc_trials}
    overrides = {name: getattr(args, name, None) for name in CONFIG_FIELDS}
    return RunConfig.from_sources(args.config, defaults, **overrides)


def _exit_code(error: BaseException) -> int:
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    state = State()
    if args.log_level:
        state.set_log_level(args.log_level)

    try:
        config = run_config_from_args(args)
    except (ValidationError, ValueError, OSError) as e:
        print(f"patchscale: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "synth" and config.synth is None:
        parser.error("synth needs --synth <preset|config.json>")
    if args.command == "all" and config.tape is None and config.synth is None:
        parser.error("all needs --tape or --synth")

    try:
        if args.command == "all":
            Pipeline(config).run()
        else:
            Pipeline(config).run_stage(Stage(args.command))
    except PipelineStageError as e:
        print(f"patchscale: {e}", file=sys.stderr)
        return _exit_code(e.cause)
    except DataError as e:
        print(f"patchscale: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
