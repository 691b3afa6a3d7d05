""" Command line surface: one subcommand per analysis, all writing into one output directory.

Flags only override what they name. Everything else comes from `--config`,
then the `R2C_` environment, then RunConfig defaults.
"""
import argparse
import sys
from datetime import date

from r2connectedness import __version__, args_cache, logger
from r2connectedness.args_cache import RunConfig
from r2connectedness.tasks import COMMANDS, run_task

EXIT_OK = 0
EXIT_FAILURE = 2

# Parsed namespace keys that are not RunConfig fields.
_CONTROL_KEYS = ("command", "config", "verbosity")


def _iso_date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not an ISO date: {value!r}") from e


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", dest="verbosity", action="count",
                        help="Increase log output (-v info, -vv debug)")
    parser.add_argument("--config", help="TOML config file with RunConfig keys and a [systems] table")
    parser.add_argument("--output-dir", dest="output_dir", help="Directory for every output of the run")
    parser.add_argument("--threads", type=int, help="Maximum worker threads")
    parser.add_argument("--show", action="store_true", help="Print tables to the console")
    parser.add_argument("--raw", action="store_true", help="Write fractions instead of percent")
    return parser


def _input_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    group = parser.add_argument_group("input")
    group.add_argument("-i", "--input", help="CSV of daily prices, one date column and one column per series")
    group.add_argument("--date-column", dest="date_column")
    group.add_argument("--date-format", dest="date_format", help="strptime format; inferred when absent")
    group.add_argument("--series", nargs="+", help="Series to use, in this order")
    group.add_argument("--system", help="Named series group from the config file")
    group.add_argument("--missing-policy", dest="missing_policy", choices=["drop", "ffill"])
    group.add_argument("--max-gap", dest="max_gap", type=int)
    group.add_argument("--delimiter")
    return parser


def _engine_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    group = parser.add_argument_group("engine")
    group.add_argument("--engine", "--method", dest="engine", choices=["r2", "dy", "qvar"])
    group.add_argument("--corr-method", dest="corr_method", choices=["pearson", "spearman", "kendall"])
    group.add_argument("-p", "--lags", type=int, help="VAR lag order")
    group.add_argument("--p-max", dest="p_max", type=int)
    group.add_argument("--reselect-lag", dest="reselect_lag", action="store_true",
                       help="Select the lag order by BIC in every window")
    group.add_argument("--no-standardize", dest="standardize", action="store_false")
    group.add_argument("--horizon", type=int, help="Forecast horizon of the DY/QVAR engines")
    group.add_argument("--tau", type=float, help="Quantile of the QVAR engine")
    group.add_argument("--window", type=int, help="Rolling window in return observations")
    group.add_argument("--step", type=int, help="Rows between consecutive windows")
    group.add_argument("--static", action="store_true", help="Use the full sample instead of rolling windows")
    return parser


def _subsample_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    group = parser.add_argument_group("subsamples")
    group.add_argument("--breakpoints", nargs="+", type=_iso_date, help="First date of each later segment")
    group.add_argument("--segment-labels", dest="segment_labels", nargs="+")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common, inputs, engine, subsamples = _common_parser(), _input_parser(), _engine_parser(), _subsample_parser()
    parser = argparse.ArgumentParser(prog="r2connectedness", description="Spillover connectedness of price panels",
                                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("stats", parents=[common, inputs], help="Descriptive statistics, JB and ADF tests")

    corr = commands.add_parser("corr", parents=[common, inputs], help="Correlation matrix with blank insignificant cells")
    corr.add_argument("--corr-method", dest="corr_method", choices=["pearson", "spearman", "kendall"],
                      default=argparse.SUPPRESS)
    corr.add_argument("--mask-level", dest="mask_level", type=float, default=argparse.SUPPRESS)

    commands.add_parser("connect", parents=[common, inputs, engine], help="Connectedness table")
    commands.add_parser("rolling", parents=[common, inputs, engine], help="Rolling connectedness, long format")

    split = commands.add_parser("split", parents=[common, inputs, engine, subsamples],
                                help="Subsample panels and, with --tables, their averaged tables")
    split.add_argument("--tables", action="store_true", default=argparse.SUPPRESS)

    network = commands.add_parser("network", parents=[common, inputs, engine, subsamples],
                                  help="Net pairwise spillover networks")
    network.add_argument("--threshold", type=float, default=argparse.SUPPRESS)
    network.add_argument("--split", choices=["overall", "contemporaneous", "lagged", "all"],
                         default=argparse.SUPPRESS)
    network.add_argument("--format", dest="graph_format", choices=["json", "dot", "graphml"],
                         default=argparse.SUPPRESS)
    network.add_argument("--subsamples", action="store_true", default=argparse.SUPPRESS)

    simulate = commands.add_parser("simulate", parents=[common], help="Synthetic prices with planted spillovers")
    simulate.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    simulate.add_argument("--n-series", dest="n_series", type=int, default=argparse.SUPPRESS)
    simulate.add_argument("--n-obs", dest="n_obs", type=int, default=argparse.SUPPRESS)
    simulate.add_argument("--coupling", nargs="+", default=argparse.SUPPRESS,
                          help="Entries i:j:value, series i drives series j")
    simulate.add_argument("--persistence", type=float, default=argparse.SUPPRESS)
    simulate.add_argument("--noise-scale", dest="noise_scale", type=float, default=argparse.SUPPRESS)
    simulate.add_argument("--noise-corr", dest="noise_corr", type=float, default=argparse.SUPPRESS)
    simulate.add_argument("--series", nargs="+", default=argparse.SUPPRESS, help="Labels of the simulated series")

    robustness = commands.add_parser("robustness", parents=[common, inputs, engine],
                                     help="TCI of alternative engines and their correlations")
    robustness.add_argument("--alt-window", dest="alt_window", type=int, default=argparse.SUPPRESS)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {key: value for key, value in vars(args).items() if key not in _CONTROL_KEYS}
    return RunConfig.resolve(flags, getattr(args, "config", None), args_cache)


def execute(args: argparse.Namespace) -> int:
    """ Run a parsed command. Failures become one `error:` line on stderr and exit status 2. """
    if args.command not in COMMANDS:
        print(f"error: unknown command {args.command}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        config = resolve_config(args)
        logger.info(f"Running {args.command} into {config.output_dir}")
        run_task(args.command, config)
    except (ValueError, OSError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        message = " ".join(str(e).split()) or type(e).__name__
        print(f"error: {message}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def run(argv=None) -> int:
    """ Parse and execute without touching logging configuration. """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_FAILURE
    return execute(args)


def verbosity_of(args: argparse.Namespace) -> int:
    return min(getattr(args, "verbosity", None) or args_cache.verbosity, 2)
