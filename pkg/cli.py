#!/usr/bin/env python3
"""
Command-line interface for meanvar-eprocess.

Usage:
    uv run python main.py evalue --x 3 --mu 0 --sigma 1 --shape us
    uv run python main.py eprocess --input data.txt --mu 0 --sigma 1 --strategy egree
    uv run python main.py simulate --generator nl:0.5,2 --methods emixture egree --shapes plain symmetric
    uv run python main.py monitor --prices spg.csv --estimate-start 2001-01-01 \\
        --estimate-end 2006-12-31 --test-start 2007-01-01
    uv run python main.py combine --input pvalues.txt --method fisher

Exit codes: 0 success, 1 domain or data error, 2 usage error.
Results go to stdout (CSV by default, JSON with --format json); errors go to
stderr and never leave partial output behind.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from datetime import date
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from config import OUTPUT_FORMATS, get_settings
from eprocess import (
    DEFAULT_C,
    DEFAULT_CAP,
    DEFAULT_GRID,
    DEFAULT_THRESHOLDS,
    Agrapa,
    EGree,
    EMixture,
    Grapa,
    evidence_label,
    first_crossing,
    init_two_sided_pair,
    run_eprocess,
    update_two_sided_pair,
)
from evidence import Hypothesis, MeanVarSpec, OneSidedUpper, ShapeClass, TwoSided, evaluate
from monitor import (
    DEFAULT_DATE_COLUMN,
    DEFAULT_PRICE_COLUMN,
    NO_DETECTION,
    detect,
    estimate_null,
    load_prices,
    restrict,
    to_losses,
)
from pcombine import e_batch, fisher_combine, p_batch, simes_combine
from simharness import (
    RESULT_COLUMNS,
    DecisionRule,
    Method,
    SimConfig,
    parse_generator,
    result_row,
    run_avg_log_trajectory,
    run_rejection_experiment,
)

logger = logging.getLogger(__name__)

SHAPE_CHOICES = [s.value for s in ShapeClass]
STRATEGY_CHOICES = ["emixture", "egree", "grapa", "agrapa"]
COMBINE_METHODS = ["fisher", "simes", "ebatch", "pbatch"]
EPROCESS_COLUMNS = ("threshold", "crossing_index", "final_wealth", "max_wealth", "evidence")
MONITOR_COLUMNS = (
    "threshold",
    "crossing_day",
    "crossing_date",
    "mu_hat",
    "sigma_hat",
    "estimation_count",
    "evidence",
)


def format_number(value) -> str:
    """12 significant digits; None is the no-detection sentinel."""
    if value is None:
        return NO_DETECTION
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def _json_value(value):
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    number = float(format(float(value), ".12g"))
    # JSON has no infinity literal
    return number if math.isfinite(number) else format_number(number)


def render(rows: List[dict], columns: Sequence[str], output_format: str) -> str:
    """Serialize result rows as CSV or JSON text; both formats carry the same columns."""
    if output_format == "json":
        payload = {"rows": [{c: _json_value(row[c]) for c in columns} for row in rows]}
        return json.dumps(payload, indent=2)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row[c]) for c in columns])
    return buffer.getvalue().rstrip("\n")


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def threshold_value(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 1:
        raise argparse.ArgumentTypeError(f"thresholds must exceed 1, got {text}")
    return value


def alpha_value(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an ISO-8601 date, got {text!r}") from None


def _add_threshold_flags(parser: argparse.ArgumentParser, many: bool = True) -> None:
    group = parser.add_mutually_exclusive_group()
    if many:
        group.add_argument(
            "--thresholds",
            type=threshold_value,
            nargs="+",
            default=list(DEFAULT_THRESHOLDS),
            help="Rejection thresholds for the e-process (default: 2 5 10 20)",
        )
    else:
        group.add_argument(
            "--threshold",
            type=threshold_value,
            default=20.0,
            help="Rejection threshold 1/alpha (default: 20)",
        )
    group.add_argument("--alpha", type=alpha_value, help="Level alpha, translated to threshold 1/alpha")


def _add_strategy_flags(parser: argparse.ArgumentParser, choices: Sequence[str]) -> None:
    parser.add_argument("--strategy", choices=choices, default="egree", help="Betting strategy (default: egree)")
    parser.add_argument("--cap", type=float, default=DEFAULT_CAP, help=f"e-GREE bet cap (default: {DEFAULT_CAP})")
    parser.add_argument("--grid", type=float, nargs="+", help="e-mixture lambda grid (default: 0.01..0.20)")
    if "grapa" in choices:
        parser.add_argument("--c", type=float, default=DEFAULT_C, help=f"GRAPA clip constant (default: {DEFAULT_C})")
        parser.add_argument("--one-sided", action="store_true", help="Restrict GRAPA bets to be nonnegative")


def build_parser(settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meanvar",
        description="Anytime-valid tests of conditional mean and variance with e-values and e-processes",
    )
    parser.add_argument(
        "--format",
        choices=OUTPUT_FORMATS,
        default=settings.output_format,
        help=f"Output format (default: {settings.output_format})",
    )
    parser.add_argument("--seed", type=int, default=settings.seed, help=f"Master seed (default: {settings.seed})")
    parser.add_argument(
        "--jobs", type=positive_int, default=settings.jobs, help=f"Parallel workers (default: {settings.jobs})"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase log verbosity")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evalue", help="e-value and p-value of one observation")
    p.add_argument("--x", type=float, required=True, help="Observation")
    p.add_argument("--mu", type=float, help="Mean bound, not combinable with an interval (default: 0)")
    p.add_argument("--sigma", type=float, default=1.0, help="Standard deviation bound (default: 1)")
    p.add_argument("--shape", choices=SHAPE_CHOICES, default="plain", help="Shape class (default: plain)")
    p.add_argument("--mu-lower", type=float, help="Lower end of a two-sided mean interval")
    p.add_argument("--mu-upper", type=float, help="Upper end of a two-sided mean interval")

    p = sub.add_parser("eprocess", help="Run an e-process over a data file")
    p.add_argument("--input", type=Path, required=True, help="One observation per line, or a CSV with --column")
    p.add_argument("--column", help="CSV column holding the observations")
    p.add_argument("--mu", type=float, help="Mean bound, not combinable with an interval (default: 0)")
    p.add_argument("--sigma", type=float, default=1.0, help="Standard deviation bound (default: 1)")
    p.add_argument("--shape", choices=SHAPE_CHOICES, default="plain", help="Shape class (default: plain)")
    p.add_argument("--mu-lower", type=float, help="Lower end of a two-sided mean interval")
    p.add_argument("--mu-upper", type=float, help="Upper end of a two-sided mean interval")
    p.add_argument(
        "--averaged",
        action="store_true",
        help="Two-sided test as the average of two one-sided e-processes (keeps --shape)",
    )
    _add_strategy_flags(p, STRATEGY_CHOICES)
    _add_threshold_flags(p)
    p.add_argument("--trajectory", type=Path, help="Write t,wealth,log_wealth CSV to this path")

    p = sub.add_parser("simulate", help="Monte-Carlo rejection rates or average log-wealth curves")
    p.add_argument(
        "--generator",
        action="append",
        required=True,
        help="Data generator, e.g. nl:0.5,2 or beta:0.3,0.01 (repeatable)",
    )
    p.add_argument(
        "--methods",
        nargs="+",
        choices=[m.value for m in Method],
        default=["emixture", "egree"],
        help="Testing methods (default: emixture egree)",
    )
    p.add_argument("--shapes", nargs="+", choices=SHAPE_CHOICES, default=["plain"], help="Shape classes")
    p.add_argument("--n", type=positive_int, default=100, help="Observations per run (default: 100)")
    p.add_argument("--runs", type=positive_int, default=1000, help="Monte-Carlo runs (default: 1000)")
    p.add_argument("--mu", type=float, default=0.0, help="Null mean (default: 0)")
    p.add_argument("--sigma", type=float, default=1.0, help="Null standard deviation (default: 1)")
    p.add_argument("--cap", type=float, default=DEFAULT_CAP, help=f"e-GREE bet cap (default: {DEFAULT_CAP})")
    p.add_argument("--c", type=float, default=DEFAULT_C, help=f"GRAPA clip constant (default: {DEFAULT_C})")
    p.add_argument("--grapa-one-sided", action="store_true", help="Restrict GRAPA bets to be nonnegative")
    p.add_argument(
        "--decision",
        choices=[rule.value for rule in DecisionRule],
        default=DecisionRule.RUNNING_MAX.value,
        help="Reject e-processes on the running maximum or on the final wealth (default: running-max)",
    )
    p.add_argument("--curve", action="store_true", help="Emit average log e-process curves instead of rates")
    p.add_argument("--progress", action="store_true", help="Show progress bars on stderr")
    _add_threshold_flags(p, many=False)

    p = sub.add_parser("monitor", help="Detect a regime change in the losses of a price series")
    p.add_argument("--prices", type=Path, required=True, help="CSV with a header row")
    p.add_argument("--date-column", default=DEFAULT_DATE_COLUMN, help="Date column (default: date)")
    p.add_argument("--price-column", default=DEFAULT_PRICE_COLUMN, help="Close price column (default: close)")
    p.add_argument("--estimate-start", type=iso_date, help="First date of the estimation window")
    p.add_argument("--estimate-end", type=iso_date, required=True, help="Last date of the estimation window")
    p.add_argument("--test-start", type=iso_date, required=True, help="First date of the testing window")
    p.add_argument("--test-end", type=iso_date, help="Last date of the testing window")
    p.add_argument("--shape", choices=SHAPE_CHOICES, default="plain", help="Shape class (default: plain)")
    p.add_argument("--log-losses", action="store_true", help="Use log losses instead of linear losses")
    _add_strategy_flags(p, ["emixture", "egree"])
    _add_threshold_flags(p)
    p.add_argument("--trajectory", type=Path, help="Write date,log_wealth CSV to this path")

    p = sub.add_parser("combine", help="Combine p-values or apply a batch method")
    p.add_argument("--input", type=Path, required=True, help="One value per line")
    p.add_argument("--method", choices=COMBINE_METHODS, required=True, help="Combination method")
    p.add_argument("--mu", type=float, default=0.0, help="Mean bound for batch methods (default: 0)")
    p.add_argument("--sigma", type=float, default=1.0, help="Standard deviation bound for batch methods")
    p.add_argument("--shape", choices=SHAPE_CHOICES, default="plain", help="Shape class for batch methods")

    return parser


def read_observations(path: Path, column: Optional[str] = None) -> List[float]:
    """
    Read numbers from a file, one per line or from a named CSV column.

    Raises:
        ValueError: On a malformed value, naming its line number
    """
    values = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        if column is None:
            for line_number, line in enumerate(f, 1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                values.append(_parse_value(text, line_number))
        else:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or column not in reader.fieldnames:
                raise ValueError(f"line 1: column {column!r} not found in {path}")
            for line_number, row in enumerate(reader, 2):
                values.append(_parse_value(row[column], line_number))
    if not values:
        raise ValueError(f"{path} holds no observations")
    return values


def _parse_value(text, line_number: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"line {line_number}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"line {line_number}: invalid observation {text!r}")
    return value


def _thresholds(args) -> List[float]:
    if args.alpha is not None:
        return [1.0 / args.alpha]
    return list(args.thresholds)


def _strategy(args):
    if args.strategy == "emixture":
        return EMixture(grid=tuple(args.grid) if args.grid else DEFAULT_GRID)
    if args.strategy == "egree":
        return EGree(cap=args.cap)
    if args.strategy == "grapa":
        return Grapa(c=args.c, exact=True, one_sided=args.one_sided)
    return Agrapa(c=args.c, one_sided=args.one_sided)


def _two_sided(args, parser) -> Optional[TwoSided]:
    if (args.mu_lower is None) != (args.mu_upper is None):
        parser.error("--mu-lower and --mu-upper must be given together")
    if args.mu_lower is None:
        return None
    if args.mu is not None:
        parser.error("--mu cannot be combined with --mu-lower/--mu-upper")
    return TwoSided(args.mu_lower, args.mu_upper)


def _mean_bound(args) -> float:
    return 0.0 if args.mu is None else args.mu


def cmd_evalue(args, parser) -> str:
    side = _two_sided(args, parser)
    if side is not None:
        hypothesis = Hypothesis(MeanVarSpec(side.mu_upper, args.sigma), ShapeClass.parse(args.shape), side)
    else:
        spec = MeanVarSpec(_mean_bound(args), args.sigma)
        hypothesis = Hypothesis(spec, ShapeClass.parse(args.shape), OneSidedUpper())
    evidence = evaluate(args.x, hypothesis)
    return render([{"e": evidence.e, "p": evidence.p}], ("e", "p"), args.format)


def _write_trajectory(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])


def cmd_eprocess(args, parser) -> str:
    side = _two_sided(args, parser)
    if args.averaged and side is None:
        parser.error("--averaged needs --mu-lower and --mu-upper")
    thresholds = _thresholds(args)
    strategy = _strategy(args)
    shape = ShapeClass.parse(args.shape)
    xs = read_observations(args.input, args.column)

    if args.averaged:
        upper, lower = init_two_sided_pair(side, args.sigma, shape, strategy)
        trajectory = [update_two_sided_pair(upper, lower, x) for x in xs]
    else:
        if side is not None:
            hypothesis = Hypothesis(MeanVarSpec(side.mu_upper, args.sigma), shape, side)
        else:
            hypothesis = Hypothesis(MeanVarSpec(_mean_bound(args), args.sigma), shape)
        trajectory = run_eprocess(xs, hypothesis, strategy).trajectory

    report = first_crossing(trajectory, thresholds)
    if args.trajectory is not None:
        with np.errstate(divide="ignore"):
            logs = np.log(np.asarray(trajectory, dtype=float))
        _write_trajectory(
            args.trajectory,
            ("t", "wealth", "log_wealth"),
            ((t, float(w), float(lw)) for t, (w, lw) in enumerate(zip(trajectory, logs), 1)),
        )

    final, peak = float(trajectory[-1]), float(max(trajectory))
    summary = {"final_wealth": final, "max_wealth": peak, "evidence": evidence_label(peak)}
    rows = [
        {"threshold": level, "crossing_index": index, **summary} for level, index in report.rows()
    ]
    return render(rows, EPROCESS_COLUMNS, args.format)


def cmd_simulate(args, parser) -> str:
    threshold = 1.0 / args.alpha if args.alpha is not None else args.threshold
    generators = [parse_generator(text) for text in args.generator]
    spec = MeanVarSpec(args.mu, args.sigma)
    configs = [
        SimConfig(
            generator=generator,
            n=args.n,
            runs=args.runs,
            threshold=threshold,
            seed=args.seed,
            method=Method(method),
            hypothesis=Hypothesis(spec, ShapeClass.parse(shape)),
            cap=args.cap,
            c=args.c,
            grapa_one_sided=args.grapa_one_sided,
            decision=DecisionRule(args.decision),
        )
        for generator in generators
        for method in args.methods
        for shape in args.shapes
    ]

    if not args.curve:
        rows = [
            result_row(config, run_rejection_experiment(config, jobs=args.jobs, progress=args.progress))
            for config in configs
        ]
        return render(rows, RESULT_COLUMNS, args.format)

    labelled = len(generators) > 1 or len(args.shapes) > 1
    columns = ["t"]
    curves = []
    for config in configs:
        label = config.method.value
        if labelled:
            label = f"{label}|{config.hypothesis.shape.value}|{config.generator.name}({config.generator.param})"
        columns.append(label)
        result = run_avg_log_trajectory(config, jobs=args.jobs, progress=args.progress)
        curves.append(result.avg_log_trajectory)

    rows = [
        {"t": t, **{label: curve[t - 1] for label, curve in zip(columns[1:], curves)}}
        for t in range(1, args.n + 1)
    ]
    return render(rows, columns, args.format)


def cmd_monitor(args, parser) -> str:
    thresholds = _thresholds(args)
    series = load_prices(args.prices, args.date_column, args.price_column)
    losses = to_losses(series, log_losses=args.log_losses)
    estimate = estimate_null(losses, args.estimate_start, args.estimate_end)
    window = restrict(losses, args.test_start, args.test_end)
    if len(window) == 0:
        raise ValueError("the testing window holds no losses")

    result = detect(window, estimate, _strategy(args), ShapeClass.parse(args.shape), thresholds)
    if args.trajectory is not None:
        _write_trajectory(args.trajectory, ("date", "log_wealth"), zip(result.dates, result.log_wealth))

    summary = {
        "mu_hat": estimate.mu_hat,
        "sigma_hat": estimate.sigma_hat,
        "estimation_count": estimate.count,
        "evidence": evidence_label(math.exp(max(result.log_wealth))),
    }
    rows = [
        {"threshold": level, "crossing_day": index, "crossing_date": day, **summary}
        for level, index, day in result.rows()
    ]
    return render(rows, MONITOR_COLUMNS, args.format)


def cmd_combine(args, parser) -> str:
    values = read_observations(args.input)
    if args.method == "fisher":
        value = fisher_combine(values)
    elif args.method == "simes":
        value = simes_combine(values)
    else:
        spec = MeanVarSpec(args.mu, args.sigma)
        batch = e_batch if args.method == "ebatch" else p_batch
        value = batch(values, spec, ShapeClass.parse(args.shape))
    return render([{"method": args.method, "value": value}], ("method", "value"), args.format)


COMMANDS = {
    "evalue": cmd_evalue,
    "eprocess": cmd_eprocess,
    "simulate": cmd_simulate,
    "monitor": cmd_monitor,
    "combine": cmd_combine,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = get_settings()
    except ValueError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return 2

    parser = build_parser(settings)
    args = parser.parse_args(argv)

    level = settings.log_level
    if args.verbose:
        level = "DEBUG" if args.verbose > 1 else "INFO"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if settings.progress and hasattr(args, "progress"):
        args.progress = True
    logger.debug("command %s with seed=%d jobs=%d", args.command, args.seed, args.jobs)

    try:
        output = COMMANDS[args.command](args, parser)
    except (ValueError, OSError) as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return 1

    print(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
