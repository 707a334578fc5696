"""Command-line entry point: ``abel simulate | ci | test``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adjusted import AdjustmentSpec
from .blocking import scheme_from_spec
from .errors import ABELError, ConfigError, DataError, NumericalError
from .inference import bonferroni_tests, confidence_interval, linreg_ef, mean_ef
from .io import RunReport, load_csv, read_config, write_text
from .simulation import coverage_experiment
from .stats import chi2_quantile
from .tuning import BootstrapSettings

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

SIM_COLUMNS = ["rho", "d", "method", "M", "level", "coverage", "se", "n", "replications", "failures", "hull_failures"]
TEST_COLUMNS = [
    "component", "name", "null", "statistic", "df", "p_value", "level", "threshold",
    "reject", "tuning", "bel_statistic",
]
CI_COLUMNS = ["component", "name", "lower", "estimate", "upper", "level", "threshold", "tuning"]


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abel", description="Adjusted blockwise empirical likelihood inference.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        sp.add_argument("--out-dir", default=".", help="directory for report files")
        sp.add_argument("--format", choices=("csv", "json"), default=None,
                        help="write only this format (default: both)")

    sim = sub.add_parser("simulate", help="coverage study on simulated AR(1) data")
    sim.add_argument("--config", required=True, help="INI file with [simulation] and [bootstrap]")
    sim.add_argument("--workers", type=int, default=None, help="worker processes")
    common(sim)

    def model(sp):
        sp.add_argument("--data", required=True, help="CSV file")
        sp.add_argument("--no-header", action="store_true", help="the CSV has no header row")
        sp.add_argument("--delimiter", default=",")
        sp.add_argument("--model", choices=("mean", "linreg"), default="linreg")
        sp.add_argument("--columns", default=None,
                        help="comma-separated columns to use (names or 0-based indices); "
                             "for linreg the first is the response")
        sp.add_argument("--intercept", action="store_true", help="linreg with an intercept term")
        sp.add_argument("--blocks", default="pro", help="block length M or 'pro' (progressive)")
        sp.add_argument("--gap", type=int, default=None, help="distance between block starts (default M)")
        sp.add_argument("--adjust", default="hp", help="none, log, hp or a positive number")
        sp.add_argument("--bootstrap-replications", type=int, default=100)
        sp.add_argument("--bootstrap-block-length", type=int, default=None)
        common(sp)

    ci = sub.add_parser("ci", help="likelihood-ratio confidence interval for one parameter")
    model(ci)
    ci.add_argument("--component", default="0", help="parameter name or 0-based index")
    ci.add_argument("--level", type=float, default=0.95)

    te = sub.add_parser("test", help="Bonferroni tests of single parameters")
    model(te)
    te.add_argument("--nulls", default=None,
                    help="comma-separated NAME[=VALUE] entries (default: every parameter = 0)")
    te.add_argument("--familywise", type=float, default=0.05)
    te.add_argument("--bel", action="store_true", help="add the unadjusted BEL statistic column")
    return p


def _adjustment(args) -> AdjustmentSpec:
    text = args.adjust.strip().lower()
    if text in ("none", "bel"):
        return AdjustmentSpec.none()
    if text == "log":
        return AdjustmentSpec.log_rule()
    if text == "hp":
        try:
            settings = BootstrapSettings(args.bootstrap_replications, args.bootstrap_block_length,
                                         args.seed if args.seed is not None else 0)
        except ValueError as exc:
            raise ConfigError(str(exc), key="bootstrap-replications") from None
        return AdjustmentSpec.high_precision(settings)
    try:
        return AdjustmentSpec.fixed(float(text))
    except ValueError:
        raise ConfigError(f"--adjust must be none, log, hp or a positive number, got {args.adjust!r}",
                          key="adjust") from None


def _model(args):
    ds = load_csv(args.data, header=not args.no_header, delimiter=args.delimiter)
    if args.columns:
        ds = ds.select([c.strip() for c in args.columns.split(",") if c.strip()])
    if args.model == "mean":
        ef = mean_ef(ds.values.shape[1])
        names = list(ds.names)
    else:
        if ds.values.shape[1] < 2:
            raise ConfigError("linreg needs a response and at least one regressor", key="columns")
        ef = linreg_ef(ds.values.shape[1] - 1, intercept=args.intercept)
        names = (["intercept"] if args.intercept else []) + list(ds.names[1:])
    return ds, ef, names


def _param_index(key: str, names: list[str]) -> int:
    key = key.strip()
    if key in names:
        return names.index(key)
    try:
        j = int(key)
    except ValueError:
        raise ConfigError(f"unknown parameter {key!r}; available: {', '.join(names)}", key="component") from None
    if not 0 <= j < len(names):
        raise ConfigError(f"parameter index {j} out of range for {len(names)} parameters", key="component")
    return j


def _nulls(text, names) -> dict[int, float]:
    if not text:
        return {j: 0.0 for j in range(len(names))}
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, _, value = item.partition("=")
        try:
            out[_param_index(name, names)] = float(value) if value.strip() else 0.0
        except ValueError:
            raise ConfigError(f"bad null value in {item!r}", key="nulls") from None
    return out


def _model_config(args, ds, scheme, names) -> dict:
    return {
        "data": str(args.data),
        "n": int(ds.values.shape[0]),
        "columns": list(ds.names),
        "model": args.model,
        "intercept": bool(args.intercept),
        "parameters": names,
        "adjust": args.adjust,
        "bootstrap_replications": args.bootstrap_replications,
        "bootstrap_block_length": args.bootstrap_block_length,
        "scheme": scheme.describe(),
    }


def cmd_simulate(args, argv) -> RunReport:
    config = read_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    report = coverage_experiment(config)
    return RunReport(list(argv), report.config, report.rows(), seed=config.seed, columns=SIM_COLUMNS)


def cmd_test(args, argv) -> RunReport:
    ds, ef, names = _model(args)
    adj = _adjustment(args)
    scheme = scheme_from_spec(ds.values.shape[0], args.blocks, args.gap)
    nulls = _nulls(args.nulls, names)
    if not 0 < args.familywise < 1:
        raise ConfigError("familywise level must lie in (0, 1)", key="familywise")
    level = args.familywise / len(nulls)
    results = bonferroni_tests(ds.values, ef, nulls, args.familywise, scheme, adj, with_bel=args.bel)
    rows = []
    for (j, v), r in zip(nulls.items(), results):
        rows.append({
            "component": j,
            "name": names[j],
            "null": v,
            "statistic": r.statistic,
            "df": r.df,
            "p_value": r.p_value,
            "level": level,
            "threshold": chi2_quantile(r.df, 1.0 - level),
            "reject": r.reject_at[level],
            "tuning": r.tuning,
            "bel_statistic": r.bel_statistic,
        })
    config = _model_config(args, ds, scheme, names)
    config.update(familywise=args.familywise, per_test_level=level)
    return RunReport(list(argv), config, rows, seed=args.seed, columns=TEST_COLUMNS)


def cmd_ci(args, argv) -> RunReport:
    ds, ef, names = _model(args)
    adj = _adjustment(args)
    scheme = scheme_from_spec(ds.values.shape[0], args.blocks, args.gap)
    j = _param_index(args.component, names)
    ci = confidence_interval(ds.values, ef, j, args.level, scheme, adj)
    row = {
        "component": j,
        "name": names[j],
        "lower": ci.lower,
        "estimate": ci.estimate,
        "upper": ci.upper,
        "level": ci.level,
        "threshold": ci.threshold,
        "tuning": ci.tuning,
    }
    return RunReport(list(argv), _model_config(args, ds, scheme, names), [row], seed=args.seed, columns=CI_COLUMNS)


COMMANDS = {"simulate": cmd_simulate, "test": cmd_test, "ci": cmd_ci}


def write_report(report: RunReport, command: str, out_dir, fmt: str | None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt in (None, "csv"):
        paths.append(out / f"{command}.csv")
        write_text(paths[-1], report.to_csv())
    if fmt in (None, "json"):
        paths.append(out / f"{command}.json")
        write_text(paths[-1], report.to_json())
    return paths


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            report = COMMANDS[args.command](args, argv)
            paths = write_report(report, args.command, args.out_dir, args.format)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ABELError, ValueError) as exc:
        key = getattr(exc, "key", None)
        print(f"config error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report.wall_time = time.perf_counter() - t0
    sys.stdout.write(report.to_csv())
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    print(f"wall time {report.wall_time:.2f}s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
