"""Command-line entry points.

Every `*_main` takes an optional argv list and returns the process exit
code: 0 YES, 1 NO, 2 TIMEOUT, 3 error, 4 UNKNOWN.
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from cfa_hypertree import harness
from cfa_hypertree.decomp import (
    Decomposition,
    check,
    parse_decomposition,
    serialize_decomposition,
)
from cfa_hypertree.frac import (
    frac_improve_search,
    improvement_bucket,
    simple_improve,
)
from cfa_hypertree.ghdsearch import DEFAULT_CAP, METHODS, decide_ghw
from cfa_hypertree.hdsearch import RunOutcome, Status, decide_hw
from cfa_hypertree.helpers import HypertreeError, format_weight
from cfa_hypertree.hgcore import read_instance
from cfa_hypertree.invariants import stats

logger = logging.getLogger(__name__)

ERROR_EXIT = Status.ERROR.exit_code


def _error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return ERROR_EXIT


def _write_decomposition(decomposition: Decomposition, out: str | None) -> None:
    text = serialize_decomposition(decomposition)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.debug(f"Decomposition written to {out}.")
    else:
        print(text, end="")


def _report(outcome: RunOutcome, out: str | None) -> int:
    summary = f"{outcome.status.value} ({outcome.elapsed_ms} ms"
    if outcome.method:
        summary += f", {outcome.method}"
    summary += ")"
    if outcome.decomposition is not None:
        summary += f" width={format_weight(outcome.decomposition.width())}"
    if outcome.message:
        summary += f" {outcome.message}"
    print(summary)
    if outcome.decomposition is not None:
        _write_decomposition(outcome.decomposition, out)
    return outcome.status.exit_code


def hd_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hd", description="Decide whether a hypergraph has an HD of width <= k."
    )
    parser.add_argument("file", help="instance file (.hg or .cq)")
    parser.add_argument("-k", type=int, required=True, help="width bound")
    parser.add_argument("--timeout", type=float, help="seconds (default: no limit)")
    parser.add_argument("--out", help="write the decomposition here instead of stdout")
    parser.add_argument("--no-simplify", action="store_true", help="search on the input as given")
    parser.add_argument("--seed", type=int, help="shuffle the label order with this seed")
    args = parser.parse_args(argv)
    try:
        hypergraph = read_instance(args.file)
        outcome = decide_hw(
            hypergraph,
            args.k,
            args.timeout,
            simplify=not args.no_simplify,
            seed=args.seed,
        )
    except (HypertreeError, OSError, ValueError) as e:
        return _error(str(e))
    return _report(outcome, args.out)


def ghd_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ghd", description="Decide whether a hypergraph has a GHD of width <= k."
    )
    parser.add_argument("file", help="instance file (.hg or .cq)")
    parser.add_argument("-k", type=int, required=True, help="width bound")
    parser.add_argument(
        "--method", choices=[*METHODS, "portfolio"], default="portfolio"
    )
    parser.add_argument("--timeout", type=float, help="seconds (default: no limit)")
    parser.add_argument("--cap", type=int, default=DEFAULT_CAP, help="subedge generation cap")
    parser.add_argument(
        "--plain", action="store_true", help="balsep without subedges; NO becomes UNKNOWN"
    )
    parser.add_argument("--out", help="write the decomposition here instead of stdout")
    parser.add_argument("--seed", type=int, help="shuffle the label order with this seed")
    args = parser.parse_args(argv)
    if args.plain and args.method != "balsep":
        return _error("--plain only applies to --method balsep")
    options = {"timeout": args.timeout, "cap": args.cap, "seed": args.seed}
    if args.plain:
        options["plain"] = True
    try:
        hypergraph = read_instance(args.file)
        outcome = decide_ghw(hypergraph, args.k, args.method, **options)
    except (HypertreeError, OSError, ValueError) as e:
        return _error(str(e))
    return _report(outcome, args.out)


def improve_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="improve", description="Fractionally improve hypertree decompositions."
    )
    parser.add_argument("file", help="instance file (.hg or .cq)")
    parser.add_argument("-k", type=int, required=True, help="width of the HDs considered")
    target = parser.add_mutually_exclusive_group()
    target.add_argument("--kprime", type=float, help="fractional width to reach")
    target.add_argument("--buckets", action="store_true", help="report the improvement bucket")
    parser.add_argument("--method", choices=["simple", "search"], default="search")
    parser.add_argument("--hd", help="decomposition file improved by --method simple")
    parser.add_argument("--timeout", type=float, help="seconds (default: no limit)")
    parser.add_argument("--out", help="write the decomposition here instead of stdout")
    args = parser.parse_args(argv)
    try:
        hypergraph = read_instance(args.file)
        if args.method == "simple":
            if args.hd:
                given = parse_decomposition(
                    Path(args.hd).read_text(encoding="utf-8"), hypergraph
                )
                violations = check(hypergraph, given)
                if violations:
                    return _error(f"input decomposition is invalid: {violations[0].message}")
            else:
                found = decide_hw(hypergraph, args.k, args.timeout)
                if found.status != Status.YES:
                    return _report(found, None)
                given = found.decomposition
            improved = simple_improve(hypergraph, given)
            print(
                f"width {format_weight(given.width())} -> {format_weight(improved.width())}"
            )
            _write_decomposition(improved, args.out)
            return 0
        if args.buckets or args.kprime is None:
            result = improvement_bucket(hypergraph, args.k, args.timeout)
            print(f"bucket {result}")
            return Status.TIMEOUT.exit_code if result.timed_out and result.bucket == "no" else 0
        outcome = frac_improve_search(hypergraph, args.k, args.kprime, args.timeout)
    except (HypertreeError, OSError, ValueError) as e:
        return _error(str(e))
    return _report(outcome, args.out)


def stats_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hg-stats", description="Structural properties of hypergraphs."
    )
    parser.add_argument("files", nargs="+", help="instance files (.hg or .cq)")
    parser.add_argument("--vc-budget", type=float, help="seconds for the VC-dimension")
    args = parser.parse_args(argv)
    rows = []
    for name in args.files:
        try:
            hypergraph = read_instance(name)
        except (HypertreeError, OSError) as e:
            return _error(f"{name}: {e}")
        rows.append({"instance": name, **stats(hypergraph, args.vc_budget).as_dict()})
    print(pd.DataFrame(rows).to_csv(index=False), end="")
    return 0


def bench_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench", description="Run the width experiments over a corpus."
    )
    parser.add_argument("corpus", nargs="?", help="instance directory")
    parser.add_argument("--config", help="toml file with the same keys as the flags")
    parser.add_argument("--glob", help="instance pattern below the corpus")
    parser.add_argument("--tasks", help="comma separated subset of stats,hw,ghw,improve")
    parser.add_argument("--kmax", type=int)
    parser.add_argument("--timeout", type=float, help="seconds per decision run")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--csv", help="output CSV")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--resume", action="store_true", default=None)
    parser.add_argument("--ghw-descent", action="store_true", default=None)
    parser.add_argument("--vc-budget", type=float)
    parser.add_argument("--cap", type=int)
    args = parser.parse_args(argv)
    try:
        config = harness.load_bench_config(
            args.config,
            corpus=args.corpus,
            glob=args.glob,
            tasks=args.tasks,
            kmax=args.kmax,
            timeout=args.timeout,
            workers=args.workers,
            csv=args.csv,
            seed=args.seed,
            resume=args.resume,
            ghw_descent=args.ghw_descent,
            vc_budget=args.vc_budget,
            cap=args.cap,
        )
        records = harness.run_corpus(config)
    except (HypertreeError, OSError, ValueError) as e:
        return _error(str(e))
    print(f"{len(records)} records written to {config.csv}")
    return 0


def report_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="report", description="Summaries and correlations of a bench CSV."
    )
    parser.add_argument("--csv", required=True, help="bench CSV")
    parser.add_argument("--correlations", action="store_true")
    parser.add_argument("--summary", action="store_true")
    parser.add_argument("--yaml", help="also write the summary tables as YAML")
    parser.add_argument("--matrix-csv", help="write the correlation matrix as CSV")
    args = parser.parse_args(argv)
    try:
        records = harness.read_records(args.csv)
        if args.summary or args.yaml or not args.correlations:
            tables = harness.summarize(records)
            for name, table in tables.items():
                print(f"== {name} ==")
                print(table.to_string(index=False))
            if args.yaml:
                harness.write_summary_yaml(tables, args.yaml)
        if args.correlations:
            report = harness.correlation_report(records)
            print(report.text)
            if args.matrix_csv:
                report.matrix.to_csv(args.matrix_csv)
    except (HypertreeError, OSError, ValueError) as e:
        return _error(str(e))
    return 0
