"""Corpus runner: stats, iterative hw, ghw attempts and improvement buckets per instance.

Results go to one CSV, appended row by row as instances finish and
rewritten sorted by instance at the end. Summaries and correlation
matrices are derived from that CSV.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, fields
from pathlib import Path

import pandas as pd

from cfa_hypertree import helpers
from cfa_hypertree.frac import improvement_bucket
from cfa_hypertree.ghdsearch import DEFAULT_CAP, portfolio_ghw
from cfa_hypertree.hdsearch import Status, compute_hw
from cfa_hypertree.helpers import ConfigError, HypertreeError
from cfa_hypertree.hgcore import read_instance
from cfa_hypertree.invariants import stats

logger = logging.getLogger(__name__)

TASKS = ("stats", "hw", "ghw", "improve")
INSTANCE_SUFFIXES = (".hg", ".cq")
# ghw is attempted below hw only for these hw upper bounds
GHW_ATTEMPT_RANGE = range(3, 7)

STATS_COLUMNS = [
    "num_vertices",
    "num_edges",
    "arity",
    "degree",
    "bip",
    "bmip3",
    "bmip4",
    "vc",
]
COLUMNS = (
    ["instance", "group"]
    + STATS_COLUMNS
    + [
        "hw_lb",
        "hw_ub",
        "hw_runs",
        "ghw_lb",
        "ghw_ub",
        "ghw_runs",
        "improve_bucket",
        "winning_method",
    ]
    + [f"status_{t}" for t in TASKS]
    + [f"runtime_ms_{t}" for t in TASKS]
)
RUNTIME_COLUMNS = [f"runtime_ms_{t}" for t in TASKS]
CORRELATION_COLUMNS = STATS_COLUMNS + ["hw"]

DONE = "DONE"
SKIPPED = "SKIPPED"


@dataclass
class BenchConfig:
    """Settings of one corpus run.

    Args:
        corpus (str): directory holding the instances
        glob (str): pattern selecting instance files below corpus. Default "**/*".
        tasks (tuple[str]): subset of stats, hw, ghw, improve
        kmax (int): largest k tried for hw. Default 6.
        timeout (float): seconds per decision run. Default 3600.
        workers (int): parallel instances. Default 1.
        csv (str): output CSV path
        seed (int): label order seed passed to the solvers
        resume (bool): keep finished (instance, task) results of an existing CSV
        ghw_descent (bool): keep lowering k after a ghw YES
        vc_budget (float): seconds for the VC-dimension, defaults to timeout
        cap (int): subedge generation cap
    """

    corpus: str
    glob: str = "**/*"
    tasks: tuple = TASKS
    kmax: int = 6
    timeout: float = 3600.0
    workers: int = 1
    csv: str = "bench.csv"
    seed: int | None = None
    resume: bool = False
    ghw_descent: bool = False
    vc_budget: float | None = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if isinstance(self.tasks, str):
            self.tasks = tuple(t.strip() for t in self.tasks.split(",") if t.strip())
        self.tasks = tuple(self.tasks)
        unknown = set(self.tasks) - set(TASKS)
        if unknown:
            logger.error(f"Unknown bench tasks {sorted(unknown)}.")
            raise ConfigError(f"unknown tasks {sorted(unknown)}; choose from {TASKS}")
        if not self.timeout or self.timeout <= 0:
            logger.error(f"Bench timeout must be positive, got {self.timeout}.")
            raise ConfigError("timeout must be positive")
        if self.workers < 1:
            logger.error(f"Bench worker count must be at least 1, got {self.workers}.")
            raise ConfigError("workers must be at least 1")
        if self.kmax < 1:
            raise ConfigError("kmax must be at least 1")
        if self.cap < 1:
            raise ConfigError("cap must be at least 1")


def load_bench_config(config_path: str | None = None, **overrides) -> BenchConfig:
    """builds a BenchConfig from a toml file and/or keyword overrides

    Overrides that are None are ignored; unknown file keys are reported and
    skipped.

    Raises:
        ConfigError: on invalid values or a missing corpus
    """
    values = {}
    if config_path is not None:
        raw = helpers.read_config(config_path)
        known = {f.name for f in fields(BenchConfig)}
        for key, value in raw.items():
            if key in known:
                values[key] = value
            else:
                logger.warning(f"Ignoring unknown bench configuration key {key}.")
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "corpus" not in values:
        logger.error("No corpus directory given.")
        raise ConfigError("a corpus directory is required")
    try:
        return BenchConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _blank(value) -> str:
    return "" if value is None else str(value)


def _runs(outcomes: dict) -> str:
    return ";".join(
        f"{k}:{o.status.value}:{o.elapsed_ms}" for k, o in sorted(outcomes.items())
    )


def _parse_runs(text) -> list[tuple[int, str, int]]:
    if not isinstance(text, str) or not text:
        return []
    runs = []
    for item in text.split(";"):
        k, status, ms = item.split(":")
        runs.append((int(k), status, int(ms)))
    return runs


def _task_status(outcomes) -> str:
    statuses = {o.status for o in outcomes}
    if Status.ERROR in statuses:
        return Status.ERROR.value
    if Status.TIMEOUT in statuses:
        return Status.TIMEOUT.value
    return DONE


def _as_int(value) -> int | None:
    if value is None or value == "" or (isinstance(value, float) and math.isnan(value)):
        return None
    return int(value)


def instance_group(path: Path, corpus: Path) -> str:
    """first subdirectory of the instance below the corpus, empty at top level"""
    parts = path.relative_to(corpus).parts
    return parts[0] if len(parts) > 1 else ""


def _run_stats(row: dict, hypergraph, config: BenchConfig) -> None:
    budget = config.vc_budget if config.vc_budget is not None else config.timeout
    record = stats(hypergraph, budget)
    row.update(record.as_dict())
    row["status_stats"] = DONE if record.vc_dim.exact else Status.TIMEOUT.value


def _run_hw(row: dict, hypergraph, config: BenchConfig) -> None:
    bounds = compute_hw(hypergraph, config.kmax, config.timeout, seed=config.seed)
    row["hw_lb"] = bounds.lower
    row["hw_ub"] = _blank(bounds.upper)
    row["hw_runs"] = _runs(bounds.outcomes)
    row["status_hw"] = _task_status(bounds.outcomes.values())
    row["runtime_ms_hw"] = sum(o.elapsed_ms for o in bounds.outcomes.values())


def _run_ghw(row: dict, hypergraph, config: BenchConfig) -> None:
    hw_lb, hw_ub = _as_int(row.get("hw_lb")), _as_int(row.get("hw_ub"))
    lower = max(1, math.ceil(((hw_lb or 1) - 1) / 3))
    if (hw_lb or 1) >= 2:
        # ghw 1 means acyclic, which means hw 1
        lower = max(lower, 2)
    if hw_ub is None:
        row.update(ghw_lb=lower, ghw_ub="", ghw_runs="", status_ghw=SKIPPED, runtime_ms_ghw=0)
        return
    if hw_ub <= 2 and hw_lb == hw_ub:
        # no improvement below hw is possible for hw 1 and 2
        row.update(
            ghw_lb=hw_ub,
            ghw_ub=hw_ub,
            ghw_runs="",
            winning_method="chain",
            status_ghw=DONE,
            runtime_ms_ghw=0,
        )
        return
    upper = hw_ub
    outcomes = {}
    methods = []
    k = hw_ub - 1
    if hw_ub in GHW_ATTEMPT_RANGE or config.ghw_descent:
        while k >= max(lower, 2):
            outcome = portfolio_ghw(
                hypergraph, k, timeout=config.timeout, cap=config.cap, seed=config.seed
            )
            outcomes[k] = outcome
            if outcome.status.definite:
                methods.append(outcome.method)
            if outcome.status == Status.YES:
                upper = k
                if not config.ghw_descent:
                    break
                k -= 1
                continue
            if outcome.status == Status.NO:
                lower = max(lower, k + 1)
                if hw_ub == k + 1:
                    # a GHD NO at hw-1 is also an HD NO at hw-1
                    row["hw_lb"] = max(hw_lb or 1, hw_ub)
            break
    row.update(
        ghw_lb=lower,
        ghw_ub=upper,
        ghw_runs=_runs(outcomes),
        winning_method=";".join(methods),
        status_ghw=_task_status(outcomes.values()) if outcomes else SKIPPED,
        runtime_ms_ghw=sum(o.elapsed_ms for o in outcomes.values()),
    )


def _run_improve(row: dict, hypergraph, config: BenchConfig) -> None:
    hw_ub = _as_int(row.get("hw_ub"))
    if hw_ub is None or hw_ub < 2:
        row.update(improve_bucket="", status_improve=SKIPPED, runtime_ms_improve=0)
        return
    result = improvement_bucket(hypergraph, hw_ub, config.timeout)
    row["improve_bucket"] = str(result)
    row["status_improve"] = Status.TIMEOUT.value if result.timed_out else DONE
    row["runtime_ms_improve"] = sum(o.elapsed_ms for o in result.outcomes.values())


TASK_RUNNERS = {
    "stats": _run_stats,
    "hw": _run_hw,
    "ghw": _run_ghw,
    "improve": _run_improve,
}


def check_record(row: dict) -> None:
    """verifies lb <= ub for hw and ghw and ghw_ub <= hw_ub

    Raises:
        HypertreeError: when a record breaks one of the width chains
    """
    hw_lb, hw_ub = _as_int(row.get("hw_lb")), _as_int(row.get("hw_ub"))
    ghw_lb, ghw_ub = _as_int(row.get("ghw_lb")), _as_int(row.get("ghw_ub"))
    problems = []
    if hw_lb is not None and hw_ub is not None and hw_lb > hw_ub:
        problems.append(f"hw_lb {hw_lb} > hw_ub {hw_ub}")
    if ghw_lb is not None and ghw_ub is not None and ghw_lb > ghw_ub:
        problems.append(f"ghw_lb {ghw_lb} > ghw_ub {ghw_ub}")
    if ghw_ub is not None and hw_ub is not None and ghw_ub > hw_ub:
        problems.append(f"ghw_ub {ghw_ub} > hw_ub {hw_ub}")
    if problems:
        logger.error(f"Record {row.get('instance')} breaks width chains: {problems}")
        raise HypertreeError("; ".join(problems))


def run_instance(path: str, corpus: str, config: BenchConfig, previous: dict | None = None) -> dict:
    """runs every configured task not already finished in `previous` on one instance

    Task failures become an ERROR status; they never raise.
    """
    path, corpus = Path(path), Path(corpus)
    row = {column: "" for column in COLUMNS}
    if previous:
        row.update({k: v for k, v in previous.items() if k in row})
    row["instance"] = path.relative_to(corpus).as_posix()
    row["group"] = instance_group(path, corpus)
    try:
        hypergraph = read_instance(path)
    except (HypertreeError, OSError, UnicodeDecodeError) as e:
        logger.error(f"Could not read {path}: {e}")
        for task in config.tasks:
            row[f"status_{task}"] = Status.ERROR.value
        return row
    for task in config.tasks:
        if row.get(f"status_{task}") not in ("", None):
            logger.debug(f"Skipping finished task {task} for {row['instance']}.")
            continue
        try:
            TASK_RUNNERS[task](row, hypergraph, config)
        except Exception as e:
            logger.error(f"Task {task} failed on {row['instance']}: {e}")
            row[f"status_{task}"] = Status.ERROR.value
    try:
        check_record(row)
    except HypertreeError:
        for task in ("hw", "ghw"):
            if task in config.tasks:
                row[f"status_{task}"] = Status.ERROR.value
    logger.info(f"Finished {row['instance']}.")
    return row


def discover_instances(config: BenchConfig) -> list[Path]:
    corpus = Path(config.corpus)
    if not corpus.is_dir():
        logger.error(f"Corpus directory {corpus} does not exist.")
        raise ConfigError(f"corpus {corpus} is not a directory")
    return sorted(
        p
        for p in corpus.glob(config.glob)
        if p.is_file() and p.suffix.lower() in INSTANCE_SUFFIXES
    )


def read_records(csv_path: str) -> pd.DataFrame:
    """reads a bench CSV with every cell kept as text"""
    return pd.read_csv(csv_path, dtype=str, keep_default_na=False)


def _append(csv_path: str, row: dict) -> None:
    header = not os.path.exists(csv_path)
    pd.DataFrame([row], columns=COLUMNS).to_csv(
        csv_path, mode="a", header=header, index=False
    )


def _drop_partial_row(csv_path: str) -> bool:
    """cuts an unterminated last line left by an interrupted append

    Returns:
        bool: True when something was cut
    """
    with open(csv_path, "rb+") as f:
        data = f.read()
        if not data or data.endswith(b"\n"):
            return False
        f.truncate(data.rfind(b"\n") + 1)
    logger.warning(f"Dropped an incomplete last row of {csv_path}.")
    return True


def _load_previous(csv_path: str) -> dict[str, dict]:
    _drop_partial_row(csv_path)
    if os.path.getsize(csv_path) == 0:
        return {}
    try:
        rows = read_records(csv_path).to_dict(orient="records")
    except pd.errors.ParserError as e:
        logger.error(f"Cannot resume from {csv_path}: {e}")
        raise HypertreeError(f"unreadable bench CSV {csv_path}") from e
    return {row["instance"]: row for row in rows}


def _finished(row: dict, tasks) -> bool:
    return all(row.get(f"status_{t}") not in ("", None) for t in tasks)


def run_corpus(config: BenchConfig) -> pd.DataFrame:
    """runs the configured tasks over every instance of the corpus

    Returns:
        pd.DataFrame: final records, one row per instance sorted by instance
    """
    paths = discover_instances(config)
    corpus = Path(config.corpus)
    previous: dict[str, dict] = {}
    if config.resume and os.path.exists(config.csv):
        previous = _load_previous(config.csv)
        logger.info(f"Resuming with {len(previous)} recorded instances.")
    if not previous:
        pd.DataFrame(columns=COLUMNS).to_csv(config.csv, index=False)

    pending = []
    for path in paths:
        name = path.relative_to(corpus).as_posix()
        if name in previous and _finished(previous[name], config.tasks):
            continue
        pending.append((path, previous.get(name)))
    logger.info(f"{len(paths)} instances found, {len(pending)} to run.")

    if config.workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            futures = [
                executor.submit(run_instance, str(path), str(corpus), config, prior)
                for path, prior in pending
            ]
            for future in as_completed(futures):
                _append(config.csv, future.result())
    else:
        for path, prior in pending:
            _append(config.csv, run_instance(str(path), str(corpus), config, prior))

    records = read_records(config.csv)
    records = (
        records.drop_duplicates(subset="instance", keep="last")
        .sort_values("instance", kind="stable")
        .reset_index(drop=True)
    )
    records = records.reindex(columns=COLUMNS, fill_value="")
    staging = f"{config.csv}.tmp"
    records.to_csv(staging, index=False)
    os.replace(staging, config.csv)
    logger.info(f"Wrote {len(records)} records to {config.csv}.")
    return records


@dataclass
class CorrelationReport:
    matrix: pd.DataFrame
    text: str = field(default="")


def _numeric_view(records: pd.DataFrame) -> pd.DataFrame:
    numeric = pd.DataFrame(index=records.index)
    for column in STATS_COLUMNS:
        if column in records:
            numeric[column] = pd.to_numeric(records[column], errors="coerce")
    hw_lb = pd.to_numeric(records.get("hw_lb"), errors="coerce")
    hw_ub = pd.to_numeric(records.get("hw_ub"), errors="coerce")
    numeric["hw"] = hw_ub.where(hw_lb == hw_ub)
    return numeric


def render_grid(matrix: pd.DataFrame) -> str:
    """ASCII grid of signed correlations; undefined cells stay blank"""
    width = max(7, *(len(c) for c in matrix.columns))
    lines = [" " * width + "".join(f"{c:>{width}}" for c in matrix.columns)]
    for name, row in matrix.iterrows():
        cells = "".join(
            f"{'':>{width}}" if pd.isna(v) else f"{v:>+{width}.2f}" for v in row
        )
        lines.append(f"{name:<{width}}{cells}")
    return "\n".join(lines)


def correlation_report(records: pd.DataFrame) -> CorrelationReport:
    """pairwise Pearson correlation of the structural columns and hw

    Raises:
        HypertreeError: with fewer than three records
    """
    if len(records) < 3:
        logger.error(f"Correlation needs at least 3 records, got {len(records)}.")
        raise HypertreeError(
            f"insufficient data: correlation needs at least 3 records, got {len(records)}"
        )
    numeric = _numeric_view(records)[CORRELATION_COLUMNS]
    matrix = numeric.corr(method="pearson", min_periods=3)
    return CorrelationReport(matrix, render_grid(matrix))


def _summarize_runs(records: pd.DataFrame, column: str) -> pd.DataFrame:
    rows = []
    for group, runs_text in zip(records["group"], records[column]):
        for k, status, ms in _parse_runs(runs_text):
            rows.append({"group": group, "k": k, "status": status, "ms": ms})
    if not rows:
        return pd.DataFrame(columns=["group", "k", "yes", "no", "timeout", "avg_runtime_s"])
    runs = pd.DataFrame(rows)
    table = []
    for (group, k), part in runs.groupby(["group", "k"], sort=True):
        definite = part[part["status"].isin([Status.YES.value, Status.NO.value])]
        average = definite["ms"].mean() / 1000 if len(definite) else None
        table.append(
            {
                "group": group,
                "k": int(k),
                "yes": int((part["status"] == Status.YES.value).sum()),
                "no": int((part["status"] == Status.NO.value).sum()),
                "timeout": int((part["status"] == Status.TIMEOUT.value).sum()),
                "avg_runtime_s": None if average is None else round(float(average), 3),
            }
        )
    return pd.DataFrame(table)


def summarize(records: pd.DataFrame) -> dict[str, pd.DataFrame]:
    """yes/no/timeout counts and average runtimes of definite runs, per group and k

    Returns:
        dict: "hw" and "ghw" tables
    """
    return {
        "hw": _summarize_runs(records, "hw_runs"),
        "ghw": _summarize_runs(records, "ghw_runs"),
    }


def write_summary_yaml(tables: dict[str, pd.DataFrame], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(helpers.df_to_yaml(tables))
    logger.debug(f"Summary written to {path}.")
