"""``sunny`` command line.

Exit status: 0 success (for ``run``: instance solved), 1 ``run`` finished
without a solution, 2 usage error, 3 invalid input data or configuration.
Data goes to stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import SunnyConfig, SunnyIndex
from .evaluation import (
    APPROACHES,
    compose_portfolio,
    elect_backup,
    evaluate,
    make_folds,
    report_json,
    reports_csv,
    sweep_csv,
    sweep_k,
)
from .kb import KnowledgeBase, KnowledgeBaseError, fit_scaling, load_knowledge_base, read_features, write_knowledge_base
from .runner import RunnerError, execute_schedule, load_solver_config, training_fallback_order
from .schedule_io import dumps_schedule, loads_schedule
from .synthetic import SyntheticSpec, generate

EXIT_OK, EXIT_UNSOLVED, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_range(text: str) -> list[int]:
    """``"1..20"``, ``"1-20"``, ``"2,4,8"`` or a single integer."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            for sep in ("..", "-"):
                if sep in part:
                    lo, hi = (int(x) for x in part.split(sep, 1))
                    if lo > hi:
                        raise ValueError
                    out.extend(range(lo, hi + 1))
                    break
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"range must be non-empty and positive: {text!r}")
    return out


def _names(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise argparse.ArgumentTypeError("empty name list")
    return names


def _add_kb(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--features", type=Path, required=required, help="features CSV (instance,f1..fD[,feat_time])")
    p.add_argument("--runtimes", type=Path, required=required, help="runtimes CSV (instance,solver,time,solved)")
    p.add_argument("--timeout", default="1800", help="timeout T in seconds (default 1800)")


def _add_folds(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--folds", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for fold cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sunny", description="SUNNY solver-portfolio scheduling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="compute the schedule for one query instance")
    _add_kb(p)
    p.add_argument("--k", type=_positive_int, default=16)
    p.add_argument("--backup", help="backup solver (default: elected over the whole KB)")
    p.add_argument("--portfolio", type=_names, help="comma-separated solvers (default: all KB solvers)")
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query", type=Path, help="features CSV holding the query row")
    q.add_argument("--query-vector", type=lambda s: [float(x) for x in s.split(",")],
                   help="raw feature values, comma-separated")
    p.add_argument("--query-instance", help="row of --query to use (default: the only/first row)")
    p.add_argument("--out", type=Path, help="write the schedule here instead of stdout")

    p = sub.add_parser("evaluate", help="cross-validated PSI/AST of SUNNY and baselines")
    _add_kb(p)
    p.add_argument("--approaches", type=_names, default=list(APPROACHES))
    p.add_argument("--k", type=_positive_int, default=16)
    p.add_argument("--m", type=_positive_int, help="compose a size-m portfolio (default: all solvers)")
    p.add_argument("--portfolio", type=_names)
    p.add_argument("--backup")
    _add_folds(p)
    p.add_argument("--out", type=Path, help="directory for per-approach tables, comparison.csv and report.json")

    p = sub.add_parser("sweep", help="PSI/AST and sub-portfolio sizes over an (m, k) grid")
    _add_kb(p)
    p.add_argument("--k-range", type=_int_range, default=list(range(1, 21)))
    p.add_argument("--m-range", type=_int_range, help="portfolio sizes (default: 2..#solvers)")
    _add_folds(p)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("run", help="execute a schedule with real solver processes")
    p.add_argument("--schedule", type=Path, help="schedule document from 'sunny schedule'")
    _add_kb(p, required=False)
    p.add_argument("--k", type=_positive_int, default=16)
    p.add_argument("--backup")
    p.add_argument("--portfolio", type=_names)
    p.add_argument("--query", type=Path, help="features CSV of the instance (when no --schedule)")
    p.add_argument("--query-instance")
    p.add_argument("--fallback", type=_names, help="fallback order (default: from the KB)")
    p.add_argument("--solvers-config", type=Path, required=True)
    p.add_argument("--instance", type=Path, required=True, help="problem file handed to the solvers")
    p.add_argument("--out", type=Path, help="write the trace here instead of stdout")

    p = sub.add_parser("gen-synthetic", help="write a planted-cluster knowledge base")
    p.add_argument("--clusters", type=_positive_int, default=4)
    p.add_argument("--instances", type=_positive_int, default=200)
    p.add_argument("--solvers", type=_positive_int, default=5)
    p.add_argument("--n-features", type=_positive_int, default=8)
    p.add_argument("--constant-features", type=int, default=0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--timeout", type=_positive_int, default=1800)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="directory for features.csv and runtimes.csv")
    return parser


def _load(args) -> KnowledgeBase:
    return load_knowledge_base(args.features, args.runtimes, args.timeout)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _config(kb: KnowledgeBase, args, portfolio=None) -> SunnyConfig:
    portfolio = portfolio or args.portfolio or list(kb.solvers)
    for s in portfolio:
        kb.solver_index(s)
    backup = args.backup or elect_backup(kb, portfolio)
    return SunnyConfig(args.k, kb.timeout, backup, portfolio)


def _query_vector(args) -> np.ndarray:
    if getattr(args, "query_vector", None) is not None:
        return np.asarray(args.query_vector, dtype=np.float64)
    feats, _ = read_features(args.query)
    if not feats:
        raise KnowledgeBaseError(f"{args.query}: no query rows")
    name = args.query_instance or next(iter(feats))
    if name not in feats:
        raise KnowledgeBaseError(f"{args.query}: no row for {name!r}")
    return np.asarray(feats[name], dtype=np.float64)


def _compute_schedule(kb: KnowledgeBase, args):
    config = _config(kb, args)
    params = fit_scaling(kb)
    raw = _query_vector(args)
    if raw.shape != (kb.n_features,):
        raise KnowledgeBaseError(f"dimensional mismatch: query has {raw.size} features, KB has {kb.n_features}")
    if not np.all(np.isfinite(raw)):
        raise KnowledgeBaseError("non-finite query feature value")
    if config.k > len(kb):
        raise UsageError(f"--k {config.k} exceeds the knowledge base size {len(kb)}")
    return SunnyIndex(kb, params).schedule(params.transform(raw), config)


def cmd_schedule(args) -> int:
    kb = _load(args)
    _emit(dumps_schedule(_compute_schedule(kb, args)), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    kb = _load(args)
    approaches = [a.upper() for a in args.approaches]
    unknown = [a for a in approaches if a not in APPROACHES]
    if unknown:
        raise UsageError(f"unknown approach(es): {', '.join(unknown)}; choose from {', '.join(APPROACHES)}")
    portfolio = None
    if args.m is not None and args.portfolio is None:
        portfolio = list(compose_portfolio(kb, args.m).solvers)
    config = _config(kb, args, portfolio)
    plan = make_folds(kb, args.repeats, args.folds, args.seed)
    reports = evaluate(kb, approaches, config, plan, jobs=args.jobs)
    combined = reports_csv(reports)
    if args.out is None:
        sys.stdout.write(combined)
        return EXIT_OK
    args.out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        (args.out / f"{rep.approach}.csv").write_text(reports_csv([rep]))
    (args.out / "comparison.csv").write_text(combined)
    (args.out / "report.json").write_text(report_json(reports))
    return EXIT_OK


def cmd_sweep(args) -> int:
    kb = _load(args)
    m_range = args.m_range or list(range(2, len(kb.solvers) + 1))
    plan = make_folds(kb, args.repeats, args.folds, args.seed)
    rows = sweep_k(kb, m_range, args.k_range, plan, jobs=args.jobs)
    _emit(sweep_csv(rows), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    commands = load_solver_config(args.solvers_config)
    kb = None
    if args.features is not None or args.runtimes is not None:
        if args.features is None or args.runtimes is None:
            raise UsageError("--features and --runtimes go together")
        kb = _load(args)
    if args.schedule is not None:
        schedule = loads_schedule(args.schedule.read_text())
    elif kb is not None and args.query is not None:
        schedule = _compute_schedule(kb, args)
    else:
        raise UsageError("need --schedule, or --features/--runtimes with --query")
    if args.fallback is not None:
        fallback = args.fallback
    elif kb is not None:
        portfolio = args.portfolio or [s for s in kb.solvers if s in commands]
        fallback = training_fallback_order(kb, portfolio)
    else:
        fallback = []
    trace = execute_schedule(schedule, args.instance, commands, fallback, float(schedule.timeout))
    _emit(trace.to_json(), args.out)
    return EXIT_OK if trace.solved else EXIT_UNSOLVED


def cmd_gen_synthetic(args) -> int:
    spec = SyntheticSpec(
        clusters=args.clusters,
        instances=args.instances,
        solvers=args.solvers,
        features=args.n_features,
        constant_features=args.constant_features,
        noise=args.noise,
        timeout=args.timeout,
        seed=args.seed,
    )
    kb, _ = generate(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    write_knowledge_base(kb, args.out / "features.csv", args.out / "runtimes.csv")
    return EXIT_OK


COMMANDS = {
    "schedule": cmd_schedule,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "run": cmd_run,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sunny {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KnowledgeBaseError, RunnerError, ValueError, OSError) as exc:
        print(f"sunny {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
