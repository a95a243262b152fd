"""Offline evaluation: portfolio composition, cross-validation, schedule
simulation against recorded runtimes, baselines and the k sweep.

Times inside this module are exact ``Fraction`` seconds; reports convert to
decimal text only when written out.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import SunnyConfig, SunnyIndex, Schedule
from .kb import KnowledgeBase, KnowledgeBaseError, fit_scaling

__all__ = [
    "APPROACHES",
    "FoldPlan",
    "SimulationOutcome",
    "CellResult",
    "EvaluationReport",
    "PortfolioSpec",
    "SweepRow",
    "compose_portfolio",
    "elect_backup",
    "make_folds",
    "simulate_schedule",
    "simulate_entries",
    "run_sunny_eval",
    "run_baseline",
    "evaluate",
    "sweep_k",
    "report_csv",
    "reports_csv",
    "report_json",
    "sweep_csv",
]

APPROACHES = ("SUNNY", "VBS", "SBS", "KNN", "EQU")
MAX_COMPOSE_SOLVERS = 20


# -- portfolio composition ------------------------------------------------------

@dataclass(frozen=True)
class PortfolioSpec:
    m: int
    solvers: tuple[str, ...]
    potential_solved: int
    avg_time: Fraction


def compose_portfolio(kb: KnowledgeBase, m: int) -> PortfolioSpec:
    """The size-``m`` solver set solving the most KB instances.

    Ties go to the lowest mean runtime over all (solver, instance) pairs,
    then to the lexicographically smallest name tuple.
    """
    n_solvers = len(kb.solvers)
    if n_solvers > MAX_COMPOSE_SOLVERS:
        raise ValueError(f"exact composition supports at most {MAX_COMPOSE_SOLVERS} solvers, KB has {n_solvers}")
    if not 2 <= m <= n_solvers:
        raise ValueError(f"portfolio size m={m} outside [2, {n_solvers}]")
    weights = np.left_shift(np.int64(1), np.arange(n_solvers, dtype=np.int64))
    inst_masks = (kb.solved.astype(np.int64) * weights).sum(axis=1)
    cost = kb.times_ms.sum(axis=0)
    cand = _kernels.combination_masks(n_solvers, m)
    covered, costs = _kernels.evaluate_subsets(inst_masks, cost, cand)
    best_cov = covered.max()
    hit = np.flatnonzero(covered == best_cov)
    best = hit[np.argmin(costs[hit])]
    mask = int(cand[best])
    solvers = tuple(s for j, s in enumerate(kb.solvers) if (mask >> j) & 1)
    return PortfolioSpec(m, solvers, int(best_cov), Fraction(int(costs[best]), 1000 * m * len(kb)))


def elect_backup(kb: KnowledgeBase, portfolio: Iterable[str], instances: Iterable[str] | None = None) -> str:
    """Portfolio member solving the most instances; ties by lower total runtime, then name."""
    portfolio = sorted(set(portfolio))
    if not portfolio:
        raise ValueError("empty portfolio")
    rows = slice(None) if instances is None else [kb.instance_index(i) for i in instances]
    cols = kb.solver_indices(portfolio)
    solved = kb.solved[rows][:, cols].sum(axis=0)
    total = kb.times_ms[rows][:, cols].sum(axis=0)
    best = min(range(len(portfolio)), key=lambda j: (-int(solved[j]), int(total[j]), portfolio[j]))
    return portfolio[best]


# -- folds ---------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Repeated k-fold partition.  Repeat and fold numbers start at 1.

    Each repeat shuffles the name-sorted instance list with numpy's PCG64
    generator seeded by ``SeedSequence([seed, repeat])`` and cuts the
    permutation into ``folds`` contiguous chunks (``numpy.array_split``: the
    first ``n % folds`` chunks hold one extra instance).
    """

    repeats: int
    folds: int
    seed: int
    assignment: dict[tuple[int, int], tuple[str, ...]] = field(repr=False)

    def cells(self) -> list[tuple[int, int]]:
        return sorted(self.assignment)

    def test_set(self, repeat: int, fold: int) -> tuple[str, ...]:
        return self.assignment[(repeat, fold)]

    def training_set(self, repeat: int, fold: int) -> tuple[str, ...]:
        out = []
        for f in range(1, self.folds + 1):
            if f != fold:
                out.extend(self.assignment[(repeat, f)])
        return tuple(sorted(out))


def make_folds(kb: KnowledgeBase | Sequence[str], repeats: int = 5, folds: int = 5, seed: int = 0) -> FoldPlan:
    instances = sorted(kb.instances if isinstance(kb, KnowledgeBase) else kb)
    if repeats < 1:
        raise ValueError("repeats must be positive")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(instances):
        raise ValueError(f"{folds} folds but only {len(instances)} instances")
    assignment = {}
    for r in range(1, repeats + 1):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), r])))
        perm = rng.permutation(len(instances))
        for f, chunk in enumerate(np.array_split(perm, folds), start=1):
            assignment[(r, f)] = tuple(sorted(instances[i] for i in chunk))
    return FoldPlan(repeats, folds, seed, assignment)


# -- simulation ----------------------------------------------------------------

@dataclass(frozen=True)
class SimulationOutcome:
    instance: str
    solved: bool
    time: Fraction


def simulate_entries(
    entries: Sequence[tuple[str, Fraction]],
    instance: str,
    kb: KnowledgeBase,
    timeout: Fraction,
    feature_cost: bool = True,
) -> SimulationOutcome:
    """Replay ``entries`` in order against the recorded runtimes of ``instance``.

    The clock starts at the instance's feature-extraction time when
    ``feature_cost`` is set.  A solver succeeds when its recorded runtime fits
    in its allocation and the finish time does not pass ``timeout``.
    """
    i = kb.instance_index(instance)
    elapsed = Fraction(int(kb.feature_cost_ms[i]), 1000) if feature_cost else Fraction(0)
    for solver, alloc in entries:
        try:
            j = kb.solver_index(solver)
        except KnowledgeBaseError:
            raise KnowledgeBaseError(f"scheduled solver {solver!r} is not in the knowledge base") from None
        if kb.solved[i, j]:
            t = Fraction(int(kb.times_ms[i, j]), 1000)
            if t <= alloc:
                finish = elapsed + t
                if finish <= timeout:
                    return SimulationOutcome(instance, True, finish)
                return SimulationOutcome(instance, False, timeout)
        elapsed += alloc
    return SimulationOutcome(instance, False, timeout)


def simulate_schedule(
    schedule: Schedule, instance: str, kb: KnowledgeBase, feature_cost: bool = True
) -> SimulationOutcome:
    return simulate_entries(schedule.entries, instance, kb, schedule.timeout, feature_cost)


# -- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    repeat: int
    fold: int
    n: int
    solved: int
    total_time: Fraction
    subportfolio_sizes: tuple[int, ...] = ()

    @property
    def psi(self) -> Fraction:
        return Fraction(100 * self.solved, self.n)

    @property
    def ast(self) -> Fraction:
        return self.total_time / self.n


@dataclass(frozen=True)
class EvaluationReport:
    approach: str
    timeout: Fraction
    cells: tuple[CellResult, ...]

    def cell(self, repeat: int, fold: int) -> CellResult:
        for c in self.cells:
            if (c.repeat, c.fold) == (repeat, fold):
                return c
        raise KeyError((repeat, fold))

    def repeats(self) -> list[int]:
        return sorted({c.repeat for c in self.cells})

    def repeat_mean(self, repeat: int) -> tuple[Fraction, Fraction]:
        cs = [c for c in self.cells if c.repeat == repeat]
        return sum((c.psi for c in cs), Fraction(0)) / len(cs), sum((c.ast for c in cs), Fraction(0)) / len(cs)

    @property
    def mean_psi(self) -> Fraction:
        reps = self.repeats()
        return sum((self.repeat_mean(r)[0] for r in reps), Fraction(0)) / len(reps)

    @property
    def mean_ast(self) -> Fraction:
        reps = self.repeats()
        return sum((self.repeat_mean(r)[1] for r in reps), Fraction(0)) / len(reps)

    @property
    def subportfolio_sizes(self) -> tuple[int, ...]:
        return tuple(s for c in self.cells for s in c.subportfolio_sizes)


def _num(x: Fraction) -> str:
    return f"{float(x):.6f}"


def _report_rows(report: EvaluationReport) -> list[list[str]]:
    rows = [[report.approach, str(c.repeat), str(c.fold), _num(c.psi), _num(c.ast)] for c in report.cells]
    for r in report.repeats():
        psi, ast = report.repeat_mean(r)
        rows.append([report.approach, str(r), "avg", _num(psi), _num(ast)])
    rows.append([report.approach, "avg", "avg", _num(report.mean_psi), _num(report.mean_ast)])
    return rows


def reports_csv(reports: Sequence[EvaluationReport]) -> str:
    """``approach,repeat,fold,psi,ast`` rows; each approach ends with its
    per-repeat ``avg`` rows and an overall ``avg,avg`` row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["approach", "repeat", "fold", "psi", "ast"])
    for rep in reports:
        w.writerows(_report_rows(rep))
    return buf.getvalue()


def report_csv(report: EvaluationReport) -> str:
    return reports_csv([report])


def report_json(reports: Sequence[EvaluationReport]) -> str:
    """Per approach, per repeat: one PSI/AST pair per fold plus the repeat average."""
    doc = []
    for rep in reports:
        repeats = []
        for r in rep.repeats():
            psi, ast = rep.repeat_mean(r)
            repeats.append({
                "repeat": r,
                "folds": [
                    {"fold": c.fold, "n": c.n, "psi": float(c.psi), "ast": float(c.ast)}
                    for c in rep.cells if c.repeat == r
                ],
                "avg": {"psi": float(psi), "ast": float(ast)},
            })
        doc.append({
            "approach": rep.approach,
            "T": float(rep.timeout),
            "repeats": repeats,
            "avg": {"psi": float(rep.mean_psi), "ast": float(rep.mean_ast)},
        })
    return json.dumps(doc, indent=2) + "\n"


# -- evaluation ----------------------------------------------------------------

def _check_portfolio(kb: KnowledgeBase, config: SunnyConfig) -> None:
    for s in config.portfolio:
        kb.solver_index(s)
    if config.timeout_ms > kb.timeout_ms:
        raise ValueError(f"T={config.timeout} exceeds the knowledge-base timeout {kb.timeout}")


def _sunny_cell(kb: KnowledgeBase, config: SunnyConfig, plan: FoldPlan, cell: tuple[int, int]) -> CellResult:
    r, f = cell
    train = kb.restrict(plan.training_set(r, f))
    if config.k > len(train):
        raise ValueError(f"k={config.k} exceeds training-set size {len(train)}")
    params = fit_scaling(train)
    index = SunnyIndex(train, params)
    test = plan.test_set(r, f)
    solved, total, sizes = 0, Fraction(0), []
    for inst in test:
        q = params.transform(kb.features[kb.instance_index(inst)])
        sched = index.schedule(q, config)
        out = simulate_schedule(sched, inst, kb, feature_cost=True)
        solved += out.solved
        total += out.time
        sizes.append(len(sched.subportfolio.solvers))
    return CellResult(r, f, len(test), solved, total, tuple(sizes))


def _baseline_cell(kind: str, kb: KnowledgeBase, config: SunnyConfig, plan: FoldPlan, cell: tuple[int, int]) -> CellResult:
    r, f = cell
    T = config.timeout
    T_ms = config.timeout_ms
    port = list(config.portfolio)
    cols = kb.solver_indices(port)
    test = plan.test_set(r, f)
    train_names = plan.training_set(r, f)
    solved, total = 0, Fraction(0)

    if kind == "VBS":
        for inst in test:
            i = kb.instance_index(inst)
            ok = kb.solved[i, cols] & (kb.times_ms[i, cols] < T_ms)
            if ok.any():
                solved += 1
                total += Fraction(int(kb.times_ms[i, cols][ok].min()), 1000)
            else:
                total += T
        return CellResult(r, f, len(test), solved, total)

    if kind == "SBS":
        best = elect_backup(kb, port)
        for inst in test:
            out = simulate_entries([(best, T)], inst, kb, T, feature_cost=False)
            solved += out.solved
            total += out.time
        return CellResult(r, f, len(test), solved, total)

    if kind == "EQU":
        sums = kb.times_ms[:, cols].sum(axis=0)
        order = sorted(range(len(port)), key=lambda j: (int(sums[j]), port[j]))
        share = T / len(port)
        entries = [(port[j], share) for j in order]
        for inst in test:
            out = simulate_entries(entries, inst, kb, T, feature_cost=False)
            solved += out.solved
            total += out.time
        return CellResult(r, f, len(test), solved, total)

    if kind == "KNN":
        train = kb.restrict(train_names)
        if config.k > len(train):
            raise ValueError(f"k={config.k} exceeds training-set size {len(train)}")
        params = fit_scaling(train)
        index = SunnyIndex(train, params)
        tcols = train.solver_indices(port)
        for inst in test:
            q = params.transform(kb.features[kb.instance_index(inst)])
            nbh = index.neighbors(q, config.k)
            rows = [train.instance_index(p) for p in nbh.members]
            t = train.times_ms[np.ix_(rows, tcols)]
            ok = train.solved[np.ix_(rows, tcols)] & (t < T_ms)
            t = np.where(ok, t, T_ms)
            cnt, tot = ok.sum(axis=0), t.sum(axis=0)
            j = min(range(len(port)), key=lambda j: (-int(cnt[j]), int(tot[j]), port[j]))
            out = simulate_entries([(port[j], T)], inst, kb, T, feature_cost=True)
            solved += out.solved
            total += out.time
        return CellResult(r, f, len(test), solved, total)

    raise ValueError(f"unknown approach {kind!r}")


def _run_cells(fn, args_for_cell, cells, jobs: int) -> list[CellResult]:
    if jobs <= 1 or len(cells) <= 1:
        return [fn(*args_for_cell(c)) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futures = [ex.submit(fn, *args_for_cell(c)) for c in cells]
        return [fut.result() for fut in futures]


def run_sunny_eval(kb: KnowledgeBase, config: SunnyConfig, plan: FoldPlan, jobs: int = 1) -> EvaluationReport:
    """Cross-validated SUNNY: scaling fitted per training fold, feature time charged."""
    _check_portfolio(kb, config)
    cells = _run_cells(_sunny_cell, lambda c: (kb, config, plan, c), plan.cells(), jobs)
    return EvaluationReport("SUNNY", config.timeout, tuple(cells))


def run_baseline(kind: str, kb: KnowledgeBase, config: SunnyConfig, plan: FoldPlan, jobs: int = 1) -> EvaluationReport:
    """VBS, SBS, KNN or EQU over the same folds and portfolio as SUNNY.

    Only KNN consults features, so only KNN is charged feature-extraction
    time.  SBS (best solver by solved count) and the EQU solver order are
    reference points taken over the whole knowledge base; KNN learns from
    the training fold only.
    """
    kind = kind.upper()
    if kind not in APPROACHES or kind == "SUNNY":
        raise ValueError(f"unknown baseline {kind!r}")
    _check_portfolio(kb, config)
    cells = _run_cells(_baseline_cell, lambda c: (kind, kb, config, plan, c), plan.cells(), jobs)
    return EvaluationReport(kind, config.timeout, tuple(cells))


def evaluate(
    kb: KnowledgeBase, approaches: Iterable[str], config: SunnyConfig, plan: FoldPlan, jobs: int = 1
) -> list[EvaluationReport]:
    out = []
    for a in approaches:
        a = a.upper()
        if a == "SUNNY":
            out.append(run_sunny_eval(kb, config, plan, jobs))
        else:
            out.append(run_baseline(a, kb, config, plan, jobs))
    return out


# -- k sweep -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    m: int
    k: int
    psi: Fraction
    ast: Fraction
    avg_subpf_size: Fraction
    max_subpf_size: int


def sweep_k(
    kb: KnowledgeBase,
    m_range: Iterable[int],
    k_range: Iterable[int],
    plan: FoldPlan,
    timeout=None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Mean PSI/AST and sub-portfolio size statistics over an (m, k) grid.

    The size-m portfolio comes from :func:`compose_portfolio` and its backup
    from :func:`elect_backup`, both over the whole knowledge base.
    """
    m_range, k_range = list(m_range), list(k_range)
    if not m_range or not k_range:
        raise ValueError("empty sweep range")
    T = kb.timeout if timeout is None else timeout
    rows = []
    for m in m_range:
        spec = compose_portfolio(kb, m)
        backup = elect_backup(kb, spec.solvers)
        for k in k_range:
            rep = run_sunny_eval(kb, SunnyConfig(k, T, backup, spec.solvers), plan, jobs)
            sizes = rep.subportfolio_sizes
            rows.append(SweepRow(m, k, rep.mean_psi, rep.mean_ast, Fraction(sum(sizes), len(sizes)), max(sizes)))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "k", "psi", "ast", "avg_subpf_size", "max_subpf_size"])
    for r in rows:
        w.writerow([r.m, r.k, _num(r.psi), _num(r.ast), _num(r.avg_subpf_size), r.max_subpf_size])
    return buf.getvalue()
