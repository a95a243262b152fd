"""Neighbourhood retrieval, sub-portfolio selection and schedule construction.

Given a query instance's scaled features, SUNNY looks at the ``k`` closest
knowledge-base instances, picks the smallest set of solvers that solves the
most of them, and splits the time budget into equal slots: each chosen solver
gets one slot per neighbour it solves, and the backup solver gets one slot per
neighbour nobody solves.

Allocations are exact :class:`~fractions.Fraction` seconds; they always sum to
the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .kb import KnowledgeBase, KnowledgeBaseError, ScalingParams, ms_to_seconds, parse_seconds

__all__ = [
    "SunnyConfig",
    "Neighborhood",
    "SubPortfolio",
    "Schedule",
    "SunnyIndex",
    "nearest_neighbors",
    "select_subportfolio",
    "max_solved",
    "build_schedule",
    "schedule_for_neighborhood",
]


@dataclass(frozen=True)
class SunnyConfig:
    """Parameters of one SUNNY run.  ``timeout`` is the budget T in seconds."""

    k: int
    timeout: Fraction
    backup: str
    portfolio: tuple[str, ...]

    def __init__(self, k: int, timeout, backup: str, portfolio: Iterable[str]):
        if isinstance(k, bool) or int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        portfolio = tuple(sorted(portfolio))
        if not portfolio:
            raise ValueError("portfolio must contain at least one solver")
        if len(set(portfolio)) != len(portfolio):
            raise ValueError("portfolio lists a solver twice")
        if len(portfolio) > _kernels.MAX_SOLVERS:
            raise ValueError(f"portfolio larger than {_kernels.MAX_SOLVERS} solvers")
        if backup not in portfolio:
            raise ValueError(f"backup solver {backup!r} is not in the portfolio")
        timeout_ms = _seconds_to_ms(timeout)
        if timeout_ms <= 0:
            raise ValueError("T must be positive")
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "timeout", ms_to_seconds(timeout_ms))
        object.__setattr__(self, "backup", backup)
        object.__setattr__(self, "portfolio", portfolio)

    @property
    def timeout_ms(self) -> int:
        return int(self.timeout * 1000)

    def with_k(self, k: int) -> "SunnyConfig":
        return SunnyConfig(k, self.timeout, self.backup, self.portfolio)


def _seconds_to_ms(value) -> int:
    if isinstance(value, Fraction):
        ms = value * 1000
        if ms.denominator != 1:
            raise KnowledgeBaseError(f"T={value} is not a whole number of milliseconds")
        return int(ms)
    return parse_seconds(value, "T")


@dataclass(frozen=True)
class Neighborhood:
    members: tuple[str, ...]
    distances: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SubPortfolio:
    solvers: tuple[str, ...]
    solved_count: int
    avg_time: Fraction


@dataclass(frozen=True)
class Schedule:
    """Ordered ``(solver, seconds)`` entries plus the metadata that produced them."""

    entries: tuple[tuple[str, Fraction], ...]
    slots: int
    time_slot: Fraction
    k: int
    timeout: Fraction
    subportfolio: SubPortfolio
    neighborhood: Neighborhood

    @property
    def solvers(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.entries)

    def allocation(self, solver: str) -> Fraction:
        for s, t in self.entries:
            if s == solver:
                return t
        return Fraction(0)

    def total(self) -> Fraction:
        return sum((t for _, t in self.entries), Fraction(0))


# squared distances live in [0, 4 * n_features]
DISTANCE_DECIMALS = 12


class SunnyIndex:
    """A knowledge base prepared for repeated queries: features scaled once."""

    def __init__(self, kb: KnowledgeBase, params: ScalingParams):
        if params.dimension != kb.n_features:
            raise KnowledgeBaseError(
                f"scaling fitted on {params.dimension} features, knowledge base has {kb.n_features}"
            )
        self.kb = kb
        self.params = params
        self.scaled = np.ascontiguousarray(params.transform(kb.features))

    def neighbors(self, scaled_query: np.ndarray, k: int) -> Neighborhood:
        q = np.asarray(scaled_query, dtype=np.float64)
        if q.shape != (self.scaled.shape[1],):
            raise KnowledgeBaseError(
                f"dimensionality mismatch: scaled query has {q.shape[-1] if q.ndim else 0} entries, "
                f"expected {self.scaled.shape[1]}"
            )
        if k < 1:
            raise ValueError("k must be positive")
        if k > len(self.kb):
            raise ValueError(f"k={k} exceeds knowledge base size {len(self.kb)}")
        d2 = _kernels.sq_distances(self.scaled, q)
        # rounding absorbs last-ulp noise so that mathematically equal distances
        # tie; instances are in name order, so the stable sort then breaks ties by id
        d2 = np.round(d2, DISTANCE_DECIMALS)
        order = np.argsort(d2, kind="stable")[:k]
        return Neighborhood(
            tuple(self.kb.instances[i] for i in order),
            tuple(float(np.sqrt(d2[i])) for i in order),
        )

    def schedule(self, scaled_query: np.ndarray, config: SunnyConfig) -> Schedule:
        nbh = self.neighbors(scaled_query, config.k)
        return schedule_for_neighborhood(nbh, config, self.kb)


def _effective(kb: KnowledgeBase, rows: np.ndarray, cols: np.ndarray, timeout_ms: int):
    # a budget below the KB timeout turns slower records into timeouts
    if timeout_ms > kb.timeout_ms:
        raise ValueError(f"budget T={timeout_ms / 1000}s exceeds the knowledge-base timeout {kb.timeout}s")
    times = kb.times_ms[np.ix_(rows, cols)]
    solved = kb.solved[np.ix_(rows, cols)] & (times < timeout_ms)
    return np.where(solved, times, timeout_ms), solved


def _neighbor_rows(kb: KnowledgeBase, neighbors: Neighborhood) -> np.ndarray:
    if len(neighbors) == 0:
        raise ValueError("empty neighbourhood")
    return np.array([kb.instance_index(p) for p in neighbors.members], dtype=np.int64)


def nearest_neighbors(
    scaled_query: Sequence[float] | np.ndarray, k: int, kb: KnowledgeBase, params: ScalingParams
) -> Neighborhood:
    """The ``k`` instances closest to the query in scaled Euclidean space, nearest first."""
    return SunnyIndex(kb, params).neighbors(np.asarray(scaled_query, dtype=np.float64), k)


def max_solved(solvers: Iterable[str], neighbors: Neighborhood, kb: KnowledgeBase, timeout=None) -> int:
    """Number of neighbours solved within ``timeout`` by at least one of ``solvers``."""
    solvers = list(solvers)
    if not solvers:
        return 0
    timeout_ms = kb.timeout_ms if timeout is None else _seconds_to_ms(timeout)
    _, solved = _effective(kb, _neighbor_rows(kb, neighbors), kb.solver_indices(solvers), timeout_ms)
    return int(np.count_nonzero(solved.any(axis=1)))


def _best_subset(solved: np.ndarray, times: np.ndarray) -> tuple[int, int, int]:
    """Exact search over columns of a (instances x solvers) matrix.

    Maximises covered rows, then minimises subset size, then total time, then
    picks the lexicographically smallest column tuple.  Returns
    ``(mask, covered, total_time)``.
    """
    p = solved.shape[1]
    weights = np.left_shift(np.int64(1), np.arange(p, dtype=np.int64))
    inst_masks = (solved.astype(np.int64) * weights).sum(axis=1)
    cost = times.sum(axis=0).astype(np.int64)
    target = int(np.count_nonzero(inst_masks))
    for size in range(p + 1):
        cand = _kernels.combination_masks(p, size)
        covered, costs = _kernels.evaluate_subsets(inst_masks, cost, cand)
        hit = np.flatnonzero(covered == target)
        if hit.size:
            # combinations come in lexicographic order; argmin keeps the first minimum
            best = hit[np.argmin(costs[hit])]
            return int(cand[best]), target, int(costs[best])
    raise AssertionError("full portfolio always reaches the target")


def _select(rows: np.ndarray, config: SunnyConfig, kb: KnowledgeBase):
    cols = kb.solver_indices(config.portfolio)
    times, solved = _effective(kb, rows, cols, config.timeout_ms)
    mask, covered, cost = _best_subset(solved, times)
    members = [j for j in range(len(cols)) if (mask >> j) & 1]
    avg = Fraction(cost, 1000 * len(members) * len(rows)) if members else Fraction(0)
    sub = SubPortfolio(tuple(config.portfolio[j] for j in members), covered, avg)
    return sub, members, times, solved


def select_subportfolio(neighbors: Neighborhood, config: SunnyConfig, kb: KnowledgeBase) -> SubPortfolio:
    """Smallest portfolio subset solving the most neighbours; ties by mean runtime, then names."""
    return _select(_neighbor_rows(kb, neighbors), config, kb)[0]


def schedule_for_neighborhood(neighbors: Neighborhood, config: SunnyConfig, kb: KnowledgeBase) -> Schedule:
    rows = _neighbor_rows(kb, neighbors)
    k = len(rows)
    sub, members, times, solved = _select(rows, config, kb)
    covered = sub.solved_count

    per_solver = solved.sum(axis=0)
    slots = int(sum(int(per_solver[j]) for j in members)) + (k - covered)
    time_slot = Fraction(config.timeout_ms, 1000 * slots)
    alloc: dict[int, Fraction] = {j: int(per_solver[j]) * time_slot for j in members}
    b = config.portfolio.index(config.backup)
    alloc[b] = alloc.get(b, Fraction(0)) + (k - covered) * time_slot

    totals = times.sum(axis=0)
    order = sorted((j for j, t in alloc.items() if t > 0), key=lambda j: (int(totals[j]), config.portfolio[j]))
    entries = tuple((config.portfolio[j], alloc[j]) for j in order)
    return Schedule(entries, slots, time_slot, k, config.timeout, sub, neighbors)


def build_schedule(
    query_scaled: Sequence[float] | np.ndarray, config: SunnyConfig, kb: KnowledgeBase, params: ScalingParams
) -> Schedule:
    return SunnyIndex(kb, params).schedule(np.asarray(query_scaled, dtype=np.float64), config)
