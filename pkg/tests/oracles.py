"""Brute-force reference implementations, written against the public record API only."""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

from sunny_portfolio.kb import KnowledgeBase


def solves(kb: KnowledgeBase, inst: str, solver: str, T: Fraction) -> bool:
    rec = kb.record(inst, solver)
    return rec.solved and rec.time < T


def run_time(kb: KnowledgeBase, inst: str, solver: str, T: Fraction) -> Fraction:
    return kb.record(inst, solver).time if solves(kb, inst, solver, T) else T


def exhaustive_subportfolio(kb, neighbors, portfolio, T):
    """Every subset, keyed (-solved, size, avg time, sorted names)."""
    best = None
    for size in range(len(portfolio) + 1):
        for combo in combinations(sorted(portfolio), size):
            solved = sum(any(solves(kb, p, s, T) for s in combo) for p in neighbors)
            total = sum(run_time(kb, p, s, T) for s in combo for p in neighbors)
            avg = Fraction(total) / (len(combo) * len(neighbors)) if combo else Fraction(0)
            key = (-solved, size, avg, combo)
            if best is None or key < best[0]:
                best = (key, combo, solved, avg)
    return best[1], best[2], best[3]


def exact_scaled(rows: dict[str, list], query: list):
    """Min/max scaling in rational arithmetic; constant columns dropped, query clamped."""
    cols = range(len(query))
    lo = [min(Fraction(v[j]) for v in rows.values()) for j in cols]
    hi = [max(Fraction(v[j]) for v in rows.values()) for j in cols]
    keep = [j for j in cols if lo[j] < hi[j]]

    def scale(v):
        return [min(1, max(-1, 2 * (Fraction(v[j]) - lo[j]) / (hi[j] - lo[j]) - 1)) for j in keep]

    return {n: scale(v) for n, v in rows.items()}, scale(query)


def brute_neighbors(rows: dict[str, list], query: list, k: int):
    """Exact squared distances, full sort, ties by name."""
    dist = sorted((sum((a - b) ** 2 for a, b in zip(v, query)), name) for name, v in rows.items())
    return [n for _, n in dist[:k]], [math.sqrt(d) for d, _ in dist[:k]]


def exhaustive_portfolio(kb: KnowledgeBase, m: int):
    T = kb.timeout
    best = None
    for combo in combinations(kb.solvers, m):
        solved = sum(any(solves(kb, p, s, T) for s in combo) for p in kb.instances)
        total = sum(run_time(kb, p, s, T) for s in combo for p in kb.instances)
        key = (-solved, total, combo)
        if best is None or key < best:
            best = key
    return best[2], -best[0]
