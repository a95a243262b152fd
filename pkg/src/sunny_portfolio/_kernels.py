"""Hot numeric kernels: squared distances and subset coverage scoring.

Each kernel has a numba implementation and a pure-numpy one with identical
results.  Numba is used when it imports and ``SUNNY_DISABLE_NUMBA`` is unset
(or ``0``); set ``SUNNY_DISABLE_NUMBA=1`` to force the numpy path.  Inputs
smaller than ``SMALL_WORK`` element operations always take the numpy path:
there a compiled call saves nothing and the first one pays for compilation.

Subsets are int64 bitmasks over solver positions, so portfolios are limited
to 62 solvers.  Coverage counts are exact integers; costs are integer
milliseconds.
"""

from __future__ import annotations

import os
from functools import lru_cache
from itertools import combinations

import numpy as np

__all__ = [
    "BACKEND",
    "MAX_SOLVERS",
    "SMALL_WORK",
    "sq_distances",
    "evaluate_subsets",
    "combination_masks",
    "numpy_sq_distances",
    "numpy_evaluate_subsets",
]

MAX_SOLVERS = 62
SMALL_WORK = 4096
_CHUNK = 1 << 14


def numpy_sq_distances(train: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = train - query[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def numpy_evaluate_subsets(
    inst_masks: np.ndarray, solver_cost: np.ndarray, cand: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """For every candidate mask: number of instances covered, summed solver cost."""
    m = solver_cost.shape[0]
    counts = np.empty(cand.shape[0], dtype=np.int64)
    costs = np.empty(cand.shape[0], dtype=np.int64)
    bit = np.arange(m, dtype=np.int64)
    # bound the (chunk x n) temporary
    step = max(1, _CHUNK * 16 // max(1, inst_masks.shape[0]))
    for lo in range(0, cand.shape[0], step):
        c = cand[lo : lo + step]
        counts[lo : lo + step] = np.count_nonzero((c[:, None] & inst_masks[None, :]) != 0, axis=1)
        bits = (c[:, None] >> bit[None, :]) & 1
        costs[lo : lo + step] = bits @ solver_cost
    return counts, costs


try:
    if os.environ.get("SUNNY_DISABLE_NUMBA", "0") not in ("", "0"):
        raise ImportError("numba disabled by SUNNY_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    njit = None

if njit is not None:

    @njit(cache=True)
    def _nb_sq_distances(train, query):
        n, d = train.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(d):
                t = train[i, j] - query[j]
                acc += t * t
            out[i] = acc
        return out

    @njit(cache=True)
    def _nb_evaluate_subsets(inst_masks, solver_cost, cand):
        C = cand.shape[0]
        m = solver_cost.shape[0]
        counts = np.empty(C, dtype=np.int64)
        costs = np.empty(C, dtype=np.int64)
        for c in range(C):
            mask = cand[c]
            cnt = 0
            for p in range(inst_masks.shape[0]):
                if inst_masks[p] & mask:
                    cnt += 1
            counts[c] = cnt
            tot = 0
            for j in range(m):
                if (mask >> j) & 1:
                    tot += solver_cost[j]
            costs[c] = tot
        return counts, costs

    BACKEND = "numba"
    _sq_distances = _nb_sq_distances
    _evaluate_subsets = _nb_evaluate_subsets
else:
    BACKEND = "numpy"
    _sq_distances = numpy_sq_distances
    _evaluate_subsets = numpy_evaluate_subsets


def sq_distances(train: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance from ``query`` to every row of ``train``."""
    train = np.ascontiguousarray(train, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if train.size < SMALL_WORK:
        return numpy_sq_distances(train, query)
    return _sq_distances(train, query)


def evaluate_subsets(
    inst_masks: np.ndarray, solver_cost: np.ndarray, cand: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Score candidate solver subsets.

    ``inst_masks[p]`` has bit ``j`` set when solver ``j`` solves instance ``p``.
    Returns ``(covered, cost)`` per candidate, where ``covered`` counts the
    instances solved by at least one member and ``cost`` sums ``solver_cost``
    over the members.
    """
    inst_masks = np.ascontiguousarray(inst_masks, dtype=np.int64)
    solver_cost = np.ascontiguousarray(solver_cost, dtype=np.int64)
    cand = np.ascontiguousarray(cand, dtype=np.int64)
    if cand.shape[0] * max(inst_masks.shape[0], solver_cost.shape[0]) < SMALL_WORK:
        return numpy_evaluate_subsets(inst_masks, solver_cost, cand)
    return _evaluate_subsets(inst_masks, solver_cost, cand)


@lru_cache(maxsize=256)
def _combination_masks(m: int, size: int) -> np.ndarray:
    out = np.fromiter(
        (sum(1 << j for j in combo) for combo in combinations(range(m), size)),
        dtype=np.int64,
    )
    out.setflags(write=False)
    return out


def combination_masks(m: int, size: int) -> np.ndarray:
    """All ``size``-subsets of ``range(m)`` as bitmasks, in lexicographic order of index tuples."""
    if not 0 <= m <= MAX_SOLVERS:
        raise ValueError(f"at most {MAX_SOLVERS} solvers supported")
    if not 0 <= size <= m:
        raise ValueError("subset size out of range")
    return _combination_masks(m, size)
