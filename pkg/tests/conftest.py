from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from sunny_portfolio.kb import KnowledgeBase, load_knowledge_base

DATA = Path(__file__).parent / "data"
GOLDEN_FEATURES = DATA / "golden_features.csv"
GOLDEN_RUNTIMES = DATA / "golden_runtimes.csv"


@pytest.fixture
def golden_kb() -> KnowledgeBase:
    return load_knowledge_base(GOLDEN_FEATURES, GOLDEN_RUNTIMES, 1800)


def random_kb(
    rng: np.random.Generator,
    n: int,
    m: int,
    d: int = 3,
    timeout_s: int = 100,
    p_solved: float = 0.5,
    whole_seconds: bool = False,
    feature_cost: bool = False,
) -> KnowledgeBase:
    """Random KB with small integer-valued features so distance ties happen."""
    T = timeout_s * 1000
    solved = rng.random((n, m)) < p_solved
    if whole_seconds:
        times = rng.integers(0, timeout_s, size=(n, m)) * 1000
    else:
        times = rng.integers(0, T, size=(n, m))
    times = np.where(solved, times, T)
    feats = rng.integers(-3, 4, size=(n, d)).astype(float)
    cost = rng.integers(0, 5, size=n) * 1000 if feature_cost else np.zeros(n, dtype=np.int64)
    instances = tuple(f"p{i:03d}" for i in range(n))
    solvers = tuple(f"s{j:02d}" for j in range(m))
    return KnowledgeBase(instances, solvers, feats, times, solved, cost, T)
