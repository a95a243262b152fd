"""Synthetic knowledge bases with planted clusters.

Every instance belongs to one cluster.  Its informative features are the
cluster centre plus Gaussian noise, and the cluster's designated solver
(``cluster % solvers``) solves it quickly, in under a tenth of the timeout.
The other solvers time out with probability ``1 - slow_solve_prob`` and
otherwise finish late, in the upper three quarters of the timeout.  Optional
constant columns are mixed in at seeded positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kb import KnowledgeBase

__all__ = ["SyntheticSpec", "generate"]


@dataclass(frozen=True)
class SyntheticSpec:
    clusters: int = 4
    instances: int = 200
    solvers: int = 5
    features: int = 8
    constant_features: int = 0
    noise: float = 1.0
    timeout: int = 1800
    slow_solve_prob: float = 0.25
    max_feature_time: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.clusters < 1 or self.solvers < 1 or self.features < 1:
            raise ValueError("clusters, solvers and features must be positive")
        if self.instances < self.clusters:
            raise ValueError("need at least one instance per cluster")
        if self.constant_features < 0 or self.noise < 0 or self.max_feature_time < 0:
            raise ValueError("constant_features, noise and max_feature_time must be non-negative")
        if self.timeout < 10:
            raise ValueError("timeout must be at least 10 seconds")
        if not 0.0 <= self.slow_solve_prob <= 1.0:
            raise ValueError("slow_solve_prob must lie in [0, 1]")


def generate(spec: SyntheticSpec) -> tuple[KnowledgeBase, np.ndarray]:
    """Return the knowledge base and the cluster label of each (name-ordered) instance."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed & (2**64 - 1), 0x5EED])))
    n, m, T_ms = spec.instances, spec.solvers, spec.timeout * 1000

    labels = rng.permutation(np.arange(n) % spec.clusters)
    centres = rng.uniform(-10.0, 10.0, size=(spec.clusters, spec.features))
    informative = centres[labels] + spec.noise * rng.standard_normal((n, spec.features))

    width = spec.features + spec.constant_features
    const_pos = np.sort(rng.choice(width, size=spec.constant_features, replace=False))
    features = np.empty((n, width))
    mask = np.ones(width, dtype=bool)
    mask[const_pos] = False
    features[:, mask] = informative
    features[:, const_pos] = np.round(rng.uniform(-5.0, 5.0, size=spec.constant_features), 3)
    features = np.round(features, 6)

    designated = labels % m
    fast = rng.integers(1000, T_ms // 10, size=(n, m))
    slow = rng.integers(T_ms // 4, T_ms, size=(n, m))
    slow_ok = rng.random((n, m)) < spec.slow_solve_prob
    is_fast = np.arange(m)[None, :] == designated[:, None]
    solved = is_fast | slow_ok
    times = np.where(is_fast, fast, np.where(slow_ok, slow, T_ms)).astype(np.int64)
    cost = rng.integers(0, int(spec.max_feature_time * 1000) + 1, size=n).astype(np.int64)

    digits = max(4, len(str(n - 1)))
    instances = tuple(f"i{i:0{digits}d}" for i in range(n))
    solvers = tuple(f"s{j:02d}" for j in range(m))
    kb = KnowledgeBase(instances, solvers, features, times, solved, cost, T_ms)
    return kb, labels
