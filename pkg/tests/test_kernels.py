from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from sunny_portfolio import _kernels


def test_backend_reported():
    assert _kernels.BACKEND in ("numba", "numpy")


def test_combination_masks_order():
    masks = _kernels.combination_masks(4, 2).tolist()
    expected = [sum(1 << j for j in c) for c in combinations(range(4), 2)]
    assert masks == expected
    assert _kernels.combination_masks(3, 0).tolist() == [0]
    with pytest.raises(ValueError):
        _kernels.combination_masks(3, 4)


@pytest.mark.parametrize("seed", range(5))
def test_sq_distances_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    train = rng.normal(size=(40, 6))
    q = rng.normal(size=6)
    expected = ((train - q) ** 2).sum(axis=1)
    np.testing.assert_allclose(_kernels.sq_distances(train, q), expected, rtol=1e-12)
    np.testing.assert_allclose(_kernels.numpy_sq_distances(train, q), expected, rtol=1e-12)
    np.testing.assert_allclose(_kernels._sq_distances(train, q), expected, rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_evaluate_subsets_backends_agree(seed):
    rng = np.random.default_rng(seed)
    m, n = 7, 30
    solved = rng.random((n, m)) < 0.3
    inst_masks = (solved * (1 << np.arange(m))).sum(axis=1).astype(np.int64)
    cost = rng.integers(0, 10**6, size=m)
    cand = np.arange(1 << m, dtype=np.int64)
    a = _kernels.evaluate_subsets(inst_masks, cost, cand)
    b = _kernels.numpy_evaluate_subsets(inst_masks, cost, cand)
    c = _kernels._evaluate_subsets(inst_masks, cost, cand)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.array_equal(c[0], b[0]) and np.array_equal(c[1], b[1])
    for mask in (0, 5, (1 << m) - 1):
        members = [j for j in range(m) if mask >> j & 1]
        assert a[0][mask] == int(solved[:, members].any(axis=1).sum()) if members else a[0][mask] == 0
        assert a[1][mask] == int(cost[members].sum())


def test_large_inputs_agree_across_paths():
    rng = np.random.default_rng(99)
    m, n = 12, 500
    solved = rng.random((n, m)) < 0.2
    inst_masks = (solved * (1 << np.arange(m))).sum(axis=1).astype(np.int64)
    cost = rng.integers(0, 10**6, size=m)
    cand = np.arange(1 << m, dtype=np.int64)
    assert cand.size * n >= _kernels.SMALL_WORK
    a = _kernels.evaluate_subsets(inst_masks, cost, cand)
    b = _kernels.numpy_evaluate_subsets(inst_masks, cost, cand)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    train = rng.normal(size=(2000, 8))
    q = rng.normal(size=8)
    np.testing.assert_allclose(_kernels.sq_distances(train, q), _kernels.numpy_sq_distances(train, q), rtol=1e-12)


def test_small_inputs_skip_compiled_path(monkeypatch):
    def boom(*_):
        raise AssertionError("compiled kernel called for a tiny input")

    monkeypatch.setattr(_kernels, "_sq_distances", boom)
    monkeypatch.setattr(_kernels, "_evaluate_subsets", boom)
    _kernels.sq_distances(np.zeros((5, 2)), np.zeros(2))
    _kernels.evaluate_subsets(np.array([1, 2]), np.array([3, 4]), np.array([0, 1, 2, 3]))
