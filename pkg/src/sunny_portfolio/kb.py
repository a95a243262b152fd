"""Knowledge base loading, validation and feature scaling.

All durations are held as integer milliseconds (``int64``) so that every
downstream sum and comparison is exact.  Instances and solvers are stored in
name order; the order of rows in the input files never matters.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "KnowledgeBaseError",
    "KnowledgeBase",
    "RuntimeRecord",
    "ScalingParams",
    "load_knowledge_base",
    "read_features",
    "parse_seconds",
    "fit_scaling",
    "apply_scaling",
    "ms_to_seconds",
]


class KnowledgeBaseError(ValueError):
    """Raised for malformed or inconsistent knowledge-base input."""


def parse_seconds(text: str | float | int | Decimal, what: str = "time") -> int:
    """Parse a decimal number of seconds into integer milliseconds.

    More than millisecond precision is rejected rather than rounded.
    """
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation:
        raise KnowledgeBaseError(f"{what}: not a decimal number: {text!r}") from None
    if not value.is_finite():
        raise KnowledgeBaseError(f"{what}: not finite: {text!r}")
    ms = value * 1000
    if ms != ms.to_integral_value():
        raise KnowledgeBaseError(f"{what}: finer than millisecond precision: {text!r}")
    return int(ms)


def ms_to_seconds(ms: int) -> Fraction:
    return Fraction(int(ms), 1000)


@dataclass(frozen=True)
class RuntimeRecord:
    instance: str
    solver: str
    time: Fraction  # seconds
    solved: bool


@dataclass(frozen=True, eq=False)
class KnowledgeBase:
    """Immutable training data: features and one runtime record per (instance, solver).

    ``times_ms[i, j]`` and ``solved[i, j]`` refer to ``instances[i]`` and
    ``solvers[j]``.  Unsolved records always carry the timeout.
    """

    instances: tuple[str, ...]
    solvers: tuple[str, ...]
    features: np.ndarray
    times_ms: np.ndarray
    solved: np.ndarray
    feature_cost_ms: np.ndarray
    timeout_ms: int
    _inst_index: dict = field(init=False, repr=False, compare=False)
    _solver_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise KnowledgeBaseError("timeout must be positive")
        _check_names(self.instances, "instance")
        _check_names(self.solvers, "solver")
        if list(self.instances) != sorted(self.instances) or list(self.solvers) != sorted(self.solvers):
            raise KnowledgeBaseError("instances and solvers must be in name order")
        n, m = len(self.instances), len(self.solvers)
        if n == 0 or m == 0:
            raise KnowledgeBaseError("knowledge base needs at least one instance and one solver")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise KnowledgeBaseError("feature matrix shape does not match instances")
        if not np.all(np.isfinite(feats)):
            raise KnowledgeBaseError("non-finite feature value")
        times = np.asarray(self.times_ms, dtype=np.int64)
        solved = np.asarray(self.solved, dtype=bool)
        cost = np.asarray(self.feature_cost_ms, dtype=np.int64)
        if times.shape != (n, m) or solved.shape != (n, m):
            raise KnowledgeBaseError("runtime matrix shape does not match instances x solvers")
        if cost.shape != (n,) or np.any(cost < 0):
            raise KnowledgeBaseError("feature costs must be one non-negative value per instance")
        if np.any(times < 0):
            raise KnowledgeBaseError("negative runtime")
        if np.any(solved & (times >= self.timeout_ms)):
            raise KnowledgeBaseError("solved record with runtime not below the timeout")
        times = np.where(solved, times, self.timeout_ms)
        for name, arr in (("features", feats), ("times_ms", times), ("solved", solved), ("feature_cost_ms", cost)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_inst_index", {s: i for i, s in enumerate(self.instances)})
        object.__setattr__(self, "_solver_index", {s: j for j, s in enumerate(self.solvers)})

    @property
    def timeout(self) -> Fraction:
        return ms_to_seconds(self.timeout_ms)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.instances)

    def instance_index(self, name: str) -> int:
        try:
            return self._inst_index[name]
        except KeyError:
            raise KnowledgeBaseError(f"unknown instance {name!r}") from None

    def solver_index(self, name: str) -> int:
        try:
            return self._solver_index[name]
        except KeyError:
            raise KnowledgeBaseError(f"unknown solver {name!r}") from None

    def solver_indices(self, names: Iterable[str]) -> np.ndarray:
        return np.array([self.solver_index(s) for s in names], dtype=np.int64)

    def record(self, instance: str, solver: str) -> RuntimeRecord:
        i, j = self.instance_index(instance), self.solver_index(solver)
        return RuntimeRecord(instance, solver, ms_to_seconds(self.times_ms[i, j]), bool(self.solved[i, j]))

    def records(self) -> list[RuntimeRecord]:
        return [self.record(i, s) for i in self.instances for s in self.solvers]

    def feature_cost(self, instance: str) -> Fraction:
        return ms_to_seconds(self.feature_cost_ms[self.instance_index(instance)])

    def restrict(self, instances: Iterable[str]) -> "KnowledgeBase":
        """Sub-knowledge-base over the given instances (all solvers kept)."""
        names = sorted(set(instances))
        idx = np.array([self.instance_index(s) for s in names], dtype=np.int64)
        return KnowledgeBase(
            instances=tuple(names),
            solvers=self.solvers,
            features=self.features[idx],
            times_ms=self.times_ms[idx],
            solved=self.solved[idx],
            feature_cost_ms=self.feature_cost_ms[idx],
            timeout_ms=self.timeout_ms,
        )

    def rescaled(self, factor: Fraction | int) -> "KnowledgeBase":
        """Copy with every runtime, feature cost and the timeout multiplied by ``factor``.

        The products must stay whole milliseconds.
        """
        factor = Fraction(factor)

        def scale(arr: np.ndarray) -> np.ndarray:
            out = np.empty(arr.shape, dtype=np.int64)
            for pos, v in np.ndenumerate(arr):
                p = v * factor
                if p.denominator != 1:
                    raise KnowledgeBaseError("rescaling leaves sub-millisecond durations")
                out[pos] = int(p)
            return out

        timeout = Fraction(self.timeout_ms) * factor
        if timeout.denominator != 1:
            raise KnowledgeBaseError("rescaling leaves a sub-millisecond timeout")
        return KnowledgeBase(
            instances=self.instances,
            solvers=self.solvers,
            features=self.features,
            times_ms=scale(self.times_ms),
            solved=self.solved,
            feature_cost_ms=scale(self.feature_cost_ms),
            timeout_ms=int(timeout),
        )

    @classmethod
    def from_records(
        cls,
        features: Mapping[str, Sequence[float]],
        runtimes: Iterable[tuple[str, str, float | str, bool]],
        timeout: float | str,
        feature_cost: Mapping[str, float | str] | None = None,
    ) -> "KnowledgeBase":
        """Build from plain Python containers.  ``runtimes`` holds ``(instance, solver, seconds, solved)``."""
        timeout_ms = parse_seconds(timeout, "timeout")
        if timeout_ms <= 0:
            raise KnowledgeBaseError("timeout must be positive")
        instances = sorted(features)
        _check_names(instances, "instance")
        dims = {len(v) for v in features.values()}
        if len(dims) > 1:
            raise KnowledgeBaseError(f"feature rows have differing dimensionality: {sorted(dims)}")
        feats = np.array([[float(x) for x in features[i]] for i in instances], dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(len(instances), 0)

        cells: dict[tuple[str, str], tuple[int, bool]] = {}
        for inst, solver, seconds, solved in runtimes:
            if inst not in features:
                raise KnowledgeBaseError(f"runtime for unknown instance {inst!r}")
            if not solver:
                raise KnowledgeBaseError("empty solver name")
            key = (inst, solver)
            if key in cells:
                raise KnowledgeBaseError(f"duplicate runtime record for {key}")
            ms = parse_seconds(seconds, f"time of {key}")
            if ms < 0:
                raise KnowledgeBaseError(f"negative runtime for {key}")
            if solved and ms >= timeout_ms:
                raise KnowledgeBaseError(f"solved record {key} has runtime {seconds} not below timeout {timeout}")
            cells[key] = (ms, bool(solved))
        solvers = sorted({s for _, s in cells})
        if not solvers:
            raise KnowledgeBaseError("no runtime records")
        times = np.empty((len(instances), len(solvers)), dtype=np.int64)
        solved_arr = np.empty((len(instances), len(solvers)), dtype=bool)
        for i, inst in enumerate(instances):
            for j, solver in enumerate(solvers):
                try:
                    ms, ok = cells[(inst, solver)]
                except KeyError:
                    raise KnowledgeBaseError(f"missing runtime record for ({inst!r}, {solver!r})") from None
                times[i, j] = ms
                solved_arr[i, j] = ok
        cost = np.zeros(len(instances), dtype=np.int64)
        for inst, sec in (feature_cost or {}).items():
            if inst not in features:
                raise KnowledgeBaseError(f"feature cost for unknown instance {inst!r}")
            cost[instances.index(inst)] = parse_seconds(sec, f"feat_time of {inst!r}")
        if np.any(cost < 0):
            raise KnowledgeBaseError("negative feature extraction time")
        return cls(tuple(instances), tuple(solvers), feats, times, solved_arr, cost, timeout_ms)


def _check_names(names: Sequence[str], what: str) -> None:
    seen = set()
    for name in names:
        if not isinstance(name, str) or not name.strip():
            raise KnowledgeBaseError(f"empty {what} identifier")
        if name in seen:
            raise KnowledgeBaseError(f"duplicate {what} identifier {name!r}")
        seen.add(name)


# -- file formats -----------------------------------------------------------

def _rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise KnowledgeBaseError(f"cannot read {path}: {exc.strerror}") from None
    rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise KnowledgeBaseError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_features(path: str | Path) -> tuple[dict[str, list[float]], dict[str, str]]:
    """Read a features file: header ``instance,f1,...,fD[,feat_time]``.

    Returns ``(features, feature_cost)`` keyed by instance id.
    """
    header, rows = _rows(path)
    if not header or header[0] != "instance":
        raise KnowledgeBaseError(f"{path}: header must start with 'instance'")
    has_cost = header[-1] == "feat_time"
    n_feat = len(header) - 1 - int(has_cost)
    features: dict[str, list[float]] = {}
    cost: dict[str, str] = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise KnowledgeBaseError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(row)} (dimensional mismatch)"
            )
        inst = row[0]
        if not inst:
            raise KnowledgeBaseError(f"{path}:{lineno}: empty instance identifier")
        if inst in features:
            raise KnowledgeBaseError(f"{path}:{lineno}: duplicate instance identifier {inst!r}")
        try:
            values = [float(x) for x in row[1 : 1 + n_feat]]
        except ValueError:
            raise KnowledgeBaseError(f"{path}:{lineno}: non-numeric feature value") from None
        if not all(math.isfinite(v) for v in values):
            raise KnowledgeBaseError(f"{path}:{lineno}: non-finite feature value")
        features[inst] = values
        if has_cost:
            cost[inst] = row[-1]
    return features, cost


def _read_runtimes(path: str | Path) -> list[tuple[str, str, str, bool]]:
    header, rows = _rows(path)
    if header != ["instance", "solver", "time", "solved"]:
        raise KnowledgeBaseError(f"{path}: header must be 'instance,solver,time,solved'")
    out = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise KnowledgeBaseError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
        inst, solver, time, flag = row
        if flag not in ("0", "1"):
            raise KnowledgeBaseError(f"{path}:{lineno}: solved must be 0 or 1, got {flag!r}")
        out.append((inst, solver, time, flag == "1"))
    return out


def load_knowledge_base(features_file: str | Path, runtimes_file: str | Path, timeout: float | str) -> KnowledgeBase:
    features, cost = read_features(features_file)
    runtimes = _read_runtimes(runtimes_file)
    return KnowledgeBase.from_records(features, runtimes, timeout, cost)


def write_knowledge_base(kb: KnowledgeBase, features_file: str | Path, runtimes_file: str | Path) -> None:
    """Write ``kb`` in the two-file text format read by :func:`load_knowledge_base`."""
    def fmt_ms(ms: int) -> str:
        return f"{ms // 1000}.{ms % 1000:03d}"

    with open(features_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", *(f"f{j + 1}" for j in range(kb.n_features)), "feat_time"])
        for i, inst in enumerate(kb.instances):
            w.writerow([inst, *(repr(float(x)) for x in kb.features[i]), fmt_ms(int(kb.feature_cost_ms[i]))])
    with open(runtimes_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "solver", "time", "solved"])
        for i, inst in enumerate(kb.instances):
            for j, solver in enumerate(kb.solvers):
                w.writerow([inst, solver, fmt_ms(int(kb.times_ms[i, j])), int(kb.solved[i, j])])


# -- scaling ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalingParams:
    """Per-feature training minima/maxima and the indices of non-constant features."""

    minimum: np.ndarray
    maximum: np.ndarray
    retained: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalingParams):
            return NotImplemented
        return (
            np.array_equal(self.minimum, other.minimum)
            and np.array_equal(self.maximum, other.maximum)
            and np.array_equal(self.retained, other.retained)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def dimension(self) -> int:
        return self.minimum.shape[0]

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Scale a single vector or a ``(n, D)`` matrix of raw features."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape[-1] != self.dimension:
            raise KnowledgeBaseError(
                f"dimensionality mismatch: expected {self.dimension} features, got {raw.shape[-1]}"
            )
        lo = self.minimum[self.retained]
        span = self.maximum[self.retained] - lo
        scaled = 2.0 * (raw[..., self.retained] - lo) / span - 1.0
        return np.clip(scaled, -1.0, 1.0)


def fit_scaling(kb: KnowledgeBase, training: Iterable[str] | None = None) -> ScalingParams:
    """Learn min/max over the training instances (all of ``kb`` when omitted).

    A feature is dropped when its training minimum equals its maximum exactly.
    """
    if training is None:
        rows = kb.features
    else:
        names = list(training)
        if not names:
            raise KnowledgeBaseError("empty training set")
        rows = kb.features[[kb.instance_index(s) for s in names]]
    if rows.shape[0] == 0:
        raise KnowledgeBaseError("empty training set")
    lo = rows.min(axis=0)
    hi = rows.max(axis=0)
    retained = np.flatnonzero(lo < hi)
    for arr in (lo, hi, retained):
        arr.setflags(write=False)
    return ScalingParams(lo, hi, retained)


def apply_scaling(params: ScalingParams, raw: Sequence[float] | np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1:
        raise KnowledgeBaseError("apply_scaling expects a single feature vector")
    if not np.all(np.isfinite(raw)):
        raise KnowledgeBaseError("non-finite feature value")
    return params.transform(raw)
