"""Run a schedule against real solver processes.

Solvers run one after another.  Each gets its allotment; a solver that exits
early without a solution hands its unused time to the next scheduled entry.
Once the schedule is exhausted, solvers that have not run yet are tried in
``fallback_order``, each with the whole remaining budget, until one succeeds or
the budget runs out.

A step that overruns is sent SIGTERM to its process group, then SIGKILL after
:data:`GRACE` seconds.  Times come from :func:`time.monotonic` (wall clock).
"""

from __future__ import annotations

import json
import os
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .kb import KnowledgeBase

__all__ = [
    "GRACE",
    "PLACEHOLDER",
    "DEFAULT_MARKER",
    "RunnerError",
    "SolverCommand",
    "Step",
    "ExecutionTrace",
    "execute_schedule",
    "training_fallback_order",
    "load_solver_config",
]

GRACE = 1.0
PLACEHOLDER = "{instance}"
DEFAULT_MARKER = "----------"
# allotments below this are not worth a process spawn
_MIN_ALLOT = 0.001

SOLVED, TIMEOUT, PREMATURE, ERROR = "solved", "timeout", "premature-exit", "error"


class RunnerError(Exception):
    pass


@dataclass(frozen=True)
class SolverCommand:
    """How to launch one solver.

    ``template`` is split with :func:`shlex.split`; the token holding
    ``{instance}`` gets the instance path.  The solver counts as successful
    once a stdout line equals ``success_marker`` (surrounding whitespace ignored).
    """

    solver: str
    template: str
    success_marker: str = DEFAULT_MARKER

    def __post_init__(self) -> None:
        if self.template.count(PLACEHOLDER) != 1:
            raise RunnerError(f"command for {self.solver!r} must contain {PLACEHOLDER} exactly once")
        if not self.success_marker.strip():
            raise RunnerError(f"empty success marker for {self.solver!r}")

    def argv(self, instance_path: str | os.PathLike) -> list[str]:
        return [tok.replace(PLACEHOLDER, os.fspath(instance_path)) for tok in shlex.split(self.template)]


@dataclass(frozen=True)
class Step:
    solver: str
    allotted: float
    elapsed: float
    outcome: str


@dataclass(frozen=True)
class ExecutionTrace:
    steps: tuple[Step, ...]
    solved: bool
    total_time: float

    def to_dict(self) -> dict:
        return {
            "steps": [
                {"solver": s.solver, "allotted": s.allotted, "elapsed": s.elapsed, "outcome": s.outcome}
                for s in self.steps
            ],
            "final": {"solved": self.solved, "total_time": self.total_time},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def load_solver_config(path: str | Path) -> dict[str, SolverCommand]:
    """Read ``{"solvers": {name: {"command": ..., "success_marker": ...}}}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise RunnerError(f"cannot read solver config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise RunnerError(f"solver config {path} is not valid JSON: {exc}") from None
    entries = doc.get("solvers") if isinstance(doc, dict) else None
    if not isinstance(entries, dict):
        raise RunnerError("solver config needs a top-level 'solvers' object")
    out = {}
    for name, spec in entries.items():
        if not isinstance(spec, dict) or "command" not in spec:
            raise RunnerError(f"solver {name!r}: missing 'command'")
        out[name] = SolverCommand(name, spec["command"], spec.get("success_marker", DEFAULT_MARKER))
    return out


def training_fallback_order(kb: KnowledgeBase, portfolio: Iterable[str]) -> list[str]:
    """Portfolio sorted by number of KB instances solved (descending), then name."""
    portfolio = sorted(set(portfolio))
    counts = kb.solved[:, kb.solver_indices(portfolio)].sum(axis=0)
    return [portfolio[j] for j in sorted(range(len(portfolio)), key=lambda j: (-int(counts[j]), portfolio[j]))]


def _stop(proc: subprocess.Popen) -> None:
    if proc.poll() is not None:
        return
    try:
        os.killpg(proc.pid, signal.SIGTERM)
    except ProcessLookupError:
        return
    try:
        proc.wait(timeout=GRACE)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.wait()


def _run_step(cmd: SolverCommand, instance_path: str, allotted: float) -> tuple[str, float]:
    start = time.monotonic()
    deadline = start + allotted
    try:
        proc = subprocess.Popen(
            cmd.argv(instance_path),
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            stdin=subprocess.DEVNULL,
            text=True,
            bufsize=1,
            start_new_session=True,
        )
    except (OSError, ValueError):
        return ERROR, time.monotonic() - start

    marker = cmd.success_marker.strip()
    wake = threading.Event()
    found: list[float] = []

    def watch() -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            if not found and line.strip() == marker:
                found.append(time.monotonic())
                wake.set()
        wake.set()

    reader = threading.Thread(target=watch, daemon=True)
    reader.start()
    try:
        wake.wait(max(0.0, deadline - time.monotonic()))
        if found:
            return SOLVED, found[0] - start
        if wake.is_set():
            # stdout closed: the process is exiting or has exited
            try:
                proc.wait(timeout=max(0.0, deadline - time.monotonic()))
            except subprocess.TimeoutExpired:
                pass
            else:
                reader.join()
                if found:
                    return SOLVED, found[0] - start
                return PREMATURE, time.monotonic() - start
        _stop(proc)
        return TIMEOUT, time.monotonic() - start
    finally:
        _stop(proc)
        reader.join(timeout=GRACE)


def execute_schedule(
    schedule: Sequence[tuple[str, float]] | object,
    instance_path: str | os.PathLike,
    commands: Mapping[str, SolverCommand],
    fallback_order: Sequence[str],
    timeout: float,
) -> ExecutionTrace:
    """Run ``schedule`` (a :class:`~sunny_portfolio.core.Schedule` or ``(solver, seconds)`` pairs)."""
    entries = [(s, float(t)) for s, t in getattr(schedule, "entries", schedule)]
    T = float(timeout)
    if T <= 0:
        raise RunnerError("timeout must be positive")
    for s, _ in entries:
        if s not in commands:
            raise RunnerError(f"no command configured for scheduled solver {s!r}")
    for s in fallback_order:
        if s not in commands:
            raise RunnerError(f"no command configured for fallback solver {s!r}")
    path = os.fspath(instance_path)
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise RunnerError(f"instance file {path!r} is not readable")

    steps: list[Step] = []
    executed: set[str] = set()
    used = 0.0
    planned = 0.0

    def run(solver: str, allot: float) -> bool:
        nonlocal used
        outcome, elapsed = _run_step(commands[solver], path, allot)
        executed.add(solver)
        used += elapsed
        steps.append(Step(solver, round(allot, 3), round(elapsed, 3), outcome))
        return outcome == SOLVED

    for solver, alloc in entries:
        # entry i may use everything scheduled up to and including it that is still unspent
        planned += alloc
        allot = min(planned, T) - used
        if solver in executed or allot < _MIN_ALLOT:
            continue
        if run(solver, allot):
            return ExecutionTrace(tuple(steps), True, round(used, 3))

    for solver in fallback_order:
        allot = T - used
        if allot < _MIN_ALLOT:
            break
        if solver in executed:
            continue
        if run(solver, allot):
            return ExecutionTrace(tuple(steps), True, round(used, 3))
    return ExecutionTrace(tuple(steps), False, round(used, 3))
