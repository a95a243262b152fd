"""JSON (de)serialisation of :class:`~sunny_portfolio.core.Schedule`.

Layout, keys in this order, two-space indent, trailing newline::

    {
      "format": "sunny-schedule",
      "version": 1,
      "k": 5,
      "T": "1800",
      "slots": 6,
      "time_slot": "300",
      "subportfolio": {"solvers": [...], "solved_count": 4, "avg_time": "6352/5"},
      "neighborhood": [{"instance": "p1", "distance": 0.0}, ...],
      "entries": [{"solver": "s4", "seconds": 600.0, "exact": "600"}, ...]
    }

Quoted numbers are exact rationals in seconds, written ``"n"`` or ``"n/d"``
(``str(fractions.Fraction)``).  ``seconds`` is the nearest double to
``exact``; consumers that need the budget identity should read ``exact``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .core import Neighborhood, Schedule, SubPortfolio

FORMAT = "sunny-schedule"
VERSION = 1


def schedule_to_dict(schedule: Schedule) -> dict[str, Any]:
    sub = schedule.subportfolio
    return {
        "format": FORMAT,
        "version": VERSION,
        "k": schedule.k,
        "T": str(schedule.timeout),
        "slots": schedule.slots,
        "time_slot": str(schedule.time_slot),
        "subportfolio": {
            "solvers": list(sub.solvers),
            "solved_count": sub.solved_count,
            "avg_time": str(sub.avg_time),
        },
        "neighborhood": [
            {"instance": p, "distance": d}
            for p, d in zip(schedule.neighborhood.members, schedule.neighborhood.distances)
        ],
        "entries": [{"solver": s, "seconds": float(t), "exact": str(t)} for s, t in schedule.entries],
    }


def dumps_schedule(schedule: Schedule) -> str:
    return json.dumps(schedule_to_dict(schedule), indent=2) + "\n"


def schedule_from_dict(doc: dict[str, Any]) -> Schedule:
    if doc.get("format") != FORMAT:
        raise ValueError("not a sunny-schedule document")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported schedule version {doc.get('version')!r}")
    sub = doc["subportfolio"]
    nbh = doc["neighborhood"]
    return Schedule(
        entries=tuple((e["solver"], Fraction(e["exact"])) for e in doc["entries"]),
        slots=int(doc["slots"]),
        time_slot=Fraction(doc["time_slot"]),
        k=int(doc["k"]),
        timeout=Fraction(doc["T"]),
        subportfolio=SubPortfolio(tuple(sub["solvers"]), int(sub["solved_count"]), Fraction(sub["avg_time"])),
        neighborhood=Neighborhood(tuple(n["instance"] for n in nbh), tuple(float(n["distance"]) for n in nbh)),
    )


def loads_schedule(text: str) -> Schedule:
    return schedule_from_dict(json.loads(text))
