"""JSON-lines event files.

One object per line::

    {"shot_id": 17, "tau_us": 550.0, "phase": 1.234, "events": [[vx, vy, vz], ...]}

Velocities are in cm/s. Floats are written with ``repr`` precision, so a
write/read cycle is bit-exact. Metadata goes to a ``<file>.meta.json`` sidecar.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .experiment import ShotEvents

log = logging.getLogger(__name__)

MAX_MALFORMED_FRACTION = 0.01


class MalformedEventsError(InputError):
    """Event file could not be used; ``problems`` lists ``(line_number, message)``."""

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)


def shot_to_line(shot: ShotEvents) -> str:
    return json.dumps({
        "shot_id": int(shot.shot_id),
        "tau_us": float(shot.tau),
        "phase": float(shot.phase_phi),
        "events": shot.events.tolist(),
    }, separators=(",", ":"))


def shot_from_line(line: str) -> ShotEvents:
    d = json.loads(line)
    if not isinstance(d, dict):
        raise ValueError("line is not a JSON object")
    missing = {"shot_id", "tau_us", "phase", "events"} - d.keys()
    if missing:
        raise ValueError(f"missing fields {sorted(missing)}")
    ev = d["events"]
    if not isinstance(ev, list) or any(not isinstance(e, list) or len(e) != 3 for e in ev):
        raise ValueError("events must be a list of [vx, vy, vz] triples")
    return ShotEvents(int(d["shot_id"]), np.array(ev, dtype=float).reshape(-1, 3),
                      float(d["phase"]), float(d["tau_us"]))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_events(path, shots: Iterable[ShotEvents], meta: dict | None = None) -> int:
    """Write shots in order; returns the number of lines."""
    n = 0
    with open(path, "w") as f:
        for s in shots:
            f.write(shot_to_line(s))
            f.write("\n")
            n += 1
    if meta is not None:
        body = dict(meta, shots=n)
        with open(sidecar_path(path), "w") as f:
            json.dump(body, f, indent=2, sort_keys=True)
            f.write("\n")
    return n


def read_events(path, max_malformed_fraction: float = MAX_MALFORMED_FRACTION):
    """Parse an event file into ``(shots, problems)``.

    Malformed lines are skipped and reported with 1-based line numbers. More
    than ``max_malformed_fraction`` of bad lines, or no usable shot, raises
    :class:`MalformedEventsError`.
    """
    shots: list[ShotEvents] = []
    problems: list[tuple[int, str]] = []
    total = 0
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            total += 1
            try:
                shots.append(shot_from_line(line))
            except (ValueError, TypeError, KeyError) as exc:
                problems.append((lineno, str(exc)))
    for lineno, msg in problems:
        log.warning("%s:%d: %s", path, lineno, msg)
    if total == 0:
        raise MalformedEventsError(f"{path}: no events", problems)
    if len(problems) > max_malformed_fraction * total:
        raise MalformedEventsError(
            f"{path}: {len(problems)} of {total} lines malformed "
            f"(limit {max_malformed_fraction:.0%})", problems)
    return shots, problems


def read_meta(path) -> dict | None:
    p = sidecar_path(path)
    if not p.exists():
        return None
    with open(p) as f:
        return json.load(f)
