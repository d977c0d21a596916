"""Export schedules and simulation runs as Chrome trace-event timelines.

The output loads directly into ``chrome://tracing`` or Perfetto: one track
per pipeline stage plus one per link direction for transfers.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Optional

from .engine import OpKind, TransferRecord
from .schedule import Schedule

_US = 1_000_000.0  # trace events are in microseconds

_COLORS = {
    OpKind.FORWARD: "thread_state_running",
    OpKind.BACKWARD: "rail_response",
    OpKind.WEIGHT_UPDATE: "thread_state_runnable",
    OpKind.WEIGHT_SYNC: "rail_idle",
    OpKind.OPTIMIZER_STEP: "rail_load",
}


def timeline_events(
    schedule: Schedule,
    transfers: Iterable[TransferRecord] = (),
) -> List[dict]:
    events: List[dict] = []
    for s in range(schedule.num_stages):
        for op in schedule.stage_ops(s):
            name = op.kind.value
            if op.microbatch_id is not None:
                name = f"{name}{op.microbatch_id}"
            events.append({
                "name": name,
                "ph": "X",
                "pid": 0,
                "tid": s,
                "ts": op.start * _US,
                "dur": (op.end - op.start) * _US,
                "cname": _COLORS.get(op.kind, "generic_work"),
                "args": {
                    "kind": op.kind.value,
                    "stage": op.stage,
                    "iteration": op.iteration,
                    "microbatch": op.microbatch_id,
                    "samples": op.size,
                },
            })
    link_tracks: dict = {}
    for tr in transfers:
        key = (tr.link_id, tr.direction)
        if key not in link_tracks:
            link_tracks[key] = len(link_tracks)
        events.append({
            "name": f"{tr.direction} mb{tr.microbatch_id}",
            "ph": "X",
            "pid": 1,
            "tid": link_tracks[key],
            "ts": tr.start * _US,
            "dur": (tr.end - tr.start) * _US,
            "args": {
                "link": tr.link_id,
                "direction": tr.direction,
                "iteration": tr.iteration,
                "samples": tr.size,
            },
        })
    meta: List[dict] = [
        {"name": "process_name", "ph": "M", "pid": 0,
         "args": {"name": "stages"}},
        {"name": "process_name", "ph": "M", "pid": 1,
         "args": {"name": "links"}},
    ]
    for s in range(schedule.num_stages):
        meta.append({"name": "thread_name", "ph": "M", "pid": 0, "tid": s,
                     "args": {"name": f"stage {s}"}})
    for (link, direction), tid in link_tracks.items():
        meta.append({"name": "thread_name", "ph": "M", "pid": 1, "tid": tid,
                     "args": {"name": f"link {link} {direction}"}})
    return meta + events


def write_timeline(
    schedule: Schedule,
    path,
    transfers: Iterable[TransferRecord] = (),
) -> None:
    doc = {"traceEvents": timeline_events(schedule, transfers),
           "displayTimeUnit": "ms"}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def render_text(schedule: Schedule, width: int = 78) -> str:
    """Compact ASCII rendering of a schedule, one row per stage."""
    if schedule.makespan <= 0:
        return "(empty schedule)"
    scale = width / schedule.makespan
    rows = []
    for s in range(schedule.num_stages):
        row = [" "] * width
        for op in schedule.stage_ops(s):
            lo = min(int(op.start * scale), width - 1)
            hi = min(max(int(op.end * scale), lo + 1), width)
            for i in range(lo, hi):
                row[i] = op.kind.value
        rows.append(f"s{s} |" + "".join(row) + "|")
    return "\n".join(rows)
