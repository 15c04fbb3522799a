"""Per-lane cyclic signal plans, color lookup and timeline editing.

A plan assigns every lane an ordered list of colored segments exactly
covering one cycle.  Plans are immutable values; the engine swaps the
active plan between ticks.

JSON schema (files and the wire use the same shape)::

    {
      "cycle_s": 90.0,
      "lanes": {
        "WL": [{"color": "green", "start_s": 0.0, "end_s": 45.0},
               {"color": "red",   "start_s": 45.0, "end_s": 90.0}],
        ...all 12 lanes...
      }
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .core import LANE_IDS


class Color(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"


class Segment(NamedTuple):
    color: Color
    start_s: float
    end_s: float


class PlanError(ValueError):
    """Raised when a signal plan fails validation."""


@dataclass(frozen=True)
class SignalPlan:
    cycle_s: float
    lanes: dict  # lane_id -> tuple[Segment, ...]

    def color_at(self, lane_id: str, t: float) -> Color:
        """Color of the segment containing t (cyclic; a segment owns its start)."""
        tc = t % self.cycle_s
        for seg in self.lanes[lane_id]:
            if seg.start_s <= tc < seg.end_s:
                return seg.color
        # tc == cycle_s can only happen through float noise; wrap to start
        return self.lanes[lane_id][0].color

    def to_dict(self) -> dict:
        return {
            "cycle_s": self.cycle_s,
            "lanes": {
                lane: [
                    {"color": seg.color.value, "start_s": seg.start_s, "end_s": seg.end_s}
                    for seg in segs
                ]
                for lane, segs in self.lanes.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SignalPlan":
        try:
            cycle = float(data["cycle_s"])
            lanes = {}
            for lane, segs in data["lanes"].items():
                lanes[lane] = tuple(
                    Segment(Color(s["color"]), float(s["start_s"]), float(s["end_s"]))
                    for s in segs
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"malformed signal plan: {exc}") from exc
        plan = cls(cycle_s=cycle, lanes=lanes)
        violations = validate_plan(plan)
        if violations:
            raise PlanError("; ".join(violations))
        return plan


def default_plan() -> SignalPlan:
    """90 s cycle, 50% split: E/W green first, N/S the complement."""
    cycle = 90.0
    half = 45.0
    lanes = {}
    for lane in LANE_IDS:
        if lane[0] in ("E", "W"):
            lanes[lane] = (Segment(Color.GREEN, 0.0, half), Segment(Color.RED, half, cycle))
        else:
            lanes[lane] = (Segment(Color.RED, 0.0, half), Segment(Color.GREEN, half, cycle))
    return SignalPlan(cycle_s=cycle, lanes=lanes)


def color_at(plan: SignalPlan, lane_id: str, t: float) -> Color:
    return plan.color_at(lane_id, t)


def validate_plan(plan: SignalPlan) -> list[str]:
    """Check the plan invariants; returns a list of violations (empty = ok)."""
    problems = []
    if not plan.cycle_s > 0:
        problems.append("cycle_s must be > 0")
        return problems
    if set(plan.lanes) != set(LANE_IDS):
        missing = set(LANE_IDS) - set(plan.lanes)
        extra = set(plan.lanes) - set(LANE_IDS)
        if missing:
            problems.append(f"missing lanes: {', '.join(sorted(missing))}")
        if extra:
            problems.append(f"unknown lanes: {', '.join(sorted(extra))}")
        return problems
    for lane in LANE_IDS:
        segs = plan.lanes[lane]
        if not segs:
            problems.append(f"lane {lane}: no segments")
            continue
        if segs[0].start_s != 0.0:
            problems.append(f"lane {lane}: coverage gap [0, {segs[0].start_s}) before first segment")
        for seg in segs:
            if not seg.end_s > seg.start_s:
                problems.append(f"lane {lane}: empty or inverted segment [{seg.start_s}, {seg.end_s})")
        for prev, cur in zip(segs, segs[1:]):
            if cur.start_s < prev.end_s:
                problems.append(
                    f"lane {lane}: overlapping segments [{prev.start_s}, {prev.end_s}) "
                    f"and [{cur.start_s}, {cur.end_s})"
                )
            elif cur.start_s > prev.end_s:
                problems.append(f"lane {lane}: coverage gap [{prev.end_s}, {cur.start_s})")
        if segs[-1].end_s != plan.cycle_s:
            problems.append(f"lane {lane}: coverage ends at {segs[-1].end_s}, not cycle end {plan.cycle_s}")
    return problems


def _merge(segments: list[Segment]) -> tuple[Segment, ...]:
    merged: list[Segment] = []
    for seg in segments:
        if merged and merged[-1].color is seg.color and merged[-1].end_s == seg.start_s:
            merged[-1] = Segment(seg.color, merged[-1].start_s, seg.end_s)
        else:
            merged.append(seg)
    return tuple(merged)


def set_color_behind(plan: SignalPlan, lane_ids, cursor: float, color: Color) -> SignalPlan:
    """Editor gesture: repaint [cursor, cycle_s) of the selected lanes.

    The segment containing the cursor is split; everything before the
    cursor is untouched; adjacent same-color segments merge.  Cursor out
    of [0, cycle_s) is rejected and the plan returned unchanged is never
    half-applied (plans are immutable anyway).
    """
    if not 0.0 <= cursor < plan.cycle_s:
        raise PlanError(f"cursor {cursor} outside [0, {plan.cycle_s})")
    unknown = set(lane_ids) - set(LANE_IDS)
    if unknown:
        raise PlanError(f"unknown lanes: {', '.join(sorted(unknown))}")
    new_lanes = dict(plan.lanes)
    for lane in lane_ids:
        kept = [Segment(s.color, s.start_s, min(s.end_s, cursor))
                for s in plan.lanes[lane] if s.start_s < cursor]
        kept.append(Segment(color, cursor, plan.cycle_s))
        new_lanes[lane] = _merge(kept)
    return SignalPlan(cycle_s=plan.cycle_s, lanes=new_lanes)


def load_plan(path) -> SignalPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return SignalPlan.from_dict(json.load(fh))


def save_plan(plan: SignalPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")
