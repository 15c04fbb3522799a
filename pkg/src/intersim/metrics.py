"""Delay, stop and throughput accounting plus the four CSV outputs.

Stops are counted per episode: a vehicle dropping below the stop-speed
threshold counts one stop however long it stays there; every tick spent
below the threshold accumulates stop time.  Vehicles are visible to the
statistics while approaching (q_in and q_block) and finalize at the stop
line; the exit segment is presentation only.

Averages ("per vehicle") divide by the number of vehicles placed into a
lane so far; vehicles still waiting in the pending queue have not entered
the road and do not count.
"""

from __future__ import annotations

import math
import os
import time
from array import array

from .core import LANE_IDS, SimConfig


class OutputError(OSError):
    """Raised when the result directory or a CSV cannot be written."""


def theoretical_travel_time(v0: float, cfg: SimConfig) -> float:
    """Ideal approach traversal: full-throttle to the road limit, then cruise.

    Falls back to the pure-acceleration root when the limit is not reached
    within the approach.
    """
    L = cfg.approach_length
    if L <= 0.0:
        return 0.0
    a = cfg.a_max
    vl = cfg.v_limit
    t_acc = (vl - v0) / a
    d_acc = v0 * t_acc + 0.5 * a * t_acc * t_acc
    if d_acc > L:
        return (-v0 + math.sqrt(v0 * v0 + 2.0 * a * L)) / a
    return t_acc + (L - d_acc) / vl


class MetricsAccumulator:
    """Per-tick and per-vehicle statistics backing the CSV outputs."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        n = len(LANE_IDS)
        self.lane_stops = [0] * n          # cumulative stop episodes
        self.lane_stop_ticks = [0] * n     # cumulative ticks below threshold
        self.lane_departures = [0] * n     # cumulative stop-line crossings
        self.placed_total = 0
        self.crossed_total = 0
        self.car_rows: list[tuple] = []    # (id, init_v, theory, act, delta)
        self.cross_times: list[float] = []
        self.delta_sum = 0.0
        # one row per tick, 12 lane values each, flattened
        self._stop_rows = array("q")
        self._dep_rows = array("q")
        self._stop_tick_rows = array("q")
        self._placed_at_tick = array("q")
        self.ticks_recorded = 0

    # ------------------------------------------------------------------ events

    def on_place(self, vehicle) -> None:
        self.placed_total += 1
        vehicle.in_stop = vehicle.velocity < self.cfg.stop_speed_threshold

    def on_cross(self, vehicle, t: float, lane_index: int) -> None:
        vehicle.crossed_time = t
        self.lane_departures[lane_index] += 1
        self.crossed_total += 1
        theory = theoretical_travel_time(vehicle.init_velocity, self.cfg)
        act = t - vehicle.spawn_time
        delta = act - theory
        self.delta_sum += delta
        self.car_rows.append((vehicle.id, vehicle.init_velocity, theory, act, delta))
        self.cross_times.append(t)

    def record_tick(self, lanes) -> None:
        """Sample stop state after the motion update; one row per tick."""
        thr = self.cfg.stop_speed_threshold
        stops = self.lane_stops
        stop_ticks = self.lane_stop_ticks
        for i, lane in enumerate(lanes):
            for v in lane.q_in:
                if v.velocity < thr:
                    if not v.in_stop:
                        stops[i] += 1
                        v.in_stop = True
                    stop_ticks[i] += 1
                else:
                    v.in_stop = False
            for v in lane.q_block:
                if v.velocity < thr:
                    if not v.in_stop:
                        stops[i] += 1
                        v.in_stop = True
                    stop_ticks[i] += 1
                else:
                    v.in_stop = False
        self._stop_rows.extend(stops)
        self._dep_rows.extend(self.lane_departures)
        self._stop_tick_rows.extend(stop_ticks)
        self._placed_at_tick.append(self.placed_total)
        self.ticks_recorded += 1

    # ------------------------------------------------------------- aggregates

    @property
    def total_stops(self) -> int:
        return sum(self.lane_stops)

    @property
    def total_stop_time_s(self) -> float:
        return sum(self.lane_stop_ticks) * self.cfg.tick_s

    def avg_delay_s(self) -> float:
        return self.delta_sum / self.crossed_total if self.crossed_total else 0.0

    def avg_stops_per_vehicle(self) -> float:
        return self.total_stops / self.placed_total if self.placed_total else 0.0

    def avg_stop_time_s(self) -> float:
        return self.total_stop_time_s / self.placed_total if self.placed_total else 0.0

    def avg_stop_time_series(self) -> list[float]:
        """Average stop time per vehicle at every recorded tick (the
        steady-state diagnostic series)."""
        tick_s = self.cfg.tick_s
        n = len(LANE_IDS)
        rows = self._stop_tick_rows
        out = []
        for k in range(self.ticks_recorded):
            total = sum(rows[k * n:(k + 1) * n])
            placed = self._placed_at_tick[k]
            out.append(total * tick_s / placed if placed else 0.0)
        return out

    def summary(self, since_s: float = 0.0) -> dict:
        """Aggregate over vehicles that crossed at or after since_s (raw rows
        are never discarded; this is a read-side view)."""
        deltas = [row[4] for row, t in zip(self.car_rows, self.cross_times) if t >= since_s]
        completed = len(deltas)
        return {
            "completed": completed,
            "mean_delay_s": sum(deltas) / completed if completed else 0.0,
            "total_stops": self.total_stops,
            "total_stop_time_s": self.total_stop_time_s,
            "placed": self.placed_total,
        }


# ------------------------------------------------------------------ CSV output

_CAR_HEADER = "car_id,init_velocity,thoritical_time,act_time,delta"
_LANE_COLS = ",".join(LANE_IDS)
_STOP_HEADER = f"tick,{_LANE_COLS},total_stops,avg_stops_per_vehicle"
_ROAD_HEADER = f"tick,{_LANE_COLS},total_departed,avg"
_STOP_TIME_HEADER = f"tick,{_LANE_COLS},total_stop_time,avg_stop_time_per_vehicle"


def run_dir_name(mode_name: str, when: float | None = None) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.localtime(when))
    return f"{stamp}-{mode_name}"


def write_outputs(acc: MetricsAccumulator, out_parent, mode_name: str) -> str:
    """Write car/stop/road/stop_time CSVs under out_parent/<stamp>-<mode>/.

    Real-valued cells use a fixed 3-decimal format, counters plain
    integers, so repeated runs with the same seed are byte-identical.
    Returns the created directory path.
    """
    name = run_dir_name(mode_name)
    out_dir = os.path.join(out_parent, name)
    n = 2
    while os.path.exists(out_dir):   # same second, same mode: suffix
        out_dir = os.path.join(out_parent, f"{name}-{n}")
        n += 1
    try:
        os.makedirs(out_dir)
        _write_car(acc, os.path.join(out_dir, "car.csv"))
        _write_per_tick(acc, os.path.join(out_dir, "stop.csv"), _STOP_HEADER,
                        acc._stop_rows, scale=None)
        _write_per_tick(acc, os.path.join(out_dir, "road.csv"), _ROAD_HEADER,
                        acc._dep_rows, scale=None, road_avg=True)
        _write_per_tick(acc, os.path.join(out_dir, "stop_time.csv"), _STOP_TIME_HEADER,
                        acc._stop_tick_rows, scale=acc.cfg.tick_s)
    except OSError as exc:
        raise OutputError(f"cannot write results under {out_parent}: {exc}") from exc
    return out_dir


def _write_car(acc: MetricsAccumulator, path: str) -> None:
    lines = [_CAR_HEADER]
    for vid, init_v, theory, act, delta in acc.car_rows:
        lines.append(f"{vid},{init_v:.3f},{theory:.3f},{act:.3f},{delta:.3f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def _write_per_tick(acc: MetricsAccumulator, path: str, header: str,
                    rows: array, scale, road_avg: bool = False) -> None:
    """Emit one row per tick of 12 cumulative lane values plus total and average.

    scale=None keeps integer counts; a float scale converts tick counts to
    seconds.  The road table's average is per lane; the others are per
    vehicle entered so far.
    """
    n = len(LANE_IDS)
    tick_s = acc.cfg.tick_s
    placed = acc._placed_at_tick
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        lines = [header]
        for k in range(acc.ticks_recorded):
            vals = rows[k * n:(k + 1) * n]
            total = sum(vals)
            t_label = f"{(k + 1) * tick_s:.3f}"
            if scale is None:
                cells = ",".join(map(str, vals))
                if road_avg:
                    avg = total / n
                else:
                    avg = total / placed[k] if placed[k] else 0.0
                lines.append(f"{t_label},{cells},{total},{avg:.3f}")
            else:
                cells = ",".join(f"{v * scale:.3f}" for v in vals)
                avg = total * scale / placed[k] if placed[k] else 0.0
                lines.append(f"{t_label},{cells},{total * scale:.3f},{avg:.3f}")
            if len(lines) >= 20000:
                fh.write("\n".join(lines))
                fh.write("\n")
                lines = []
        if lines:
            fh.write("\n".join(lines))
            fh.write("\n")
