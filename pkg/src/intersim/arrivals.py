"""Vehicle generation: per-approach Poisson arrivals, lane assignment, pending queue.

Each approach runs an independent exponential inter-arrival clock at
lambda = flow/3600 per second.  Generated vehicles wait in a per-approach
FIFO until a lane can take them under the spawn-safety rule; placement
into a feasible lane is uniform at random.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Optional

import numpy as np

from .core import APPROACHES, SimConfig, Vehicle
from .driver import safe_distance


def make_vehicle(approach: str, rng: np.random.Generator, cfg: SimConfig,
                 now: float, vid: int) -> Vehicle:
    """Draw a new vehicle for an approach (lane still unassigned).

    Initial speed is uniform in [0.5, 1.0] of the desired cruise speed,
    the equipped flag Bernoulli at the configured ratio.  Draw order is
    fixed: speed first, then the flag.
    """
    v0 = float(rng.uniform(0.5, 1.0)) * cfg.desired_speed
    equipped = bool(rng.random() < cfg.equipped_ratio)
    veh = Vehicle(id=vid, lane_id="", head_pos=0.0, velocity=v0,
                  equipped=equipped, spawn_time=now)
    return veh


def assign_lane(vehicle: Vehicle, lanes, rng: np.random.Generator,
                cfg: SimConfig) -> Optional[str]:
    """Pick a lane satisfying the spawn-safety rule, or None to stay pending.

    A lane is feasible when its rearmost vehicle is at least the safe
    headway (for that vehicle's speed) ahead of the spawn point.  One
    feasible lane is chosen uniformly at random.
    """
    feasible = []
    for lane in lanes:
        rear = lane.rearmost()
        if rear is None or rear.head_pos >= safe_distance(rear.velocity, cfg):
            feasible.append(lane)
    if not feasible:
        return None
    idx = int(rng.integers(0, len(feasible)))
    return feasible[idx].id


SPAWN_BRAKE_RESERVE = 3.0   # m, absorbs reaction delay and noise while braking


def spawn_speed_cap(rear: Optional[Vehicle], cfg: SimConfig) -> float:
    """Highest entry speed from which full braking can still match the
    rearmost vehicle without closing under the minimum headway.

    A reserve distance keeps the entering driver strictly inside the
    feasible braking envelope; entering exactly on it would leave no room
    for the one-tick reaction delay or actuation noise.
    """
    if rear is None:
        return math.inf
    margin = rear.head_pos - cfg.s_headway_min - SPAWN_BRAKE_RESERVE
    if margin <= 0.0:
        return max(rear.velocity, 0.0)
    return math.sqrt(rear.velocity * rear.velocity + 2.0 * cfg.a_max * margin)


class ArrivalProcess:
    """Owns the four arrival clocks, the pending FIFOs and the arrival log."""

    def __init__(self, cfg: SimConfig, rng: np.random.Generator):
        self._rng = rng
        self.lambdas = {a: cfg.flows[a] / 3600.0 for a in APPROACHES}
        self.pending = {a: deque() for a in APPROACHES}
        self.arrival_times = {a: [] for a in APPROACHES}   # continuous instants
        self.generated = {a: 0 for a in APPROACHES}
        self._next = {}
        for a in APPROACHES:   # fixed draw order at start
            self._next[a] = self._draw_gap(a, 0.0)

    def _draw_gap(self, approach: str, t_from: float) -> float:
        lam = self.lambdas[approach]
        if lam <= 0.0:
            return math.inf
        return t_from + float(self._rng.exponential(1.0 / lam))

    def set_flow(self, approach: str, veh_per_hour: float, now: float) -> None:
        """Change demand; the next arrival is redrawn from now (the process
        is memoryless, so no bias)."""
        self.lambdas[approach] = veh_per_hour / 3600.0
        self._next[approach] = self._draw_gap(approach, now)

    def sample_arrival(self, approach: str, t_end: float) -> int:
        """Number of arrivals with instants in the tick window ending at t_end.

        Called once per approach per tick in W,S,E,N order.  Almost always
        0 or 1 at sane demand; each counted arrival consumes one gap draw
        for its successor.
        """
        count = 0
        while self._next[approach] <= t_end:
            arrival_t = self._next[approach]
            self.arrival_times[approach].append(arrival_t)
            self._next[approach] = self._draw_gap(approach, arrival_t)
            count += 1
        return count

    def pending_total(self) -> int:
        return sum(len(q) for q in self.pending.values())
