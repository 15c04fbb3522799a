"""The per-tick pipeline, wall-clock pacing, guidance hook and anomaly scan.

A world is one intersection: 12 lanes, the arrival process, the active
signal plan, a metrics accumulator and a single seeded RNG.  Exactly one
thread advances a world; independent worlds can run in parallel freely.
External commands arrive through a mailbox and are applied between ticks,
so a tick never observes a half-applied change.

Tick order: (1) arrivals and pending placement; (2) acceleration commands
front to back per lane; (3) noise and kinematic integration; (4) stopped
queue update, stop-line crossings, exit despawns; (5) metrics; (6) anomaly
scan; (7) clock advance.
"""

from __future__ import annotations

import hashlib
import queue
import struct
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional

from .arrivals import ArrivalProcess, assign_lane, make_vehicle, spawn_speed_cap
from .core import (APPROACHES, LANE_IDS, LANE_INDEX, ConfigError, Lane, Regime,
                   SimConfig, Vehicle, kinematics_step, make_rng)
from .driver import GapState, natural_acceleration
from .metrics import MetricsAccumulator, write_outputs
from .queue_control import control_qin_head, update_qblock
from .signals import Color, SignalPlan, default_plan, validate_plan


class SpeedMode(Enum):
    """Wall-clock pacing; never touches physics."""

    FAST = "fast"            # 100x real time
    MEDIUM = "medium"        # 10x
    SLOW = "slow"            # real time
    VERY_SLOW = "very-slow"  # 0.1x, for watching single maneuvers
    HEADLESS = "headless"    # unpaced, as fast as the host allows

    @property
    def multiplier(self) -> Optional[float]:
        return {"fast": 100.0, "medium": 10.0, "slow": 1.0,
                "very-slow": 0.1, "headless": None}[self.value]

    def steps_per_second(self, tick_s: float) -> Optional[float]:
        m = self.multiplier
        return None if m is None else m / tick_s


class WorldStatus(Enum):
    RUNNING = "running"
    ENDED = "ended"
    ABORTED = "aborted"


@dataclass
class Anomaly:
    kind: str                 # "collision" | "overflow"
    lane_id: str
    vehicle_ids: tuple
    tick: int
    message: str


class InvariantError(AssertionError):
    """A per-tick invariant scan failed; indicates an engine bug."""


# ----------------------------------------------------------------- guidance

class VehicleInfo(NamedTuple):
    id: int
    lane_id: str
    head_pos: float
    velocity: float
    distance_to_stop_line: float


class LeaderInfo(NamedTuple):
    dx: float
    dv: float
    velocity: float
    accel: float


class SignalInfo(NamedTuple):
    color: str
    time_in_cycle: float
    cycle_s: float


# A guidance strategy maps (vehicle, leader-or-None, signal, clock) to an
# acceleration command, or None to fall back to natural driving.  It is
# consulted only for equipped vehicles still approaching the line, and its
# command passes through exactly the same clamps as natural driving.
GuidanceStrategy = Callable[[VehicleInfo, Optional[LeaderInfo], SignalInfo, float],
                            Optional[float]]


def passthrough_strategy(vehicle, leader, signal, t):
    """Default guidance: always defer to natural driving."""
    return None


class CruiseAdvisory:
    """Example strategy: hold an advisory cruise speed on green.

    Illustrative only, not a calibrated control law.  Defers to natural
    driving on red/yellow or whenever the leader is close, so it cannot
    steer a vehicle into the queue.
    """

    def __init__(self, target_speed: float, gain: float = 0.8,
                 clear_gap: float = 40.0):
        self.target_speed = target_speed
        self.gain = gain
        self.clear_gap = clear_gap

    def __call__(self, vehicle, leader, signal, t):
        if signal.color != Color.GREEN.value:
            return None
        if leader is not None and leader.dx < self.clear_gap:
            return None
        return self.gain * (self.target_speed - vehicle.velocity)


# -------------------------------------------------------------------- world

class World:
    """One intersection advanced tick by tick."""

    def __init__(self, cfg: SimConfig, plan: Optional[SignalPlan] = None,
                 strategy: Optional[GuidanceStrategy] = None):
        cfg.validate()
        self.cfg = cfg
        self.plan = plan if plan is not None else default_plan()
        problems = validate_plan(self.plan)
        if problems:
            raise ConfigError("invalid signal plan: " + "; ".join(problems))
        self.strategy = strategy
        self.rng = make_rng(cfg.seed)
        self.lanes = [Lane(lid) for lid in LANE_IDS]
        self._lane_by_id = {lane.id: lane for lane in self.lanes}
        self._lanes_by_approach = {
            a: [self._lane_by_id[a + m] for m in ("L", "C", "R")] for a in APPROACHES
        }
        self.arrivals = ArrivalProcess(cfg, self.rng)
        self.metrics = MetricsAccumulator(cfg)
        self.tick_index = 0
        self.status = WorldStatus.RUNNING
        self.anomaly: Optional[Anomaly] = None
        self._next_vehicle_id = 1
        self.spawned_total = 0
        self.equipped_spawned = 0
        self.despawned_total = 0
        self._trace: Optional["hashlib._Hash"] = None

    # ------------------------------------------------------------ properties

    @property
    def time_s(self) -> float:
        return self.tick_index * self.cfg.tick_s

    def lane(self, lane_id: str) -> Lane:
        return self._lane_by_id[lane_id]

    def vehicles_on_road(self) -> int:
        return sum(len(l.q_in) + len(l.q_block) for l in self.lanes)

    def enable_trace(self) -> None:
        """Start hashing the full per-tick vehicle state (for equivalence
        checks between runs; costs a little, off by default)."""
        self._trace = hashlib.blake2b(digest_size=16)

    def trace_digest(self) -> str:
        if self._trace is None:
            raise ValueError("trace not enabled")
        return self._trace.hexdigest()

    # ----------------------------------------------------------- world edits

    def set_flow(self, approach: str, veh_per_hour: float) -> None:
        if approach not in APPROACHES:
            raise ConfigError(f"unknown approach: {approach}")
        if veh_per_hour < 0:
            raise ConfigError("flow must be >= 0")
        self.cfg.flows[approach] = float(veh_per_hour)
        self.arrivals.set_flow(approach, float(veh_per_hour), self.time_s)

    def set_ratio(self, ratio: float) -> None:
        if not 0.0 <= ratio <= 1.0:
            raise ConfigError("equipped_ratio must be in [0, 1]")
        self.cfg.equipped_ratio = float(ratio)

    def set_plan(self, plan: SignalPlan) -> None:
        problems = validate_plan(plan)
        if problems:
            raise ConfigError("invalid signal plan: " + "; ".join(problems))
        self.plan = plan

    def end(self) -> None:
        if self.status is WorldStatus.RUNNING:
            self.status = WorldStatus.ENDED

    # ------------------------------------------------------------------ tick

    def step(self) -> None:
        if self.status is not WorldStatus.RUNNING:
            raise RuntimeError(f"cannot step a {self.status.value} world")
        cfg = self.cfg
        dt = cfg.tick_s
        t0 = self.tick_index * dt
        t1 = (self.tick_index + 1) * dt

        self._spawn_and_place(t0, t1)

        colors = {lid: self.plan.color_at(lid, t0) for lid in LANE_IDS}
        movers: list[Vehicle] = []
        stopping: list[bool] = []
        for lane in self.lanes:
            self._compute_lane_accels(lane, colors[lane.id], t0, movers, stopping)
        self._integrate(movers, stopping, dt)

        for lane in self.lanes:
            self._update_stop_line(lane, colors[lane.id], dt, t1)

        self.metrics.record_tick(self.lanes)
        self._scan(t1)
        self.tick_index += 1
        if self._trace is not None:
            self._update_trace()

    # ------------------------------------------------------------ tick parts

    def _spawn_and_place(self, t0: float, t1: float) -> None:
        cfg = self.cfg
        arrivals = self.arrivals
        for a in APPROACHES:
            n = arrivals.sample_arrival(a, t1)
            for _ in range(n):
                veh = make_vehicle(a, self.rng, cfg, now=t0, vid=self._next_vehicle_id)
                self._next_vehicle_id += 1
                self.spawned_total += 1
                arrivals.generated[a] += 1
                if veh.equipped:
                    self.equipped_spawned += 1
                arrivals.pending[a].append(veh)
        for a in APPROACHES:
            pq = arrivals.pending[a]
            lanes = self._lanes_by_approach[a]
            while pq:
                veh = pq[0]
                lane_id = assign_lane(veh, lanes, self.rng, cfg)
                if lane_id is None:
                    break
                pq.popleft()
                lane = self._lane_by_id[lane_id]
                cap = spawn_speed_cap(lane.rearmost(), cfg)
                v0 = min(veh.velocity, cap, cfg.v_limit)
                veh.velocity = v0
                veh.init_velocity = v0
                veh.lane_id = lane_id
                lane.q_in.append(veh)
                self.metrics.on_place(veh)

    def _compute_lane_accels(self, lane: Lane, color: Color, t0: float,
                             movers: list, stopping: list) -> None:
        cfg = self.cfg
        # exit segment first: the q_in head may follow its rearmost vehicle
        prev = None
        for v in lane.exiting:
            g = None
            if prev is not None:
                g = GapState(prev.head_pos - v.head_pos, v.velocity - prev.velocity,
                             prev.velocity, prev.accel_cmd)
            _, v.accel_cmd = natural_acceleration(g, v.velocity, cfg)
            v.regime = Regime.EXITING
            prev = v
        q_in = lane.q_in
        if q_in:
            head = q_in[0]
            regime, a_cmd, red_stop = control_qin_head(lane, color, cfg)
            if self.strategy is not None and head.equipped:
                override = self._consult_guidance(head, lane, color, t0)
                if override is not None:
                    a_cmd = override
                    red_stop = False
            head.regime = regime
            head.accel_cmd = a_cmd
            movers.append(head)
            stopping.append(red_stop)
            prev = head
            for v in q_in[1:]:
                g = GapState(prev.head_pos - v.head_pos, v.velocity - prev.velocity,
                             prev.velocity, prev.accel_cmd)
                regime, a_cmd = natural_acceleration(g, v.velocity, cfg)
                if self.strategy is not None and v.equipped:
                    override = self._consult_guidance(v, lane, color, t0, leader=prev)
                    if override is not None:
                        a_cmd = override
                v.regime = regime
                v.accel_cmd = a_cmd
                movers.append(v)
                stopping.append(False)
                prev = v
        movers.extend(lane.exiting)
        stopping.extend([False] * len(lane.exiting))

    def _consult_guidance(self, veh: Vehicle, lane: Lane, color: Color,
                          t0: float, leader: Optional[Vehicle] = None) -> Optional[float]:
        cfg = self.cfg
        if leader is None:
            if lane.q_block:
                leader = lane.q_block[-1]
            elif lane.exiting:
                leader = lane.exiting[-1]
        linfo = None
        if leader is not None:
            linfo = LeaderInfo(leader.head_pos - veh.head_pos,
                               veh.velocity - leader.velocity,
                               leader.velocity, leader.accel_cmd)
        vinfo = VehicleInfo(veh.id, veh.lane_id, veh.head_pos, veh.velocity,
                            cfg.stop_line - veh.head_pos)
        sinfo = SignalInfo(color.value, t0 % self.plan.cycle_s, self.plan.cycle_s)
        return self.strategy(vinfo, linfo, sinfo, t0)

    def _integrate(self, movers: list, stopping: list, dt: float) -> None:
        cfg = self.cfg
        sigma = cfg.noise_sigma
        if sigma > 0.0 and movers:
            noise = self.rng.normal(0.0, sigma, len(movers))
        else:
            noise = None
        for i, v in enumerate(movers):
            a = v.accel_cmd if noise is None else v.accel_cmd + noise[i]
            v_new, dx = kinematics_step(v.velocity, a, dt, cfg, stopping[i])
            v.accel_real = (v_new - v.velocity) / dt
            v.velocity = v_new
            v.head_pos += dx

    def _update_stop_line(self, lane: Lane, color: Color, dt: float, t1: float) -> None:
        cfg = self.cfg
        lane_idx = LANE_INDEX[lane.id]
        joined, departed = update_qblock(lane, color, dt, cfg)
        for v in departed:
            v.regime = Regime.EXITING
            lane.exiting.append(v)
            self.metrics.on_cross(v, t1, lane_idx)
        # free-flow crossings out of q_in (green, empty stopped queue)
        while lane.q_in and lane.q_in[0].head_pos > cfg.stop_line:
            v = lane.q_in.pop(0)
            v.regime = Regime.EXITING
            lane.exiting.append(v)
            self.metrics.on_cross(v, t1, lane_idx)
        limit = cfg.stop_line + cfg.exit_length
        while lane.exiting and lane.exiting[0].head_pos > limit:
            lane.exiting.pop(0)
            self.despawned_total += 1

    # --------------------------------------------------------------- scanning

    def _scan(self, t1: float) -> None:
        """Collision/overflow detection plus cheap invariant checks."""
        cfg = self.cfg
        v_eps = 1e-9
        for lane in self.lanes:
            prev = None
            for v in lane.chain():
                if v.velocity < -v_eps or v.velocity > cfg.v_limit + v_eps:
                    raise InvariantError(
                        f"speed bound violated: {v!r} at tick {self.tick_index}")
                if prev is not None:
                    spacing = prev.head_pos - v.head_pos
                    if spacing < cfg.vehicle_length:
                        self.anomaly = Anomaly(
                            "collision", lane.id, (prev.id, v.id), self.tick_index,
                            f"spacing {spacing:.2f} m < vehicle length on lane "
                            f"{lane.id} between #{prev.id} and #{v.id} at t={t1:.1f}s")
                        self.status = WorldStatus.ABORTED
                        return
                prev = v
            rear = lane.rearmost()
            if rear is not None and rear.head_pos < cfg.s_headway_min:
                lane.overflow_ticks += 1
            else:
                lane.overflow_ticks = 0
            if lane.overflow_ticks * cfg.tick_s > 60.0:
                rear_id = rear.id if rear is not None else -1
                self.anomaly = Anomaly(
                    "overflow", lane.id, (rear_id,), self.tick_index,
                    f"lane {lane.id} queue held the spawn point for more than "
                    f"60 s (t={t1:.1f}s)")
                self.status = WorldStatus.ABORTED
                return
        # conservation: every spawned vehicle is somewhere
        on_road = self.vehicles_on_road()
        exiting = sum(len(l.exiting) for l in self.lanes)
        total = (self.arrivals.pending_total() + on_road + exiting
                 + self.despawned_total)
        if total != self.spawned_total:
            raise InvariantError(
                f"conservation broken at tick {self.tick_index}: "
                f"spawned={self.spawned_total} accounted={total}")

    def _update_trace(self) -> None:
        h = self._trace
        pack = struct.pack
        h.update(pack("<q", self.tick_index))
        for lane in self.lanes:
            for v in lane.chain():
                h.update(pack("<qddd", v.id, v.head_pos, v.velocity, v.accel_real))

    def detect_anomalies(self) -> Optional[Anomaly]:
        """Current anomaly, if the last scan found one."""
        return self.anomaly


# ------------------------------------------------------------------- running

class CommandError(ValueError):
    pass


class Runner:
    """Paces a world against the wall clock and applies mailbox commands
    between ticks.

    The mailbox carries (kind, payload, reply) tuples; reply is a callable
    or None.  Supported kinds: "set_flow", "set_ratio", "set_speed",
    "set_plan", "end", "snapshot".  Pacing uses sleep-until-deadline on the
    monotonic clock and never skips sim ticks; if the host lags, sim time
    stays exact and only wall time slips.
    """

    def __init__(self, world: World, mode: SpeedMode = SpeedMode.HEADLESS,
                 mailbox: Optional[queue.Queue] = None,
                 snapshot_fn: Optional[Callable[[World, "Runner"], dict]] = None):
        self.world = world
        self.mode = mode
        self.mailbox = mailbox
        self.snapshot_fn = snapshot_fn

    def run(self, duration_s: Optional[float] = None) -> World:
        world = self.world
        tick_s = world.cfg.tick_s
        target_tick = None
        if duration_s is not None:
            target_tick = world.tick_index + int(round(duration_s / tick_s))
        deadline = time.monotonic()
        while world.status is WorldStatus.RUNNING:
            if target_tick is not None and world.tick_index >= target_tick:
                world.end()
                break
            sps = self.mode.steps_per_second(tick_s)
            if sps is None:
                if self.mailbox is not None and not self.mailbox.empty():
                    self._drain_mailbox()
                deadline = time.monotonic()
            else:
                deadline += 1.0 / sps
                now = time.monotonic()
                if deadline < now:
                    deadline = now   # lagging: keep sim exact, drop wall slack
                while True:
                    wait = deadline - time.monotonic()
                    if wait <= 0:
                        break
                    if self.mailbox is None:
                        time.sleep(wait)
                        break
                    try:
                        item = self.mailbox.get(timeout=wait)
                    except queue.Empty:
                        break
                    self._apply(item)
                    if world.status is not WorldStatus.RUNNING:
                        return world
                if self.mailbox is not None and not self.mailbox.empty():
                    self._drain_mailbox()
                    if world.status is not WorldStatus.RUNNING:
                        return world
            if world.status is WorldStatus.RUNNING:
                world.step()
        return world

    def _drain_mailbox(self) -> None:
        while True:
            try:
                item = self.mailbox.get_nowait()
            except queue.Empty:
                return
            self._apply(item)

    def _apply(self, item) -> None:
        kind, payload, reply = item
        try:
            result = self._dispatch(kind, payload)
        except (CommandError, ConfigError, ValueError) as exc:
            if reply is not None:
                reply((False, str(exc)))
            return
        if reply is not None:
            reply((True, result))

    def _dispatch(self, kind: str, payload):
        world = self.world
        if kind == "set_flow":
            world.set_flow(payload["approach"], payload["veh_per_hour"])
            return None
        if kind == "set_ratio":
            world.set_ratio(payload["ratio"])
            return None
        if kind == "set_speed":
            try:
                self.mode = SpeedMode(payload["mode"])
            except ValueError:
                raise CommandError(f"unknown speed mode: {payload.get('mode')}")
            return None
        if kind == "set_plan":
            plan = SignalPlan.from_dict(payload["plan"])
            world.set_plan(plan)
            return None
        if kind == "end":
            world.end()
            return None
        if kind == "snapshot":
            if self.snapshot_fn is None:
                raise CommandError("snapshots not wired for this runner")
            return self.snapshot_fn(world, self)
        raise CommandError(f"unknown command: {kind}")


class RunResult(NamedTuple):
    world: World
    out_dir: Optional[str]


def run(cfg: SimConfig, plan: Optional[SignalPlan] = None,
        strategy: Optional[GuidanceStrategy] = None,
        mode: SpeedMode = SpeedMode.HEADLESS,
        duration_s: Optional[float] = None,
        out_parent: Optional[str] = None,
        mailbox: Optional[queue.Queue] = None) -> RunResult:
    """Build a world, run it to termination, optionally write the CSVs."""
    world = World(cfg, plan=plan, strategy=strategy)
    runner = Runner(world, mode=mode, mailbox=mailbox)
    runner.run(duration_s=duration_s)
    out_dir = None
    if out_parent is not None:
        out_dir = write_outputs(world.metrics, out_parent, runner.mode.value)
    return RunResult(world, out_dir)
