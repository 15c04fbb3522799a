"""Shared domain types and clamped kinematic integration.

Coordinates: every vehicle is tracked by the position of its front bumper
(``head_pos``) along its lane, in meters.  A vehicle spawns at 0 and the
stop line sits at ``approach_length``; positions keep increasing through
the exit segment until the vehicle despawns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

APPROACHES = ("W", "S", "E", "N")
MOVEMENTS = ("L", "C", "R")

# Fixed lane ordering used everywhere: RNG draws, CSV columns, snapshots.
LANE_IDS = tuple(a + m for a in APPROACHES for m in MOVEMENTS)
LANE_INDEX = {lane: i for i, lane in enumerate(LANE_IDS)}


class Regime(str, Enum):
    """Driving state of a vehicle, refreshed every tick."""

    FREE = "free"
    APPROACH = "approach"
    LEAVE = "leave"
    FOLLOW = "follow"
    BRAKE = "brake"
    QUEUED = "queued"
    EXITING = "exiting"


class ConfigError(ValueError):
    """Raised when a SimConfig (or config file) fails validation."""


def _default_flows() -> dict:
    return {a: 0.0 for a in APPROACHES}


@dataclass
class SimConfig:
    """All physical constants, geometry, demand and seeding for one world.

    Speeds are m/s, distances meters, times seconds.  ``theta`` is the
    linear factor of the speed-dependent safe headway and multiplies the
    leader speed expressed in km/h.
    """

    tick_s: float = 0.1
    a_max: float = 2.5
    v_limit: float = 16.667          # 60 km/h
    v_min: float = 0.0
    desired_speed_factor: float = 0.9
    s_reaction: float = 150.0
    theta: float = 0.55              # m per (km/h)
    s_headway_min: float = 5.5
    s_stop: float = 5.5
    v_dis: float = 3.0
    vehicle_length: float = 4.5
    noise_sigma: float = 0.2
    approach_length: float = 500.0
    exit_length: float = 50.0
    stop_speed_threshold: float = 1.389   # 5 km/h
    seed: int = 0
    flows: dict = field(default_factory=_default_flows)
    equipped_ratio: float = 0.0

    @property
    def desired_speed(self) -> float:
        return self.desired_speed_factor * self.v_limit

    @property
    def stop_line(self) -> float:
        return self.approach_length

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        if not self.tick_s > 0:
            raise ConfigError("tick_s must be > 0")
        if not self.a_max > 0:
            raise ConfigError("a_max must be > 0")
        if not self.v_min >= 0:
            raise ConfigError("v_min must be >= 0")
        if not self.v_limit > self.v_min:
            raise ConfigError("v_limit must be > v_min")
        if not 0 < self.desired_speed_factor <= 1:
            raise ConfigError("desired_speed_factor must be in (0, 1]")
        if not self.s_stop >= self.vehicle_length:
            raise ConfigError("s_stop must be >= vehicle_length")
        if not self.s_reaction > self.s_headway_min:
            raise ConfigError("s_reaction must be > s_headway_min")
        if not self.approach_length > self.s_reaction:
            raise ConfigError("approach_length must be > s_reaction")
        if not 0 <= self.equipped_ratio <= 1:
            raise ConfigError("equipped_ratio must be in [0, 1]")
        if not self.theta > 0:
            raise ConfigError("theta must be > 0")
        if not self.v_dis > 0:
            raise ConfigError("v_dis must be > 0")
        if not self.exit_length > 0:
            raise ConfigError("exit_length must be > 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if set(self.flows) != set(APPROACHES):
            raise ConfigError("flows must map exactly the approaches W, S, E, N")
        for a in APPROACHES:
            if self.flows[a] < 0:
                raise ConfigError(f"flows[{a}] must be >= 0")

    def to_dict(self) -> dict:
        return {
            "tick_s": self.tick_s,
            "a_max": self.a_max,
            "v_limit": self.v_limit,
            "v_min": self.v_min,
            "desired_speed_factor": self.desired_speed_factor,
            "s_reaction": self.s_reaction,
            "theta": self.theta,
            "s_headway_min": self.s_headway_min,
            "s_stop": self.s_stop,
            "v_dis": self.v_dis,
            "vehicle_length": self.vehicle_length,
            "noise_sigma": self.noise_sigma,
            "approach_length": self.approach_length,
            "exit_length": self.exit_length,
            "stop_speed_threshold": self.stop_speed_threshold,
            "seed": self.seed,
            "flows": dict(self.flows),
            "equipped_ratio": self.equipped_ratio,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


class Vehicle:
    """One car.  Mutable state advanced in place by the engine."""

    __slots__ = (
        "id", "lane_id", "head_pos", "velocity", "accel_cmd", "accel_real",
        "equipped", "spawn_time", "init_velocity", "crossed_time", "regime",
        "in_stop",
    )

    def __init__(self, id: int, lane_id: str, head_pos: float, velocity: float,
                 equipped: bool, spawn_time: float):
        self.id = id
        self.lane_id = lane_id
        self.head_pos = head_pos
        self.velocity = velocity
        self.accel_cmd = 0.0      # pre-noise command for this tick
        self.accel_real = 0.0     # realized accel after clamping, last tick
        self.equipped = equipped
        self.spawn_time = spawn_time
        self.init_velocity = velocity
        self.crossed_time: Optional[float] = None
        self.regime = Regime.FREE
        self.in_stop = False      # currently below the stop-speed threshold

    def __repr__(self):
        return (f"Vehicle(id={self.id}, lane={self.lane_id}, "
                f"pos={self.head_pos:.2f}, v={self.velocity:.2f}, {self.regime.value})")


class Lane:
    """One approach-movement lane.

    ``q_in`` holds vehicles still driving toward the stop line, ``q_block``
    the stopped (or dissipating) queue at the line, ``exiting`` the vehicles
    already past it.  All three lists are ordered front first, i.e. by
    strictly decreasing head_pos.
    """

    __slots__ = ("id", "q_in", "q_block", "exiting", "overflow_ticks")

    def __init__(self, lane_id: str):
        self.id = lane_id
        self.q_in: list[Vehicle] = []
        self.q_block: list[Vehicle] = []
        self.exiting: list[Vehicle] = []
        self.overflow_ticks = 0   # consecutive ticks with the rearmost car at the spawn point

    def rearmost(self) -> Optional[Vehicle]:
        """Rearmost vehicle on the approach side (None when empty)."""
        if self.q_in:
            return self.q_in[-1]
        if self.q_block:
            return self.q_block[-1]
        return None

    def chain(self):
        """All vehicles in the lane, front (largest head_pos) first."""
        return self.exiting + self.q_block + self.q_in


def make_rng(seed: int) -> np.random.Generator:
    """The single per-world generator.

    PCG64 keeps streams identical across hosts.  Draw order per tick is
    fixed: arrivals per approach in W,S,E,N order (exponential gap draws),
    then per new vehicle its initial-speed and equipped draws, then one
    placement draw per placed vehicle, then per-vehicle acceleration noise
    in lane order (q_in head to back, then exiting front to back).
    """
    return np.random.Generator(np.random.PCG64(seed))


def kinematics_step(v: float, a: float, dt: float, cfg: SimConfig,
                    stopping: bool = False) -> tuple[float, float]:
    """Advance one tick of clamped kinematics.

    The command ``a`` is clamped to [-a_max, a_max], the new speed to
    [floor, v_limit], and the displacement uses the acceleration re-derived
    from the clamped speed change so position and velocity stay consistent.
    ``stopping`` marks braking toward a forced stop (red light), where the
    floor is 0 instead of cfg.v_min.

    Returns (new_velocity, displacement); displacement is never negative.
    """
    a_max = cfg.a_max
    if a > a_max:
        a = a_max
    elif a < -a_max:
        a = -a_max
    floor = 0.0 if stopping else cfg.v_min
    v_new = v + a * dt
    if v_new > cfg.v_limit:
        v_new = cfg.v_limit
    elif v_new < floor:
        v_new = floor
    # dx = v*dt + 0.5*a_used*dt^2 with a_used = (v_new - v)/dt, i.e. trapezoid
    dx = 0.5 * (v + v_new) * dt
    if dx < 0.0:
        dx = 0.0
    return v_new, dx


def apply_noise(a_cmd: float, rng: np.random.Generator, sigma: float) -> float:
    """Gaussian actuation noise on an acceleration command.

    With sigma = 0 the command is returned unchanged and no draw is
    consumed, so noiseless runs leave the stream untouched.
    """
    if sigma == 0.0:
        return a_cmd
    return a_cmd + rng.normal(0.0, sigma)


def brake_to(v: float, head_pos: float, target_pos: float, cfg: SimConfig) -> float:
    """Constant deceleration that stops the vehicle at target_pos.

    Recomputed every tick this self-corrects toward the target.  A
    non-positive gap with the vehicle still moving is an emergency: full
    braking is returned and the per-tick anomaly scan will catch any
    resulting overlap.
    """
    if v == 0.0:
        return 0.0
    gap = target_pos - head_pos
    if gap <= 0.0:
        return -cfg.a_max
    return -(v * v) / (2.0 * gap)
