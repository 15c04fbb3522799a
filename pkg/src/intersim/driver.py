"""Natural (uncontrolled) driving: regime classification and acceleration laws.

The driver reacts to the gap and closing speed against the immediate
leader.  Five regimes partition the (gap, closing-speed) plane:

* free      - no leader inside the reaction distance; chase the desired speed
* approach  - closing noticeably on the leader; aim to stop the closing at
              the safe headway
* leave     - opening noticeably (or already inside the safe headway while
              the leader pulls away); treated like free driving
* follow    - closing speed imperceptible; mirror the leader
* brake     - inside the safe headway and not opening; full braking

The perceptual threshold on dv/dx^2 separates follow from approach/leave.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

from .core import Regime, SimConfig

PERCEPTION_THRESHOLD = 6e-4   # on dv/dx^2, dv in m/s, dx in m
FREE_GAIN = 0.8               # 1/s, speed-tracking gain of free driving
FOLLOW_BAND_FACTOR = 2.0      # upper edge of the following band, in safe distances


class GapState(NamedTuple):
    """Relation to the immediate leader.

    dx is leader head_pos minus follower head_pos (> 0), dv is follower
    velocity minus leader velocity (> 0 when closing).
    """

    dx: float
    dv: float
    leader_velocity: float
    leader_accel: float


def safe_distance(v_leader: float, cfg: SimConfig) -> float:
    """Minimum safe head-to-head following distance for a given leader speed."""
    return max(cfg.theta * 3.6 * v_leader, cfg.s_headway_min)


def classify_regime(g: Optional[GapState], v: float, cfg: SimConfig) -> Regime:
    """Classify the driving regime; total over all inputs.

    Inside the safe headway the regime is brake only while not opening;
    with the leader pulling away faster, braking would wedge the outflow
    behind the stop line, so that case classifies as leave.

    The dead band where relative speed is imperceptible maps to follow only
    within the following band (a couple of safe distances); further back an
    imperceptible closing rate just means the leader is out of reach yet,
    and the driver keeps advancing.  Without that bound a deceleration wave
    would freeze cruise headways into kilometer-long standing queues.
    """
    if g is None or g.dx >= cfg.s_reaction:
        return Regime.FREE
    s_safe = safe_distance(g.leader_velocity, cfg)
    if g.dx < s_safe:
        return Regime.BRAKE if g.dv >= 0.0 else Regime.LEAVE
    signal = g.dv / (g.dx * g.dx)
    if signal > PERCEPTION_THRESHOLD:
        return Regime.APPROACH
    if signal < -PERCEPTION_THRESHOLD:
        return Regime.LEAVE
    if g.dx > FOLLOW_BAND_FACTOR * s_safe:
        return Regime.FREE
    return Regime.FOLLOW


def free_acceleration(v: float, cfg: SimConfig) -> float:
    """Chase the desired cruise speed (90% of the limit by default)."""
    a = FREE_GAIN * (cfg.desired_speed - v)
    if a > cfg.a_max:
        return cfg.a_max
    if a < -cfg.a_max:
        return -cfg.a_max
    return a


def following_acceleration(g: GapState, cfg: SimConfig) -> float:
    """Acceleration while approaching or following a leader.

    Aims the closing speed to zero exactly at the safe headway and carries
    the leader's acceleration through; at matched speeds this reduces to
    mirroring the leader.
    """
    s_safe = safe_distance(g.leader_velocity, cfg)
    assert g.dx > s_safe, "brake regime must be classified before this is called"
    dv = g.dv
    if dv == 0.0:
        return g.leader_accel
    a_rel = -(dv * dv) / (2.0 * (g.dx - s_safe))
    if dv < 0.0:
        a_rel = -a_rel
    return a_rel + g.leader_accel


def emergency_brake(g: GapState, cfg: SimConfig) -> float:
    """Full braking; the integrator floors velocity so no reversing occurs."""
    return -cfg.a_max


def leave_acceleration(g: GapState, v: float, cfg: SimConfig) -> float:
    """Free-style speed tracking bounded by braking feasibility.

    The chased speed is the free-driving target capped at the speed from
    which full braking could still match the leader with the minimum
    headway intact.  Pulling out behind a departing queue the cap sits far
    above the desired speed; near a standing queue it pins the target to
    the leader's speed.  Using the free-driving gain (rather than jumping
    to the cap within one tick) keeps stopped traffic from churning full
    throttle/full brake on noise jitter, which would bias followers
    through the clamp and ratchet queues together.
    """
    margin = g.dx - cfg.s_headway_min
    if margin > 0.0:
        v_allow = math.sqrt(g.leader_velocity * g.leader_velocity
                            + 2.0 * cfg.a_max * margin)
    else:
        v_allow = max(g.leader_velocity, 0.0)
    target = min(cfg.desired_speed, v_allow)
    a = FREE_GAIN * (target - v)
    if a > cfg.a_max:
        return cfg.a_max
    if a < -cfg.a_max:
        return -cfg.a_max
    return a


def natural_acceleration(g: Optional[GapState], v: float, cfg: SimConfig) -> tuple[Regime, float]:
    """Classify and apply the matching law. The per-tick path for every
    uncontrolled vehicle.

    Free driving with a leader still on the horizon carries the same
    braking-feasibility cap as leaving; at the reaction distance the cap
    sits far above the speed limit, so pure free driving is unaffected.
    """
    regime = classify_regime(g, v, cfg)
    if regime is Regime.BRAKE:
        return regime, -cfg.a_max
    if regime is Regime.APPROACH or regime is Regime.FOLLOW:
        return regime, following_acceleration(g, cfg)
    if regime is Regime.LEAVE:
        return regime, leave_acceleration(g, v, cfg)
    if g is not None:
        return regime, leave_acceleration(g, v, cfg)
    return regime, free_acceleration(v, cfg)
