"""Stop-line behavior: control of the approaching queue head and the
growth/dissipation of the stopped queue.

Yellow counts as red for every decision here; the editor can produce
yellow segments but stopping is the conservative reading of them.
"""

from __future__ import annotations

from typing import Optional

from .core import Lane, Regime, SimConfig, Vehicle, brake_to
from .driver import GapState, natural_acceleration
from .signals import Color


def _gap_to(leader: Vehicle, follower: Vehicle) -> GapState:
    return GapState(
        dx=leader.head_pos - follower.head_pos,
        dv=follower.velocity - leader.velocity,
        leader_velocity=leader.velocity,
        leader_accel=leader.accel_cmd,
    )


def natural_leader(lane: Lane) -> Optional[Vehicle]:
    """The vehicle the head of q_in physically follows: the tail of the
    stopped queue if there is one, else the rearmost vehicle past the line."""
    if lane.q_block:
        return lane.q_block[-1]
    if lane.exiting:
        return lane.exiting[-1]
    return None


def control_qin_head(lane: Lane, color: Color, cfg: SimConfig) -> tuple[Regime, float, bool]:
    """Acceleration command for the first vehicle still approaching.

    Returns (regime, accel, red_stop) where red_stop marks braking toward
    a forced stop (velocity floor 0 regardless of the configured minimum).

    Green with an empty stopped queue is plain natural driving.  Red aims
    a controlled stop at the line (or at the queue tail minus the stopped
    headway) once the head is inside the reaction distance.  Under green
    with a dissipating queue, natural driving against the creeping tail
    already forces braking whenever the gap drops under the safe headway.
    """
    head = lane.q_in[0]
    if not lane.q_block:
        if color is Color.GREEN:
            leader = lane.exiting[-1] if lane.exiting else None
            g = _gap_to(leader, head) if leader is not None else None
            regime, a = natural_acceleration(g, head.velocity, cfg)
            return regime, a, False
        gap_line = cfg.stop_line - head.head_pos
        if gap_line < cfg.s_reaction:
            return Regime.BRAKE, brake_to(head.velocity, head.head_pos, cfg.stop_line, cfg), True
        leader = lane.exiting[-1] if lane.exiting else None
        g = _gap_to(leader, head) if leader is not None else None
        regime, a = natural_acceleration(g, head.velocity, cfg)
        return regime, a, False
    tail = lane.q_block[-1]
    gap = tail.head_pos - head.head_pos
    if gap >= cfg.s_reaction or color is Color.GREEN:
        regime, a = natural_acceleration(_gap_to(tail, head), head.velocity, cfg)
        return regime, a, False
    target = tail.head_pos - cfg.s_stop
    return Regime.BRAKE, brake_to(head.velocity, head.head_pos, target, cfg), True


def update_qblock(lane: Lane, color: Color, dt: float, cfg: SimConfig) -> tuple[list, list]:
    """Advance the stopped queue one tick; returns (joined, departed).

    Red: the queue holds and the q_in head joins once within the stopped
    headway of the tail (or of the stop line when the queue is empty).
    Green: every queued vehicle creeps forward at the dissipation speed
    and departs on crossing the line.  Joins cascade within a tick so a
    tightly stacked q_in folds into the queue without a one-tick gap.
    """
    joined: list[Vehicle] = []
    departed: list[Vehicle] = []
    stop_line = cfg.stop_line
    if color is Color.GREEN:
        step = cfg.v_dis * dt
        for v in lane.q_block:
            v.head_pos += step
            v.velocity = cfg.v_dis
            v.accel_cmd = 0.0
            v.accel_real = 0.0
            v.regime = Regime.QUEUED
        while lane.q_block and lane.q_block[0].head_pos > stop_line:
            front = lane.q_block.pop(0)
            departed.append(front)
        return joined, departed
    # red or yellow: hold, then grow
    for v in lane.q_block:
        v.velocity = 0.0
        v.accel_cmd = 0.0
        v.accel_real = 0.0
        v.regime = Regime.QUEUED
    while lane.q_in:
        head = lane.q_in[0]
        boundary = lane.q_block[-1].head_pos if lane.q_block else stop_line
        if boundary - head.head_pos > cfg.s_stop:
            break
        lane.q_in.pop(0)
        head.velocity = 0.0
        head.accel_cmd = 0.0
        head.accel_real = 0.0
        head.regime = Regime.QUEUED
        lane.q_block.append(head)
        joined.append(head)
    return joined, departed
