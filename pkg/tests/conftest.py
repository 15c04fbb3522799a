import numpy as np
import pytest

from intersim import SimConfig, Vehicle, World
from intersim.core import LANE_IDS
from intersim.signals import Color, Segment, SignalPlan


def make_config(**overrides) -> SimConfig:
    cfg = SimConfig()
    for key, value in overrides.items():
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def flows(w=0.0, s=0.0, e=0.0, n=0.0) -> dict:
    return {"W": w, "S": s, "E": e, "N": n}


def uniform_plan(color: Color, cycle_s: float = 90.0) -> SignalPlan:
    return SignalPlan(cycle_s=cycle_s,
                      lanes={lane: (Segment(color, 0.0, cycle_s),) for lane in LANE_IDS})


def inject_vehicle(world: World, lane_id: str, head_pos: float, velocity: float,
                   vid=None, equipped=False) -> Vehicle:
    """Drop a vehicle straight into a lane's q_in (front kept sorted)."""
    if vid is None:
        vid = world._next_vehicle_id
        world._next_vehicle_id += 1
    veh = Vehicle(id=vid, lane_id=lane_id, head_pos=head_pos, velocity=velocity,
                  equipped=equipped, spawn_time=world.time_s)
    lane = world.lane(lane_id)
    lane.q_in.append(veh)
    lane.q_in.sort(key=lambda v: -v.head_pos)
    world.spawned_total += 1
    if equipped:
        world.equipped_spawned += 1
    world.metrics.on_place(veh)
    return veh


@pytest.fixture
def cfg():
    return make_config()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
