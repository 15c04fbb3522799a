"""Microscopic single-intersection traffic simulator with live steering.

Fixed 0.1 s tick, four approaches with three lanes each, Poisson demand,
psycho-physical car following, stop-line queue dynamics, per-lane cyclic
signal plans, an acceleration-guidance hook for equipped vehicles, CSV
batch outputs and a WebSocket steering protocol.
"""

from .core import (APPROACHES, LANE_IDS, MOVEMENTS, ConfigError, Lane, Regime,
                   SimConfig, Vehicle, apply_noise, brake_to, kinematics_step,
                   make_rng)
from .driver import (GapState, classify_regime, emergency_brake,
                     following_acceleration, free_acceleration,
                     natural_acceleration, safe_distance)
from .engine import (Anomaly, CruiseAdvisory, Runner, RunResult, SpeedMode,
                     World, WorldStatus, passthrough_strategy, run)
from .metrics import (MetricsAccumulator, OutputError, theoretical_travel_time,
                      write_outputs)
from .signals import (Color, PlanError, Segment, SignalPlan, default_plan,
                      load_plan, save_plan, set_color_behind, validate_plan)

__version__ = "0.1.0"
