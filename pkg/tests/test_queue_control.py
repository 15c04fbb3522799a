"""Stop-line behavior: head control under red/green, queue growth/dissipation."""

import pytest

from intersim import Regime, World
from intersim.core import LANE_IDS
from intersim.queue_control import control_qin_head, update_qblock
from intersim.signals import Color

from conftest import flows, inject_vehicle, make_config, uniform_plan


def make_world(**kw):
    return World(make_config(**kw), plan=uniform_plan(Color.GREEN))


class TestControlQinHead:
    def test_red_empty_queue_brakes_to_stop_line(self):
        w = make_world()
        head = inject_vehicle(w, "WL", head_pos=400.0, velocity=10.0)
        regime, a, red_stop = control_qin_head(w.lane("WL"), Color.RED, w.cfg)
        assert a == pytest.approx(-(10.0 ** 2) / (2 * 100.0))
        assert red_stop
        assert regime is Regime.BRAKE

    def test_red_beyond_reaction_drives_naturally(self):
        w = make_world()
        inject_vehicle(w, "WL", head_pos=100.0, velocity=10.0)
        regime, a, red_stop = control_qin_head(w.lane("WL"), Color.RED, w.cfg)
        assert not red_stop
        assert regime is Regime.FREE
        assert a == min(0.8 * (w.cfg.desired_speed - 10.0), w.cfg.a_max)

    def test_green_empty_queue_never_brakes_to_line(self):
        w = make_world()
        inject_vehicle(w, "WL", head_pos=499.0, velocity=14.0)
        regime, a, red_stop = control_qin_head(w.lane("WL"), Color.GREEN, w.cfg)
        assert not red_stop
        assert a == pytest.approx(0.8 * (w.cfg.desired_speed - 14.0))

    def test_red_with_queue_targets_tail_minus_stop_gap(self):
        w = make_world()
        head = inject_vehicle(w, "WL", head_pos=400.0, velocity=10.0)
        tail = inject_vehicle(w, "WL", head_pos=490.0, velocity=0.0)
        lane = w.lane("WL")
        lane.q_block = [tail]
        lane.q_in = [head]
        regime, a, red_stop = control_qin_head(lane, Color.RED, w.cfg)
        target = 490.0 - w.cfg.s_stop
        assert a == pytest.approx(-(10.0 ** 2) / (2 * (target - 400.0)))
        assert red_stop

    def test_yellow_behaves_like_red(self):
        w = make_world()
        inject_vehicle(w, "WL", head_pos=400.0, velocity=10.0)
        _, a_red, s_red = control_qin_head(w.lane("WL"), Color.RED, w.cfg)
        _, a_yel, s_yel = control_qin_head(w.lane("WL"), Color.YELLOW, w.cfg)
        assert a_yel == a_red and s_yel == s_red

    def test_green_with_queue_follows_tail(self):
        w = make_world()
        head = inject_vehicle(w, "WL", head_pos=480.0, velocity=5.0)
        tail = inject_vehicle(w, "WL", head_pos=492.0, velocity=0.0)
        lane = w.lane("WL")
        lane.q_block = [tail]
        lane.q_in = [head]
        regime, a, red_stop = control_qin_head(lane, Color.GREEN, w.cfg)
        assert not red_stop
        assert regime in (Regime.APPROACH, Regime.BRAKE)
        assert a < 0.0

    def test_green_queue_inside_safe_distance_forces_braking(self):
        w = make_world()
        head = inject_vehicle(w, "WL", head_pos=487.0, velocity=3.0)
        tail = inject_vehicle(w, "WL", head_pos=492.0, velocity=3.0)
        lane = w.lane("WL")
        lane.q_block = [tail]
        lane.q_in = [head]
        regime, a, _ = control_qin_head(lane, Color.GREEN, w.cfg)
        assert regime is Regime.BRAKE
        assert a == -w.cfg.a_max


class TestUpdateQblock:
    def test_red_join_at_stop_line(self):
        w = make_world()
        head = inject_vehicle(w, "WL", head_pos=494.5, velocity=0.6)
        lane = w.lane("WL")
        joined, departed = update_qblock(lane, Color.RED, 0.1, w.cfg)
        assert joined == [head] and departed == []
        assert lane.q_block == [head] and lane.q_in == []
        assert head.velocity == 0.0
        assert head.regime is Regime.QUEUED

    def test_red_join_behind_tail(self):
        w = make_world()
        tail = inject_vehicle(w, "WL", head_pos=494.6, velocity=0.0)
        head = inject_vehicle(w, "WL", head_pos=489.2, velocity=0.4)
        lane = w.lane("WL")
        lane.q_block = [tail]
        lane.q_in = [head]
        joined, _ = update_qblock(lane, Color.RED, 0.1, w.cfg)
        assert joined == [head]
        assert [v.id for v in lane.q_block] == [tail.id, head.id]

    def test_red_no_join_when_gap_open(self):
        w = make_world()
        inject_vehicle(w, "WL", head_pos=450.0, velocity=10.0)
        joined, departed = update_qblock(w.lane("WL"), Color.RED, 0.1, w.cfg)
        assert joined == [] and departed == []

    def test_red_empty_lane_no_events(self):
        w = make_world()
        assert update_qblock(w.lane("WL"), Color.RED, 0.1, w.cfg) == ([], [])

    def test_green_dissipation_and_departure(self):
        w = make_world()
        lane = w.lane("WL")
        cars = []
        for k in range(3):
            v = inject_vehicle(w, "WL", head_pos=500.0 - 5.5 * k, velocity=0.0)
            cars.append(v)
        lane.q_block = list(lane.q_in)
        lane.q_in = []
        joined, departed = update_qblock(lane, Color.GREEN, 0.1, w.cfg)
        assert departed == [cars[0]]
        assert cars[0].head_pos == pytest.approx(500.3)
        assert cars[1].head_pos == pytest.approx(494.8)
        assert cars[2].head_pos == pytest.approx(489.3)
        assert all(v.velocity == w.cfg.v_dis for v in lane.q_block)

    def test_green_no_joins(self):
        w = make_world()
        tail = inject_vehicle(w, "WL", head_pos=494.6, velocity=0.0)
        head = inject_vehicle(w, "WL", head_pos=489.2, velocity=0.4)
        lane = w.lane("WL")
        lane.q_block = [tail]
        lane.q_in = [head]
        joined, _ = update_qblock(lane, Color.GREEN, 0.1, w.cfg)
        assert joined == []
        assert lane.q_in == [head]


class TestQueueFormationAndDischarge:
    def _run_red_then_green(self, seed=21, red_s=120.0, green_s=60.0,
                            flow=1800.0):
        """One approach under a long red, then green; returns the world and
        the tick the green started on."""
        from intersim.signals import SignalPlan, Segment
        cycle = red_s + green_s
        lanes = {}
        for lane in LANE_IDS:
            if lane.startswith("W"):
                lanes[lane] = (Segment(Color.RED, 0.0, red_s),
                               Segment(Color.GREEN, red_s, cycle))
            else:
                lanes[lane] = (Segment(Color.RED, 0.0, cycle),)
        plan = SignalPlan(cycle_s=cycle, lanes=lanes)
        w = World(make_config(seed=seed, flows=flows(w=flow)), plan=plan)
        return w, plan

    def test_stopped_spacing_near_s_stop(self):
        w, _ = self._run_red_then_green()
        for _ in range(1200):
            w.step()
        assert w.status.value == "running"
        found = 0
        for lane_id in ("WL", "WC", "WR"):
            q = w.lane(lane_id).q_block
            for ahead, behind in zip(q, q[1:]):
                spacing = ahead.head_pos - behind.head_pos
                assert spacing == pytest.approx(w.cfg.s_stop, abs=0.5)
                found += 1
        assert found >= 3

    def test_fifo_departure_order(self):
        w, _ = self._run_red_then_green()
        order = {}
        for _ in range(3600):
            w.step()
            for lane_id in ("WL", "WC", "WR"):
                lane = w.lane(lane_id)
                for v in lane.exiting:
                    order.setdefault(lane_id, []).append(v.id) \
                        if v.id not in order.get(lane_id, []) else None
        assert w.status.value == "running"
        for lane_id, ids in order.items():
            assert ids == sorted(ids)

    def test_queue_monotone_during_phases(self):
        w, _ = self._run_red_then_green()
        prev_len = 0
        for k in range(1200):   # red phase
            w.step()
            n = len(w.lane("WC").q_block)
            assert n >= prev_len
            prev_len = n
        for k in range(300):   # green: never grows
            w.step()
            n = len(w.lane("WC").q_block)
            assert n <= prev_len
            prev_len = n

    def test_discharge_rate_matches_dissipation_speed(self):
        w, _ = self._run_red_then_green(red_s=300.0, green_s=120.0, flow=1800.0)
        cfg = w.cfg
        for _ in range(3000):   # build the queue under red
            w.step()
        queued = len(w.lane("WC").q_block) + len(w.lane("WC").q_in)
        assert queued >= 12, "needs saturation for the rate check"
        import intersim.core as core
        idx = core.LANE_INDEX["WC"]
        before = w.metrics.lane_departures[idx]
        green_s = 45.0
        for _ in range(int(green_s / cfg.tick_s)):
            w.step()
        discharged = w.metrics.lane_departures[idx] - before
        rate_bound = green_s * cfg.v_dis / cfg.s_stop
        assert discharged <= int(rate_bound) + 1
        assert abs(discharged - rate_bound) <= 1.0 + 1.0   # hand value 24.5 -> 24 or 25
