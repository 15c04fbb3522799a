"""Signal plans: lookup, the default plan, editor semantics, validation, JSON."""

import json

import numpy as np
import pytest

from intersim import (Color, PlanError, Segment, SignalPlan, default_plan,
                      load_plan, save_plan, set_color_behind, validate_plan)
from intersim.core import LANE_IDS
from intersim.signals import color_at


def test_exactly_twelve_distinct_lanes():
    assert len(LANE_IDS) == 12
    assert len(set(LANE_IDS)) == 12
    assert all(lane[0] in "WSEN" and lane[1] in "LCR" for lane in LANE_IDS)


class TestDefaultPlan:
    def test_structure(self):
        plan = default_plan()
        assert plan.cycle_s == 90.0
        for lane in LANE_IDS:
            segs = plan.lanes[lane]
            assert len(segs) == 2
            assert sum(s.end_s - s.start_s for s in segs) == 90.0
            green = sum(s.end_s - s.start_s for s in segs if s.color is Color.GREEN)
            assert green == 45.0

    def test_ew_and_ns_complement(self):
        plan = default_plan()
        for t in np.linspace(0, 180, 721):
            ew = plan.color_at("WC", t)
            ns = plan.color_at("NL", t)
            assert (ew is Color.GREEN) == (ns is Color.RED)

    def test_valid(self):
        assert validate_plan(default_plan()) == []


class TestColorAt:
    def test_wc_green_at_10(self):
        assert color_at(default_plan(), "WC", 10.0) is Color.GREEN

    def test_nl_red_at_10(self):
        assert color_at(default_plan(), "NL", 10.0) is Color.RED

    def test_cyclic(self):
        plan = default_plan()
        for lane in LANE_IDS:
            assert plan.color_at(lane, 90.0) is plan.color_at(lane, 0.0)
            assert plan.color_at(lane, 913.7) is plan.color_at(lane, 913.7 % 90.0)

    def test_boundary_belongs_to_next_segment(self):
        plan = default_plan()
        assert plan.color_at("WC", 45.0) is Color.RED
        assert plan.color_at("WC", 44.999) is Color.GREEN


class TestSetColorBehind:
    def test_worked_example(self):
        plan = set_color_behind(default_plan(), ["WL"], 30.0, Color.RED)
        assert plan.lanes["WL"] == (Segment(Color.GREEN, 0.0, 30.0),
                                    Segment(Color.RED, 30.0, 90.0))
        # other lanes untouched
        assert plan.lanes["WC"] == default_plan().lanes["WC"]

    def test_cursor_zero_overwrites_lane(self):
        plan = set_color_behind(default_plan(), ["NL"], 0.0, Color.YELLOW)
        assert plan.lanes["NL"] == (Segment(Color.YELLOW, 0.0, 90.0),)

    def test_idempotent(self):
        once = set_color_behind(default_plan(), ["WL", "EC"], 12.5, Color.YELLOW)
        twice = set_color_behind(once, ["WL", "EC"], 12.5, Color.YELLOW)
        assert once == twice

    def test_cursor_out_of_range_rejected(self):
        with pytest.raises(PlanError):
            set_color_behind(default_plan(), ["WL"], 90.0, Color.RED)
        with pytest.raises(PlanError):
            set_color_behind(default_plan(), ["WL"], -0.1, Color.RED)

    def test_unknown_lane_rejected(self):
        with pytest.raises(PlanError):
            set_color_behind(default_plan(), ["XX"], 10.0, Color.RED)

    def test_validity_preserved_over_random_edits(self):
        rng = np.random.default_rng(5)
        colors = list(Color)
        plan = default_plan()
        for _ in range(300):
            k = rng.integers(1, 5)
            lanes = list(rng.choice(LANE_IDS, size=k, replace=False))
            cursor = float(rng.uniform(0, plan.cycle_s))
            color = colors[rng.integers(0, 3)]
            plan = set_color_behind(plan, lanes, cursor, color)
            assert validate_plan(plan) == []
            # adjacent same-color segments always merged
            for lane in LANE_IDS:
                segs = plan.lanes[lane]
                assert all(a.color is not b.color for a, b in zip(segs, segs[1:]))


class TestValidatePlan:
    def test_overlap_reported_with_lane(self):
        bad = SignalPlan(cycle_s=90.0, lanes={
            lane: (Segment(Color.GREEN, 0.0, 50.0), Segment(Color.RED, 40.0, 90.0))
            for lane in LANE_IDS})
        problems = validate_plan(bad)
        assert problems
        assert any("overlap" in p and "WL" in p for p in problems)

    def test_gap_reported(self):
        bad = SignalPlan(cycle_s=90.0, lanes={
            lane: (Segment(Color.GREEN, 0.0, 40.0), Segment(Color.RED, 50.0, 90.0))
            for lane in LANE_IDS})
        assert any("gap" in p for p in validate_plan(bad))

    def test_missing_lane_reported(self):
        lanes = {lane: (Segment(Color.RED, 0.0, 90.0),) for lane in LANE_IDS[:-1]}
        assert any("missing" in p for p in validate_plan(SignalPlan(90.0, lanes)))

    def test_incomplete_coverage_reported(self):
        lanes = {lane: (Segment(Color.RED, 0.0, 89.0),) for lane in LANE_IDS}
        assert any("coverage" in p for p in validate_plan(SignalPlan(90.0, lanes)))


class TestPlanJson:
    def test_round_trip(self, tmp_path):
        plan = set_color_behind(default_plan(), ["SL", "SC"], 60.0, Color.YELLOW)
        path = tmp_path / "plan.json"
        save_plan(plan, path)
        assert load_plan(path) == plan

    def test_schema_shape(self, tmp_path):
        d = default_plan().to_dict()
        assert set(d) == {"cycle_s", "lanes"}
        assert set(d["lanes"]) == set(LANE_IDS)
        seg = d["lanes"]["WL"][0]
        assert set(seg) == {"color", "start_s", "end_s"}

    def test_invalid_file_raises_with_lane(self, tmp_path):
        d = default_plan().to_dict()
        d["lanes"]["EC"][0]["end_s"] = 50.0   # overlap on EC
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(d))
        with pytest.raises(PlanError, match="EC"):
            load_plan(path)
