"""Live steering endpoint: snapshots, command round trips, error replies."""

import asyncio
import json
import time

import aiohttp
import pytest

from intersim import SpeedMode, World
from intersim.server import LiveServer, parse_command, snapshot_of
from intersim.signals import default_plan

from conftest import flows, inject_vehicle, make_config, uniform_plan
from intersim.signals import Color


class TestSnapshotOf:
    def test_fresh_world_all_zero(self):
        w = World(make_config())
        snap = snapshot_of(w, SpeedMode.HEADLESS)
        assert snap["v"] == 1 and snap["type"] == "snapshot"
        assert snap["vehicles"] == []
        stats = snap["stats"]
        assert len(stats) == 12
        assert all(v == 0 or v == 0.0 for v in stats.values())
        assert len(snap["signals"]) == 12

    def test_stats_consistency_invariant(self):
        w = World(make_config(seed=9, flows=flows(2400.0, 2400.0, 2400.0, 2400.0)))
        for _ in range(2500):
            w.step()
        s = snapshot_of(w, SpeedMode.HEADLESS)["stats"]
        assert s["total_spawned"] == (s["vehicles_in_system"] + s["total_departed"]
                                      + s["pending_count"])

    def test_json_round_trip_lossless(self):
        w = World(make_config(seed=9, flows=flows(w=1800.0)))
        for _ in range(800):
            w.step()
        snap = snapshot_of(w, SpeedMode.SLOW)
        again = json.loads(json.dumps(snap))
        assert again == snap

    def test_vehicle_fields(self):
        w = World(make_config(noise_sigma=0.0), plan=uniform_plan(Color.GREEN))
        inject_vehicle(w, "EC", head_pos=123.456789, velocity=11.1111,
                       equipped=True)
        w.step()
        (veh,) = snapshot_of(w, SpeedMode.HEADLESS)["vehicles"]
        assert veh["lane"] == "EC" and veh["equipped"] is True
        assert isinstance(veh["regime"], str)
        assert round(veh["head_pos"], 3) == veh["head_pos"]


class TestParseCommand:
    def test_known_commands(self):
        assert parse_command({"type": "set_flow", "approach": "W",
                              "veh_per_hour": 1800}) == \
            ("set_flow", {"approach": "W", "veh_per_hour": 1800.0})
        assert parse_command({"type": "set_ratio", "ratio": 0.7}) == \
            ("set_ratio", {"ratio": 0.7})
        assert parse_command({"type": "end"}) == ("end", {})

    def test_rejections_name_the_field(self):
        with pytest.raises(ValueError, match="approach"):
            parse_command({"type": "set_flow", "approach": "Q", "veh_per_hour": 1})
        with pytest.raises(ValueError, match="ratio"):
            parse_command({"type": "set_ratio", "ratio": 1.5})
        with pytest.raises(ValueError, match="unknown command"):
            parse_command({"type": "warp_drive"})


def _server_world():
    cfg = make_config(seed=12, flows=flows(900.0, 900.0, 900.0, 900.0))
    return World(cfg)


async def _ws_roundtrip(test_body):
    server = LiveServer(_server_world(), port=0, mode=SpeedMode.FAST)
    server.start()
    try:
        async with aiohttp.ClientSession() as session:
            async with session.ws_connect(f"ws://127.0.0.1:{server.port}/ws") as ws:
                await test_body(ws, server)
    finally:
        server.stop()
        server.join()


async def _recv_json(ws, want_type=None, timeout=5.0):
    deadline = time.monotonic() + timeout
    while True:
        msg = await ws.receive(timeout=max(0.01, deadline - time.monotonic()))
        data = json.loads(msg.data)
        if want_type is None or data["type"] == want_type:
            return data


class TestLiveServer:
    def test_first_snapshot_within_budget(self):
        async def body(ws, server):
            t0 = time.monotonic()
            snap = await _recv_json(ws, "snapshot")
            assert time.monotonic() - t0 < 0.2
            assert snap["stats"]["sim_time_s"] >= 0.0

        asyncio.run(_ws_roundtrip(body))

    def test_set_flow_round_trip(self):
        async def body(ws, server):
            await _recv_json(ws, "snapshot")
            await ws.send_str(json.dumps({"type": "set_flow", "approach": "W",
                                          "veh_per_hour": 1800, "request_id": "r1"}))
            reply = await _recv_json(ws, "ack")
            assert reply["request_id"] == "r1"
            deadline = time.monotonic() + 3.0
            while time.monotonic() < deadline:
                snap = await _recv_json(ws, "snapshot")
                if snap["config"]["flows"]["W"] == 1800.0:
                    break
            else:
                pytest.fail("config echo never showed the new flow")

        asyncio.run(_ws_roundtrip(body))

    def test_invalid_plan_error_names_lane_and_keeps_plan(self):
        async def body(ws, server):
            bad = default_plan().to_dict()
            bad["lanes"]["NC"][0]["end_s"] = 50.0
            await ws.send_str(json.dumps({"type": "set_plan", "plan": bad,
                                          "request_id": 7}))
            reply = await _recv_json(ws, "error")
            assert reply["request_id"] == 7
            assert "NC" in reply["message"]
            snap = await _recv_json(ws, "snapshot")
            assert snap["config"]["cycle_s"] == 90.0

        asyncio.run(_ws_roundtrip(body))

    def test_malformed_frame_keeps_connection(self):
        async def body(ws, server):
            await ws.send_str("this is not json")
            reply = await _recv_json(ws, "error")
            assert reply["request_id"] is None
            await ws.send_str(json.dumps({"type": "set_ratio", "ratio": 0.5,
                                          "request_id": "after"}))
            reply = await _recv_json(ws, "ack")
            assert reply["request_id"] == "after"

        asyncio.run(_ws_roundtrip(body))

    def test_set_speed_changes_pacing_only(self):
        async def body(ws, server):
            await ws.send_str(json.dumps({"type": "set_speed", "mode": "headless",
                                          "request_id": 1}))
            await _recv_json(ws, "ack")
            assert server.runner.mode is SpeedMode.HEADLESS
            s1 = await _recv_json(ws, "snapshot")
            s2 = await _recv_json(ws, "snapshot")
            assert s2["stats"]["sim_time_s"] >= s1["stats"]["sim_time_s"]

        asyncio.run(_ws_roundtrip(body))

    def test_end_terminates_server(self):
        async def body(ws, server):
            await ws.send_str(json.dumps({"type": "end", "request_id": "bye"}))
            reply = await _recv_json(ws, "ack")
            assert reply["request_id"] == "bye"

        asyncio.run(_ws_roundtrip(body))
        # join() in the fixture returning proves both threads shut down

    def test_http_serves_a_page(self):
        async def body():
            server = LiveServer(_server_world(), port=0, mode=SpeedMode.FAST)
            server.start()
            try:
                async with aiohttp.ClientSession() as session:
                    async with session.get(f"http://127.0.0.1:{server.port}/") as resp:
                        assert resp.status == 200
                        text = await resp.text()
                        assert "<html" in text.lower()
            finally:
                server.stop()
                server.join()

        asyncio.run(body())

    def test_ratio_change_spares_existing_vehicles(self):
        async def body(ws, server):
            await _recv_json(ws, "snapshot")
            await ws.send_str(json.dumps({"type": "set_ratio", "ratio": 1.0,
                                          "request_id": 2}))
            await _recv_json(ws, "ack")
            snap = await _recv_json(ws, "snapshot")
            pre_change = [v for v in snap["vehicles"] if not v["equipped"]]
            assert snap["config"]["equipped_ratio"] == 1.0
            # vehicles spawned before the change keep their flag
            ids = {v["id"] for v in pre_change}
            snap2 = await _recv_json(ws, "snapshot")
            for v in snap2["vehicles"]:
                if v["id"] in ids:
                    assert v["equipped"] is False

        asyncio.run(_ws_roundtrip(body))
