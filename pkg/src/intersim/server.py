"""Live steering server: snapshots out, commands in, UI bundle over HTTP.

One world runs on a worker thread under a Runner; this module runs an
aiohttp event loop beside it and talks to the world exclusively through
the runner's mailbox, so every command and every snapshot lands between
ticks.  The wire format is UTF-8 JSON text frames over a WebSocket at
/ws; the same port serves the static UI bundle.

Frames from the server::

    {"v": 1, "type": "snapshot", ...}          10 Hz wall time, plus one
                                               immediately after connect
    {"type": "ack", "request_id": ...}
    {"type": "error", "request_id": ..., "message": ...}

Frames from the client carry a client-chosen request_id::

    {"type": "set_flow", "approach": "W", "veh_per_hour": 1800, "request_id": 1}
    {"type": "set_ratio", "ratio": 0.7, "request_id": 2}
    {"type": "set_speed", "mode": "fast", "request_id": 3}
    {"type": "set_plan", "plan": {...}, "request_id": 4}
    {"type": "end", "request_id": 5}
"""

from __future__ import annotations

import asyncio
import concurrent.futures
import json
import queue
import threading
from pathlib import Path
from typing import Optional

from aiohttp import WSMsgType, web

from .engine import Runner, SpeedMode, World
from .metrics import write_outputs

SNAPSHOT_INTERVAL_S = 0.1
PROTOCOL_VERSION = 1


def _r3(x: float) -> float:
    return round(x, 3)


def snapshot_of(world: World, mode: SpeedMode) -> dict:
    """Pure read of the world, JSON-ready, floats at 3-decimal precision.

    vehicles_in_system counts the approach side (q_in + q_block);
    total_departed counts stop-line crossings, so spawned = in_system +
    departed + pending holds exactly.
    """
    m = world.metrics
    t = world.time_s
    vehicles = []
    signals = []
    for lane in world.lanes:
        color = world.plan.color_at(lane.id, t)
        signals.append({
            "lane": lane.id,
            "color": color.value,
            "time_in_cycle": _r3(t % world.plan.cycle_s),
        })
        for v in lane.chain():
            vehicles.append({
                "id": v.id,
                "lane": lane.id,
                "head_pos": _r3(v.head_pos),
                "velocity": _r3(v.velocity),
                "equipped": v.equipped,
                "regime": v.regime.value,
            })
    in_system = world.vehicles_on_road()
    spawned = world.spawned_total
    stats = {
        "vehicles_in_system": in_system,
        "total_spawned": spawned,
        "total_departed": m.crossed_total,
        "pending_count": world.arrivals.pending_total(),
        "avg_delay_s": _r3(m.avg_delay_s()),
        "total_stops": m.total_stops,
        "avg_stops_per_vehicle": _r3(m.avg_stops_per_vehicle()),
        "total_stop_time_s": _r3(m.total_stop_time_s),
        "avg_stop_time_s": _r3(m.avg_stop_time_s()),
        "throughput_veh_per_h": _r3(m.crossed_total * 3600.0 / t if t > 0 else 0.0),
        "equipped_fraction_actual": _r3(world.equipped_spawned / spawned if spawned else 0.0),
        "sim_time_s": _r3(t),
    }
    return {
        "v": PROTOCOL_VERSION,
        "type": "snapshot",
        "sim_time": _r3(t),
        "mode": mode.value,
        "status": world.status.value,
        "vehicles": vehicles,
        "signals": signals,
        "stats": stats,
        "config": {
            "flows": {a: world.cfg.flows[a] for a in ("W", "S", "E", "N")},
            "equipped_ratio": world.cfg.equipped_ratio,
            "approach_length": world.cfg.approach_length,
            "exit_length": world.cfg.exit_length,
            "cycle_s": world.plan.cycle_s,
            "plan": world.plan.to_dict(),
        },
    }


_COMMAND_TYPES = {"set_flow", "set_ratio", "set_speed", "set_plan", "end"}


def parse_command(msg: dict) -> tuple[str, dict]:
    """Validate an incoming frame; returns (kind, payload) for the mailbox."""
    ctype = msg.get("type")
    if ctype not in _COMMAND_TYPES:
        raise ValueError(f"unknown command type: {ctype!r}")
    if ctype == "set_flow":
        approach = msg.get("approach")
        if approach not in ("W", "S", "E", "N"):
            raise ValueError(f"set_flow: unknown approach {approach!r}")
        flow = msg.get("veh_per_hour")
        if not isinstance(flow, (int, float)) or flow < 0:
            raise ValueError("set_flow: veh_per_hour must be a number >= 0")
        return "set_flow", {"approach": approach, "veh_per_hour": float(flow)}
    if ctype == "set_ratio":
        ratio = msg.get("ratio")
        if not isinstance(ratio, (int, float)) or not 0 <= ratio <= 1:
            raise ValueError("set_ratio: ratio must be a number in [0, 1]")
        return "set_ratio", {"ratio": float(ratio)}
    if ctype == "set_speed":
        return "set_speed", {"mode": msg.get("mode")}
    if ctype == "set_plan":
        plan = msg.get("plan")
        if not isinstance(plan, dict):
            raise ValueError("set_plan: plan must be an object")
        return "set_plan", {"plan": plan}
    return "end", {}


class LiveServer:
    """Runs one world and its WebSocket/HTTP endpoint until the world ends."""

    def __init__(self, world: World, port: int = 8080,
                 mode: SpeedMode = SpeedMode.SLOW,
                 ui_dir: Optional[str] = None,
                 duration_s: Optional[float] = None,
                 out_parent: Optional[str] = None):
        self.world = world
        self.requested_port = port
        self.port: Optional[int] = None
        self.mode = mode
        self.ui_dir = ui_dir
        self.duration_s = duration_s
        self.out_parent = out_parent
        self.out_dir: Optional[str] = None
        self.mailbox: queue.Queue = queue.Queue()
        self.runner = Runner(world, mode=mode, mailbox=self.mailbox,
                             snapshot_fn=lambda w, r: snapshot_of(w, r.mode))
        self._ended = threading.Event()
        self._started = threading.Event()
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._world_thread: Optional[threading.Thread] = None
        self._server_thread: Optional[threading.Thread] = None
        self._clients: set = set()
        self._startup_error: Optional[BaseException] = None

    # --------------------------------------------------------------- lifecycle

    def start(self) -> None:
        self._world_thread = threading.Thread(target=self._run_world,
                                              name="intersim-world", daemon=True)
        self._server_thread = threading.Thread(target=self._run_server,
                                               name="intersim-server", daemon=True)
        self._server_thread.start()
        if not self._started.wait(timeout=10.0):
            raise RuntimeError("server did not start in time")
        if self._startup_error is not None:
            raise self._startup_error
        self._world_thread.start()

    def join(self) -> None:
        """Block until the world terminates and the endpoint is down."""
        self._world_thread.join()
        self._server_thread.join()

    def stop(self) -> None:
        """Ask the world to end (idempotent)."""
        self.mailbox.put(("end", {}, None))

    def _run_world(self) -> None:
        try:
            self.runner.run(duration_s=self.duration_s)
        finally:
            self._ended.set()
            # answer anything still queued so no client awaits forever
            while True:
                try:
                    _, _, reply = self.mailbox.get_nowait()
                except queue.Empty:
                    break
                if reply is not None:
                    reply((False, "world ended"))
            if self.out_parent is not None:
                self.out_dir = write_outputs(self.world.metrics, self.out_parent,
                                             self.runner.mode.value)
            if self._loop is not None:
                self._loop.call_soon_threadsafe(lambda: None)  # wake the waiter

    def _run_server(self) -> None:
        asyncio.run(self._serve_async())

    # ------------------------------------------------------------------- async

    async def _serve_async(self) -> None:
        self._loop = asyncio.get_running_loop()
        app = web.Application()
        app.router.add_get("/ws", self._ws_handler)
        ui_root = self._resolve_ui_dir()
        app.router.add_get("/", self._index_factory(ui_root))
        if ui_root is not None:
            app.router.add_static("/", str(ui_root))
        runner = web.AppRunner(app)
        try:
            await runner.setup()
            site = web.TCPSite(runner, host="127.0.0.1", port=self.requested_port)
            await site.start()
            self.port = site._server.sockets[0].getsockname()[1]
        except BaseException as exc:
            self._startup_error = exc
            self._started.set()
            await runner.cleanup()
            return
        self._started.set()
        broadcaster = asyncio.ensure_future(self._broadcast())
        try:
            while not self._ended.is_set():
                await asyncio.sleep(0.05)
        finally:
            broadcaster.cancel()
            for ws in list(self._clients):
                await ws.close()
            await runner.cleanup()

    def _resolve_ui_dir(self) -> Optional[Path]:
        if self.ui_dir is not None:
            p = Path(self.ui_dir)
            if not p.is_dir():
                raise FileNotFoundError(f"UI directory not found: {p}")
            return p
        candidate = Path.cwd() / "frontend" / "dist"
        if candidate.is_dir():
            return candidate
        return None

    def _index_factory(self, ui_root: Optional[Path]):
        async def index(request):
            if ui_root is not None and (ui_root / "index.html").is_file():
                return web.FileResponse(ui_root / "index.html")
            return web.Response(text=_FALLBACK_PAGE, content_type="text/html")
        return index

    async def _request_snapshot(self) -> Optional[dict]:
        if self._ended.is_set():
            return None
        fut: concurrent.futures.Future = concurrent.futures.Future()
        self.mailbox.put(("snapshot", {}, fut.set_result))
        try:
            ok, result = await asyncio.wait_for(asyncio.wrap_future(fut), timeout=2.0)
        except (asyncio.TimeoutError, concurrent.futures.CancelledError):
            return None
        return result if ok else None

    async def _broadcast(self) -> None:
        while not self._ended.is_set():
            if self._clients:
                snap = await self._request_snapshot()
                if snap is not None:
                    text = json.dumps(snap)
                    for ws in list(self._clients):
                        try:
                            await ws.send_str(text)
                        except ConnectionError:
                            self._clients.discard(ws)
            await asyncio.sleep(SNAPSHOT_INTERVAL_S)

    async def _ws_handler(self, request):
        ws = web.WebSocketResponse()
        await ws.prepare(request)
        self._clients.add(ws)
        try:
            snap = await self._request_snapshot()
            if snap is not None:
                await ws.send_str(json.dumps(snap))
            async for msg in ws:
                if msg.type != WSMsgType.TEXT:
                    continue
                await self._handle_frame(ws, msg.data)
        finally:
            self._clients.discard(ws)
        return ws

    async def _handle_frame(self, ws, data: str) -> None:
        request_id = None
        try:
            frame = json.loads(data)
            if not isinstance(frame, dict):
                raise ValueError("frame must be a JSON object")
            request_id = frame.get("request_id")
            kind, payload = parse_command(frame)
        except ValueError as exc:
            await ws.send_str(json.dumps(
                {"type": "error", "request_id": request_id, "message": str(exc)}))
            return
        if self._ended.is_set():
            await ws.send_str(json.dumps(
                {"type": "error", "request_id": request_id, "message": "world ended"}))
            return
        fut: concurrent.futures.Future = concurrent.futures.Future()
        self.mailbox.put((kind, payload, fut.set_result))
        try:
            ok, result = await asyncio.wait_for(asyncio.wrap_future(fut), timeout=5.0)
        except asyncio.TimeoutError:
            await ws.send_str(json.dumps(
                {"type": "error", "request_id": request_id, "message": "command timed out"}))
            return
        if ok:
            await ws.send_str(json.dumps({"type": "ack", "request_id": request_id}))
        else:
            await ws.send_str(json.dumps(
                {"type": "error", "request_id": request_id, "message": result}))


def serve(world: World, port: int, mode: SpeedMode = SpeedMode.SLOW,
          ui_dir: Optional[str] = None, duration_s: Optional[float] = None,
          out_parent: Optional[str] = None) -> LiveServer:
    """Blocking convenience: run the endpoint until the world ends."""
    server = LiveServer(world, port=port, mode=mode, ui_dir=ui_dir,
                        duration_s=duration_s, out_parent=out_parent)
    server.start()
    try:
        server.join()
    except KeyboardInterrupt:
        server.stop()
        server.join()
    return server


_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>intersim</title></head>
<body style="font-family: monospace; background: #111; color: #ddd">
<h2>intersim live server</h2>
<p>No UI bundle found (build the frontend into frontend/dist or pass --ui-dir).
Raw snapshot feed below.</p>
<pre id="out">connecting...</pre>
<script>
  const ws = new WebSocket(`ws://${location.host}/ws`);
  ws.onmessage = (ev) => {
    const m = JSON.parse(ev.data);
    if (m.type === "snapshot")
      document.getElementById("out").textContent = JSON.stringify(m.stats, null, 2);
  };
  ws.onclose = () => document.getElementById("out").textContent += "\\n[closed]";
</script>
</body></html>
"""
