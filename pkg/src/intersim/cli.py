"""Batch entry point and launcher for the live server.

Examples::

    intersim --duration 600 --seed 7 --mode headless
    intersim --flows 1800,1800,1800,1800 --ratio 0.7 --duration 3600
    intersim --serve 8080 --mode slow --flows 900,900,900,900

Exit codes: 0 normal end, 1 configuration error, 2 anomaly abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .core import APPROACHES, ConfigError, SimConfig
from .engine import Runner, SpeedMode, World, WorldStatus
from .metrics import OutputError, write_outputs
from .signals import PlanError, default_plan, load_plan, save_plan
from .server import LiveServer


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="intersim",
                description="Single-intersection traffic simulator with live steering.")
    p.add_argument("--config", metavar="FILE", help="JSON config mirroring SimConfig fields")
    p.add_argument("--duration", metavar="S", type=float,
                   help="simulated seconds to run (default: until END/Ctrl-C)")
    p.add_argument("--flows", metavar="W,S,E,N",
                   help="per-approach demand in veh/hour, overrides config")
    p.add_argument("--ratio", metavar="R", type=float,
                   help="equipped-vehicle ratio in [0,1], overrides config")
    p.add_argument("--seed", metavar="N", type=int, help="RNG seed, overrides config")
    p.add_argument("--mode", choices=[m.value for m in SpeedMode],
                   default=SpeedMode.HEADLESS.value, help="pacing mode (default headless)")
    p.add_argument("--plan", metavar="FILE", help="signal plan JSON (default 90 s, 45/45)")
    p.add_argument("--out", metavar="DIR", default="./result",
                   help="parent directory for result folders (default ./result)")
    p.add_argument("--warmup", metavar="S", type=float, default=0.0,
                   help="sim time before which rows are summarized separately (rows are kept)")
    p.add_argument("--serve", metavar="PORT", type=int,
                   help="start the live steering server on PORT instead of a plain batch run")
    p.add_argument("--ui-dir", metavar="DIR",
                   help="static UI bundle to serve (default: ./frontend/dist if present)")
    return p


def _load_config(args) -> SimConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = SimConfig.from_dict(json.load(fh))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
    else:
        cfg = SimConfig()
    if args.flows is not None:
        parts = args.flows.split(",")
        if len(parts) != 4:
            raise ConfigError("flows must be four comma-separated numbers: W,S,E,N")
        try:
            values = [float(x) for x in parts]
        except ValueError:
            raise ConfigError("flows must be numeric")
        cfg.flows = dict(zip(APPROACHES, values))
    if args.ratio is not None:
        cfg.equipped_ratio = args.ratio
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _echo_run(out_dir: str, world: World, mode: SpeedMode, warmup_s: float) -> None:
    """Drop the fully-resolved config, plan and a plain-text run log into the
    result folder so the CSVs are reproducible from the folder alone."""
    cfg = world.cfg
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
    save_plan(world.plan, os.path.join(out_dir, "plan.json"))
    m = world.metrics
    lines = [
        f"mode: {mode.value}",
        f"seed: {cfg.seed}",
        f"sim time: {world.time_s:.1f} s ({world.tick_index} ticks)",
        f"status: {world.status.value}",
    ]
    for a in APPROACHES:
        lam = cfg.flows[a] / 3600.0
        lines.append(f"flow {a}: {cfg.flows[a]:.0f} veh/h (lambda={lam:.4f}/s)")
    lines.append(f"equipped ratio: {cfg.equipped_ratio:.3f}")
    lines.append(f"spawned: {world.spawned_total}  placed: {m.placed_total}  "
                 f"crossed: {m.crossed_total}  pending at end: {world.arrivals.pending_total()}")
    overall = m.summary()
    lines.append(f"overall: completed={overall['completed']} "
                 f"mean_delay={overall['mean_delay_s']:.3f}s "
                 f"total_stops={overall['total_stops']} "
                 f"total_stop_time={overall['total_stop_time_s']:.1f}s")
    if warmup_s > 0:
        warm = m.summary(since_s=warmup_s)
        lines.append(f"post-warmup (t >= {warmup_s:.0f}s): completed={warm['completed']} "
                     f"mean_delay={warm['mean_delay_s']:.3f}s")
    if world.anomaly is not None:
        lines.append(f"anomaly: {world.anomaly.message}")
    with open(os.path.join(out_dir, "run.log"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # argparse error or --help; keep main() callable
        return int(exc.code or 0)
    try:
        cfg = _load_config(args)
        if args.plan:
            plan = load_plan(args.plan)
        else:
            plan = default_plan()
    except (ConfigError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    mode = SpeedMode(args.mode)
    if args.serve is not None:
        return _run_server(cfg, plan, mode, args)

    world = World(cfg, plan=plan)
    runner = Runner(world, mode=mode)
    try:
        runner.run(duration_s=args.duration)
    except KeyboardInterrupt:
        world.end()
    try:
        out_dir = write_outputs(world.metrics, args.out, mode.value)
        _echo_run(out_dir, world, mode, args.warmup)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"results: {out_dir}")
    if world.status is WorldStatus.ABORTED:
        print(f"anomaly: {world.anomaly.message}", file=sys.stderr)
        return 2
    return 0


def _run_server(cfg: SimConfig, plan, mode: SpeedMode, args) -> int:
    world = World(cfg, plan=plan)
    server = LiveServer(world, port=args.serve, mode=mode, ui_dir=args.ui_dir,
                        duration_s=args.duration, out_parent=args.out)
    try:
        server.start()
    except (OSError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"serving on http://127.0.0.1:{server.port}/ (ws at /ws)")
    try:
        server.join()
    except KeyboardInterrupt:
        server.stop()
        server.join()
    if server.out_dir:
        try:
            _echo_run(server.out_dir, world, server.runner.mode, args.warmup)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"results: {server.out_dir}")
    if world.status is WorldStatus.ABORTED:
        print(f"anomaly: {world.anomaly.message}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
