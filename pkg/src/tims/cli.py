"""Command-line front end.

Subcommands:

- run: execute one scripted trial from a TOML config and print its metrics
- demo-record: produce demonstration files (synthetic expert, or captured
  from a live bus)
- fit-guide: fit a guide path to demonstration files
- analyze: rebuild metrics from a session log; table + JSON + CSV outputs
- replay: stream a recorded session log back into a live bus
- serve: start the TCP bus, the HTTP/WebSocket endpoint, and session control
"""

from __future__ import annotations

import argparse
import json
import math
import signal
import sys
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, lfd, operators
from .analytics import Setting
from .bus import Broker, SessionLog, replay as bus_replay
from .netserve import (
    BusClient,
    EngineHttpServer,
    TcpBusServer,
    env_bus_port,
    env_http_port,
    env_log_dir,
)
from .phantom import default_phantom, load_phantom
from .session import SessionConfig, SessionController, build_guide, run_trial


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _default_guide(standoff_um: float = 200.0, resample_count: int = 200,
                   expert_seed: int = 7) -> lfd.GuidePath:
    return build_guide(
        default_phantom(), standoff_um=standoff_um,
        resample_count=resample_count, expert_seed=expert_seed)


def _print_metrics_table(trials: list[analytics.TrialMetrics]) -> None:
    header = f"{'trial':24s} {'setting':8s} {'rmse_um':>10s} {'insertion_um':>12s} {'time_s':>8s} {'reminders':>9s}"
    print(header)
    print("-" * len(header))
    for t in trials:
        mean_err = (float(np.mean(t.insertion_errors_um))
                    if t.insertion_errors_um else math.nan)
        print(f"{t.trial_id:24s} {t.setting.value:8s} {t.trajectory_rmse_um:10.1f} "
              f"{mean_err:12.1f} {t.time_cost_s:8.1f} {t.reminder_count:9d}")


# ---------------------------------------------------------------------------
# run

def cmd_run(args: argparse.Namespace) -> int:
    if args.config is not None:
        try:
            cfg = SessionConfig.from_toml(args.config)
        except FileNotFoundError:
            return _fail(f"config file not found: {args.config}")
        except (ValueError, KeyError, TypeError) as e:
            return _fail(f"bad config: {e}")
    else:
        cfg = SessionConfig()
    if args.setting is not None:
        cfg = replace(cfg, setting=Setting(args.setting))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trial_id is not None:
        cfg = replace(cfg, trial_id=args.trial_id)

    phantom = load_phantom(args.phantom) if args.phantom else None
    guide = lfd.load_guidepath(args.guide) if args.guide else None
    record = args.record is not None
    result = run_trial(cfg, guide=guide, phantom=phantom, record=record)
    if record:
        result.log.write(args.record)
        print(f"log written to {args.record}")
    _print_metrics_table([result.metrics])
    if args.metrics_json is not None:
        with open(args.metrics_json, "w", encoding="utf-8") as fh:
            json.dump(result.metrics.to_json_obj(), fh, indent=2)
        print(f"metrics written to {args.metrics_json}")
    return 0


# ---------------------------------------------------------------------------
# demo-record

def cmd_demo_record(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.from_bus:
        return _record_from_bus(args, out_dir)
    phantom = load_phantom(args.phantom) if args.phantom else default_phantom()
    demos = operators.expert_demonstrations(
        phantom, standoff_um=args.standoff, n_demos=args.count, seed=args.seed)
    for i, points in enumerate(demos):
        demo = lfd.preprocess(points, n=args.resample, source_id=f"demo-{i:02d}")
        path = out_dir / f"demo-{i:02d}.jsonl"
        lfd.save_demo(path, demo)
        print(f"wrote {path} ({len(points)} raw points -> {args.resample})")
    return 0


def _record_from_bus(args: argparse.Namespace, out_dir: Path) -> int:
    """Capture the follower trajectory from a live bus into one demo file."""
    try:
        client = BusClient(args.host, args.port or env_bus_port())
    except OSError as e:
        return _fail(f"cannot connect to bus: {e}")
    try:
        client.subscribe(["follower"])
        points: list[list[float]] = []
        deadline = threading.Event()
        timer = threading.Timer(args.duration, deadline.set)
        timer.start()
        print(f"recording follower positions for {args.duration:.0f}s ...")
        while not deadline.is_set():
            env = client.next_envelope(timeout=0.2)
            if env is not None and env.device_id == "follower":
                points.append(list(env.payload["position_um"]))
        timer.cancel()
    finally:
        client.close()
    if len(points) < 2:
        return _fail("captured fewer than 2 follower samples; is a trial running?")
    demo = lfd.preprocess(np.asarray(points), n=args.resample, source_id="bus-capture")
    path = out_dir / "demo-bus.jsonl"
    lfd.save_demo(path, demo)
    print(f"wrote {path} ({len(points)} raw points -> {args.resample})")
    return 0


# ---------------------------------------------------------------------------
# fit-guide

def cmd_fit_guide(args: argparse.Namespace) -> int:
    demos = []
    for i, demo_path in enumerate(args.demos):
        try:
            raw, source_id = lfd.load_demo_points(demo_path)
        except FileNotFoundError:
            return _fail(f"demo file not found: {demo_path}")
        except ValueError as e:
            return _fail(str(e))
        demos.append(lfd.preprocess(raw, n=args.resample,
                                    source_id=source_id or f"demo-{i:02d}"))
    demo_set = lfd.DemonstrationSet(demos=tuple(demos), resample_count=args.resample)
    try:
        _model, guide = lfd.fit(demo_set)
    except lfd.NumericalError as e:
        return _fail(f"fit failed: {e}")
    lfd.save_guidepath(args.out, guide)
    max_ci = float(np.max(guide.ci_halfwidth)) if len(guide) else 0.0
    print(f"wrote {args.out}: {len(guide)} points, max CI half-width {max_ci:.1f} um")
    return 0


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        log = SessionLog.read(args.log)
    except FileNotFoundError:
        return _fail(f"log file not found: {args.log}")
    except Exception as e:
        return _fail(str(e))
    if args.guide is not None:
        guide = lfd.load_guidepath(args.guide)
    else:
        guide = _default_guide()
    try:
        metrics = analytics.metrics_from_log(log, guide)
    except analytics.LogParseError as e:
        return _fail(str(e))
    _print_metrics_table([metrics])
    json_path = Path(args.out)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_json_obj(), fh, indent=2)
    csv_path = json_path.with_suffix(".csv")
    analytics.write_metrics_csv(csv_path, [metrics])
    print(f"wrote {json_path} and {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# replay

def cmd_replay(args: argparse.Namespace) -> int:
    try:
        log = SessionLog.read(args.log)
    except FileNotFoundError:
        return _fail(f"log file not found: {args.log}")
    except Exception as e:
        return _fail(str(e))
    speed = math.inf if args.batch else args.speed
    if not (speed > 0):
        return _fail(f"speed must be > 0, got {speed}")
    try:
        client = BusClient(args.host, args.port or env_bus_port())
    except OSError as e:
        return _fail(f"cannot connect to bus: {e}")
    try:
        count = bus_replay(log, client, speed=speed)
    finally:
        client.close()
    print(f"replayed {count} envelopes from {args.log}")
    return 0


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args: argparse.Namespace) -> int:
    bus_port = args.bus_port if args.bus_port is not None else env_bus_port()
    http_port = args.http_port if args.http_port is not None else env_http_port()
    log_dir = Path(args.log_dir) if args.log_dir is not None else env_log_dir()
    static_dir = Path(args.static) if args.static is not None else None
    if static_dir is None:
        candidate = Path("frontend") / "dist"
        if candidate.is_dir():
            static_dir = candidate

    broker = Broker()
    controller = SessionController(broker, log_dir=log_dir)
    try:
        tcp = TcpBusServer(broker, host=args.host, port=bus_port)
    except OSError as e:
        return _fail(f"cannot bind bus port {bus_port}: {e}")
    try:
        http = EngineHttpServer(
            broker, controller, host=args.host, port=http_port,
            static_dir=static_dir)
    except OSError as e:
        tcp.close()
        return _fail(f"cannot bind http port {http_port}: {e}")

    print(f"bus: tcp://{args.host}:{tcp.port}")
    print(f"http: http://{args.host}:{http.port} (WebSocket /bus, REST /session)")
    if static_dir is not None:
        print(f"console assets: {static_dir}")
    if log_dir is not None:
        print(f"session logs: {log_dir}")
    print("press Ctrl-C to stop")

    stop = threading.Event()

    def _on_signal(_signum, _frame):
        stop.set()

    signal.signal(signal.SIGINT, _on_signal)
    signal.signal(signal.SIGTERM, _on_signal)
    try:
        while not stop.wait(0.5):
            pass
    finally:
        http.close()
        tcp.close()
    print("stopped")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tims",
        description="Simulated bilateral micromanipulation trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scripted trial")
    p_run.add_argument("--config", help="TOML config file (see docs/config.md)")
    p_run.add_argument("--setting", choices=[s.value for s in Setting],
                       help="override the feedback setting")
    p_run.add_argument("--seed", type=int, help="override the RNG seed")
    p_run.add_argument("--trial-id", help="override the trial id")
    p_run.add_argument("--guide", help="guide path JSON (default: fit from synthetic expert demos)")
    p_run.add_argument("--phantom", help="phantom JSON file (default: built-in)")
    p_run.add_argument("--record", metavar="LOG",
                       help="record the session log to this JSONL file")
    p_run.add_argument("--metrics-json", metavar="FILE",
                       help="also write metrics JSON to this file")
    p_run.set_defaults(func=cmd_run)

    p_demo = sub.add_parser("demo-record", help="produce demonstration files")
    p_demo.add_argument("-o", "--out-dir", default=".",
                        help="directory for demo JSONL files (default: .)")
    p_demo.add_argument("--count", type=int, default=3,
                        help="number of synthetic expert demos (default: 3)")
    p_demo.add_argument("--seed", type=int, default=7,
                        help="expert generator seed (default: 7)")
    p_demo.add_argument("--standoff", type=float, default=200.0,
                        help="hover height above the vessel in um (default: 200)")
    p_demo.add_argument("--resample", type=int, default=200,
                        help="points per demo after resampling (default: 200)")
    p_demo.add_argument("--phantom", help="phantom JSON file (default: built-in)")
    p_demo.add_argument("--from-bus", action="store_true",
                        help="capture the follower trajectory from a live bus instead")
    p_demo.add_argument("--host", default="127.0.0.1")
    p_demo.add_argument("--port", type=int, help="bus TCP port (default: TIMS_BUS_PORT or 7450)")
    p_demo.add_argument("--duration", type=float, default=10.0,
                        help="capture window in seconds for --from-bus (default: 10)")
    p_demo.set_defaults(func=cmd_demo_record)

    p_fit = sub.add_parser("fit-guide", help="fit a guide path to demo files")
    p_fit.add_argument("demos", nargs="+", help="demo JSONL files")
    p_fit.add_argument("-o", "--out", default="guide.json",
                       help="output guide path JSON (default: guide.json)")
    p_fit.add_argument("--resample", type=int, default=200,
                       help="points per demo before fitting (default: 200)")
    p_fit.set_defaults(func=cmd_fit_guide)

    p_an = sub.add_parser("analyze", help="compute metrics from a session log")
    p_an.add_argument("log", help="session log JSONL file")
    p_an.add_argument("--guide", help="guide path JSON (default: refit from defaults)")
    p_an.add_argument("-o", "--out", default="metrics.json",
                      help="metrics JSON output (CSV written alongside; default: metrics.json)")
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("replay", help="stream a session log into a live bus")
    p_rep.add_argument("log", help="session log JSONL file")
    p_rep.add_argument("--speed", type=float, default=1.0,
                       help="replay speed multiplier (default: 1.0)")
    p_rep.add_argument("--batch", action="store_true",
                       help="publish back-to-back with no sleeps")
    p_rep.add_argument("--host", default="127.0.0.1")
    p_rep.add_argument("--port", type=int, help="bus TCP port (default: TIMS_BUS_PORT or 7450)")
    p_rep.set_defaults(func=cmd_replay)

    p_srv = sub.add_parser("serve", help="start bus, HTTP endpoint, and console assets")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--bus-port", type=int,
                       help="TCP bus port (default: TIMS_BUS_PORT or 7450)")
    p_srv.add_argument("--http-port", type=int,
                       help="HTTP port (default: TIMS_HTTP_PORT or 7451)")
    p_srv.add_argument("--log-dir", help="session log directory (default: TIMS_LOG_DIR)")
    p_srv.add_argument("--static", help="console asset directory (default: frontend/dist if present)")
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
