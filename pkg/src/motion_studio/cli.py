"""Headless command-line driver: serve, play, analyze, replay, validate.

Every subcommand exits nonzero with a message on stderr when anything is
wrong. Playback and replay run the simulation in fast (non-paced) mode, so
reruns on the same inputs produce identical outputs.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path

from .arm_model import ConfigError, RobotModel, load_robot_model
from .moa_metrics import (
    AnalysisError,
    MetricConfig,
    analyze_log,
    metric_series,
)
from .resources import builtin_path, default_bindings
from .sim_exec import (
    ControllerGains,
    SimState,
    play_sequence,
    replay_events,
)
from .server import ServerConfig, StudioServer
from .teleop import BindingMap, TeleopConfig, load_events
from .timeline import TimelineError, load_sequence, validate_sequence
from .trajectory_log import LogFormatError, TrajectoryLog

log = logging.getLogger(__name__)

CONFIG_ENV_VAR = "MOTION_STUDIO_CONFIG"


class CliError(Exception):
    pass


def _load_model(path: str) -> RobotModel:
    candidate = Path(path)
    if not candidate.exists():
        builtin = builtin_path(f"{path}.json")
        if builtin.exists():
            return load_robot_model(builtin)
        raise CliError(f"robot config not found: {path}")
    return load_robot_model(candidate)


def _load_metric_config(path: str | None) -> MetricConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return MetricConfig()
    try:
        return MetricConfig.load(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load metric config {path}: {exc}") from exc


def _load_bindings(path: str | None) -> BindingMap:
    if path is None:
        return default_bindings()
    return BindingMap.load(path)


def _model_for_log(trajectory: TrajectoryLog, model_flag: str | None) -> RobotModel:
    if model_flag:
        return _load_model(model_flag)
    meta = trajectory.metadata
    if "model_def" in meta:
        return load_robot_model(meta["model_def"])
    name = meta.get("model")
    if name:
        builtin = builtin_path(f"{name}.json")
        if builtin.exists():
            return load_robot_model(builtin)
    raise CliError(
        "log carries no model definition; pass --model with the robot config"
    )


def cmd_play(args) -> int:
    model = _load_model(args.model)
    seq = load_sequence(args.seq)
    validate_sequence(seq, model)
    if seq.robot != model.name:
        raise CliError(
            f"sequence targets model {seq.robot!r} but config is {model.name!r}"
        )
    state = SimState.at_rest(model)
    gains = ControllerGains.default_for(model)
    state, trajectory = play_sequence(state, model, gains, seq, record_rate=args.rate)
    trajectory.to_csv(args.out)
    print(f"wrote {trajectory.n_samples} rows to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    trajectory = TrajectoryLog.from_csv(args.log)
    model = _model_for_log(trajectory, args.model)
    cfg = _load_metric_config(args.config)
    intended = {}
    for item in args.intended or []:
        if "=" not in item:
            raise CliError(f"--intended expects dimension=label, got {item!r}")
        dim, label = item.split("=", 1)
        intended[dim.strip()] = label.strip()
    report = analyze_log(
        trajectory,
        model,
        cfg,
        impressions=args.impressions,
        meaning=args.meaning,
        intended=intended or None,
    )
    out = Path(args.out)
    out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    text_path = Path(args.text) if args.text else out.with_suffix(".txt")
    text_path.write_text(report.render_text())
    if args.series:
        series = metric_series(trajectory, model, cfg)
        lines = ["t,speed,jerk_magnitude"]
        for i in range(len(series["t"])):
            lines.append(
                f"{series['t'][i]!r},{series['speed'][i]!r},{series['jerk_magnitude'][i]!r}"
            )
        Path(args.series).write_text("\n".join(lines) + "\n")
    labels = report.classification.labels()
    print(
        "classified: "
        + ", ".join(f"{dim}={labels[dim]}" for dim in ("spatial", "temporal", "weight", "flow"))
    )
    if report.inconsistencies:
        print(f"intent mismatches: {', '.join(report.inconsistencies)}")
    print(f"wrote {out} and {text_path}")
    return 0


def cmd_replay(args) -> int:
    model = _load_model(args.model)
    events = load_events(args.events)
    bindings = _load_bindings(args.bindings)
    trajectory = replay_events(
        model,
        events,
        bindings,
        record_rate=args.rate,
        tail=args.tail,
    )
    trajectory.to_csv(args.out)
    print(f"replayed {len(events)} events into {trajectory.n_samples} rows at {args.out}")
    return 0


def cmd_validate(args) -> int:
    checked = 0
    if args.model:
        _load_model(args.model)
        print(f"model config ok: {args.model}")
        checked += 1
    if args.seq:
        seq = load_sequence(args.seq)
        if args.model:
            validate_sequence(seq, _load_model(args.model))
        print(f"sequence ok: {args.seq} ({len(seq.channels)} channels, {seq.duration} s)")
        checked += 1
    if args.bindings:
        BindingMap.load(args.bindings)
        print(f"bindings ok: {args.bindings}")
        checked += 1
    if args.events:
        events = load_events(args.events)
        print(f"events ok: {args.events} ({len(events)} events)")
        checked += 1
    if not checked:
        raise CliError("nothing to validate; pass --model/--seq/--bindings/--events")
    return 0


def cmd_serve(args) -> int:
    model = _load_model(args.model)
    bindings = _load_bindings(args.bindings)
    metric_cfg = _load_metric_config(args.metric_config)
    cfg = ServerConfig(
        host=args.host,
        port=args.port,
        tcp_port=args.tcp_port,
        broadcast_rate=args.rate,
        fast=args.fast,
        record_events=args.record_events,
    )
    server = StudioServer(
        model,
        bindings=bindings,
        teleop_cfg=TeleopConfig(),
        metric_cfg=metric_cfg,
        config=cfg,
    )
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motion-studio",
        description="Expressive-motion design toolbox for a simulated arm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the streaming simulation server")
    p.add_argument("--model", required=True, help="robot config JSON (or builtin name)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765, help="WebSocket port (endpoint /ws)")
    p.add_argument("--tcp-port", type=int, default=None, help="framed-TCP port (default port+1)")
    p.add_argument("--rate", type=float, default=50.0, help="snapshot broadcast Hz")
    p.add_argument("--fast", action="store_true", help="free-run without wall-clock pacing")
    p.add_argument("--bindings", default=None, help="binding map JSON")
    p.add_argument("--metric-config", default=None, help="metric config JSON")
    p.add_argument(
        "--record-events", default=None, help="write applied input events here on shutdown"
    )
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("play", help="execute a sequence headlessly and log it")
    p.add_argument("--seq", required=True, help="sequence JSON")
    p.add_argument("--model", required=True, help="robot config JSON (or builtin name)")
    p.add_argument("--out", required=True, help="output CSV log")
    p.add_argument("--rate", type=float, default=100.0, help="record rate Hz")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("analyze", help="movement-quality report for a log")
    p.add_argument("--log", required=True, help="CSV trajectory log")
    p.add_argument("--model", default=None, help="robot config (defaults to the log's)")
    p.add_argument("--config", default=None, help=f"metric config JSON (or ${CONFIG_ENV_VAR})")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--text", default=None, help="output text rendering (default: <out>.txt)")
    p.add_argument("--series", default=None, help="optional CSV of speed/jerk time series")
    p.add_argument("--impressions", default=None, help="step-1 free text")
    p.add_argument("--meaning", default=None, help="step-3 free text")
    p.add_argument(
        "--intended",
        action="append",
        metavar="DIM=LABEL",
        help="intended tonality, e.g. spatial=unidirectional (repeatable)",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay", help="re-simulate a recorded teleop event stream")
    p.add_argument("--events", required=True, help="events JSON")
    p.add_argument("--model", required=True, help="robot config JSON (or builtin name)")
    p.add_argument("--out", required=True, help="output CSV log")
    p.add_argument("--bindings", default=None, help="binding map JSON")
    p.add_argument("--rate", type=float, default=100.0, help="record rate Hz")
    p.add_argument("--tail", type=float, default=1.0, help="seconds to run past the last event")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("validate", help="check config/sequence/bindings/events files")
    p.add_argument("--model", default=None)
    p.add_argument("--seq", default=None)
    p.add_argument("--bindings", default=None)
    p.add_argument("--events", default=None)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MOTION_STUDIO_LOGLEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        TimelineError,
        AnalysisError,
        LogFormatError,
        ValueError,
        KeyError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
