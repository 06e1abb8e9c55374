"""Command-line entry points.

Four subcommands: `play` runs a live or simulated session, `simulate` renders
a synthetic solo performance to a MIDI file, `evaluate` scores the follower
and tempo tracker against simulated ground truth, `init-weights` writes a
seeded random model. Failures map to distinct exit codes (see --help).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import List, Optional, Tuple

from .engine import EngineError
from .follower import FollowerError
from .mixer import WeightsError, random_init, save_weights
from .score import ScoreError
from .server import ServerStartupError
from .session import SessionConfig, SessionConfigError, run_session
from .sim import SimConfig, SimConfigError, evaluate, load_sim_config, sim_config_from_dict, simulate
from .sinks import DeviceUnavailableError
from .smf import SMFError, parse_smf, write_performance_smf
from .tempo import TempoError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCORE = 4
EXIT_WEIGHTS = 5
EXIT_DEVICE = 6
EXIT_PORT = 7

EXIT_CODE_HELP = """\
exit codes:
  0  success
  2  usage or invalid configuration
  3  file I/O error
  4  score file malformed or unusable
  5  weights file malformed
  6  MIDI device unavailable
  7  WebSocket port unavailable
"""


def _parse_clock(text: str) -> Tuple[str, float]:
    if text == "realtime":
        return "realtime", 0.0
    if text == "virtual":
        return "virtual", 0.0
    if text.startswith("virtual:"):
        try:
            factor = float(text.split(":", 1)[1])
        except ValueError:
            raise SessionConfigError(f"bad clock factor in {text!r}")
        if factor <= 0.0:
            raise SessionConfigError("clock factor must be > 0")
        return "virtual", factor
    raise SessionConfigError(
        f"unknown clock {text!r}: use realtime, virtual, or virtual:<factor>"
    )


def _parse_output(text: str) -> Tuple[str, Optional[str]]:
    if text == "mem":
        return "mem", None
    if text.startswith("file:"):
        return "file", text[5:]
    if text.startswith("device:"):
        return "device", text[7:]
    raise SessionConfigError(
        f"unknown output {text!r}: use mem, file:<path>, or device:<name>"
    )


def _load_track_config(path: Optional[str]) -> Tuple[Optional[int], Optional[int]]:
    if path is None:
        return None, None
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScoreError(f"{path}: not valid JSON: {exc}") from exc
    unknown = set(doc) - {"solo_track", "accomp_track"}
    if unknown:
        raise ScoreError(f"{path}: unknown config key {sorted(unknown)[0]!r}")
    return doc.get("solo_track"), doc.get("accomp_track")


def _sim_config(args) -> SimConfig:
    cfg = load_sim_config(args.sim_config) if args.sim_config else SimConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _cmd_play(args) -> int:
    solo_track, accomp_track = _load_track_config(args.config)
    clock, speed = _parse_clock(args.clock)
    sink, sink_arg = _parse_output(args.output)
    sim_cfg = None
    input_device = None
    if args.input == "sim":
        sim_cfg = _sim_config(args)
    elif args.input.startswith("device:"):
        input_device = args.input[7:]
    else:
        raise SessionConfigError(
            f"unknown input {args.input!r}: use sim or device:<name>"
        )
    cfg = SessionConfig(
        score_path=args.score,
        weights_path=args.weights,
        sim=sim_cfg,
        input_device=input_device,
        sink=sink,
        sink_arg=sink_arg,
        ws_port=args.ws_port,
        clock=clock,
        clock_speed=speed,
        freeze_timeout=args.freeze_timeout,
        solo_track=solo_track,
        accomp_track=accomp_track,
    )
    result = run_session(cfg)
    print(
        f"session done: {result.solo_count} solo events, "
        f"{result.emitted_count} accompaniment notes emitted"
        + (f", {result.dropped_frames} telemetry frames dropped" if result.dropped_frames else ""),
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    solo_track, accomp_track = _load_track_config(args.config)
    sink, sink_arg = _parse_output(args.output)
    if sink != "file":
        raise SessionConfigError("simulate writes a MIDI file: use --output file:<path>")
    with open(args.score, "rb") as fh:
        solo, _, _ = parse_smf(fh.read(), solo_track=solo_track, accomp_track=accomp_track)
    from .score import PerformedNote

    result = simulate(solo, _sim_config(args))
    performed = [
        PerformedNote(
            pitch=n.pitch,
            onset_seconds=n.onset_seconds,
            velocity=n.velocity,
            duration_seconds=n.duration_seconds,
        )
        for n in result.notes
    ]
    with open(sink_arg, "wb") as fh:
        fh.write(write_performance_smf(performed))
    print(
        f"wrote {len(performed)} performed notes to {sink_arg} "
        f"({len(result.skipped)} skipped)",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    solo_track, accomp_track = _load_track_config(args.config)
    with open(args.score, "rb") as fh:
        solo, _, _ = parse_smf(fh.read(), solo_track=solo_track, accomp_track=accomp_track)
    report, trace = evaluate(solo, _sim_config(args))
    sys.stdout.buffer.write(report.to_json(include_timing=args.timing))
    sys.stdout.buffer.flush()
    print(report.format_table(), file=sys.stderr)
    if args.report_dir:
        from .report import write_report_dir

        write_report_dir(args.report_dir, report, trace, include_timing=args.timing)
        print(f"report files written to {args.report_dir}", file=sys.stderr)
    return EXIT_OK


def _cmd_init_weights(args) -> int:
    weights = random_init(
        args.seed if args.seed is not None else 0,
        hidden=args.hidden,
        hidden1=args.hidden1,
        hidden2=args.hidden2,
    )
    with open(args.output_file, "wb") as fh:
        fh.write(save_weights(weights))
    print(f"wrote weights to {args.output_file}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accompanist",
        description="Expressive real-time accompaniment: follow a soloist, "
        "track tempo, and schedule an expressively rendered accompaniment.",
        epilog=EXIT_CODE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, score=True):
        if score:
            p.add_argument("--score", required=True, help="score MIDI file (solo + accompaniment tracks)")
            p.add_argument("--config", help="JSON file with solo_track / accomp_track overrides")
        p.add_argument("--seed", type=int, help="override the simulation seed")
        p.add_argument("--sim-config", help="simulation config JSON file")

    p = sub.add_parser("play", help="run a live or simulated session", epilog=EXIT_CODE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--weights", help="model weights JSON (default: neutral deadpan model)")
    p.add_argument("--input", default="sim", help="solo input: sim or device:<name> (default sim)")
    p.add_argument("--output", default="mem", help="accompaniment output: mem, file:<path>, or device:<name> (default mem)")
    p.add_argument("--ws-port", type=int, help="serve UI telemetry/control WebSocket on this port")
    p.add_argument("--clock", default="realtime", help="realtime, virtual, or virtual:<factor> (default realtime)")
    p.add_argument("--freeze-timeout", type=float, default=5.0, help="seconds of solo silence before the queue freezes (default 5)")
    p.set_defaults(func=_cmd_play)

    p = sub.add_parser("simulate", help="render a synthetic solo performance to a MIDI file", epilog=EXIT_CODE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--output", default="file:performance.mid", help="file:<path> for the performed stream (default file:performance.mid)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score follower + tempo tracking against simulated ground truth", epilog=EXIT_CODE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--report-dir", help="also write report.json, events.csv, and PNG figures here")
    p.add_argument("--timing", action="store_true", help="include wall-clock latency fields in the JSON report (breaks byte-for-byte reproducibility)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("init-weights", help="write seeded random model weights", epilog=EXIT_CODE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("-o", "--output-file", required=True, help="weights JSON path")
    p.add_argument("--hidden", type=int, default=16, help="onsetwise hidden size (default 16)")
    p.add_argument("--hidden1", type=int, default=16, help="notewise first hidden size (default 16)")
    p.add_argument("--hidden2", type=int, default=16, help="notewise second hidden size (default 16)")
    p.set_defaults(func=_cmd_init_weights)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("ACCOMP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits; keep main() a total function
        return int(exc.code or 0)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted, shutting down", file=sys.stderr)
        return EXIT_OK
    except (SMFError, ScoreError) as exc:
        print(f"score error: {exc}", file=sys.stderr)
        return EXIT_SCORE
    except WeightsError as exc:
        print(f"weights error: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except DeviceUnavailableError as exc:
        print(f"device error: {exc}", file=sys.stderr)
        return EXIT_DEVICE
    except ServerStartupError as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return EXIT_PORT
    except (
        SimConfigError,
        SessionConfigError,
        EngineError,
        FollowerError,
        TempoError,
    ) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        filename = getattr(exc, "filename", None)
        where = f" ({filename})" if filename else ""
        print(f"I/O error: {exc}{where}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
