"""Live session orchestration.

One loop owns the whole pipeline: it merges the incoming solo stream with the
engine's due accompaniment events in time order, runs follower → tempo →
engine atomically per solo note, emits to the sink, and publishes telemetry.
The loop is written against the clock interface, so a virtual-clock session
is a deterministic replay of exactly the realtime code path.

Ordering rules: at equal times the solo event is handled before emissions
fire (its reschedule may move them); a reschedule that pulls events into the
past fires them immediately at the current time. If the soloist goes silent,
the queue freezes after freeze_timeout seconds rather than playing on alone.
"""
from __future__ import annotations

import logging
import queue
import time as _time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .clock import RealtimeClock, VirtualClock
from .engine import AccompanimentEngine, ScheduledEvent
from .follower import INSERTION, FollowerParams, ScoreFollower
from .mixer import ModelWeights, load_weights, zero_weights
from .score import AccompanimentScore, SoloScore
from .server import (
    TelemetryServer,
    accomp_note_message,
    solo_note_message,
    tempo_message,
)
from .sim import SimConfig, SimNote, simulate
from .sinks import MemorySink, Sink, SMFCaptureSink, open_device_sink, open_device_source
from .smf import parse_smf
from .tempo import TempoParams, current_beat_period, init_state, step

log = logging.getLogger(__name__)

FREEZE_TIMEOUT = 5.0
REALTIME_CONTROL_POLL = 0.05


class SessionConfigError(Exception):
    pass


@dataclass
class SessionConfig:
    score_path: str
    weights_path: Optional[str] = None
    sim: Optional[SimConfig] = None  # simulated soloist; None → input_device
    input_device: Optional[str] = None
    sink: str = "mem"  # mem | file | device
    sink_arg: Optional[str] = None  # capture path or device name
    ws_port: Optional[int] = None
    clock: str = "virtual"  # virtual | realtime
    clock_speed: float = 0.0  # virtual only; 0 = unthrottled, else × realtime
    freeze_timeout: float = FREEZE_TIMEOUT
    solo_track: Optional[int] = None
    accomp_track: Optional[int] = None
    initial_beat_period: float = 0.5
    scaling: Optional[dict] = None  # initial target -> s, each clamped to [0, 2]

    def __post_init__(self) -> None:
        if self.sim is None and self.input_device is None:
            raise SessionConfigError("session needs an input source")
        if self.sink not in ("mem", "file", "device"):
            raise SessionConfigError(f"unknown sink kind {self.sink!r}")
        if self.sink in ("file", "device") and not self.sink_arg:
            raise SessionConfigError(f"sink {self.sink!r} needs a path or name")
        if self.clock not in ("virtual", "realtime"):
            raise SessionConfigError(f"unknown clock kind {self.clock!r}")
        if self.clock_speed < 0.0:
            raise SessionConfigError("clock speed must be >= 0")
        if self.ws_port is not None and not 1024 <= self.ws_port <= 65535:
            raise SessionConfigError("ws port must be in 1024..65535")
        if self.freeze_timeout <= 0.0:
            raise SessionConfigError("freeze timeout must be positive")


@dataclass
class SessionResult:
    sink: Sink
    solo_count: int = 0
    emitted_count: int = 0
    dropped_frames: int = 0
    latencies: List[float] = field(default_factory=list)


def _piece_message(solo: SoloScore, accomp: AccompanimentScore) -> dict:
    return {
        "type": "piece",
        "solo": [
            {"pitch": n.pitch, "onset_beats": n.onset, "duration_beats": n.duration}
            for n in solo.notes
        ],
        "accomp": [
            {"pitch": n.pitch, "onset_beats": n.onset, "duration_beats": n.duration}
            for n in accomp.notes
        ],
    }


def run_session(cfg: SessionConfig) -> SessionResult:
    with open(cfg.score_path, "rb") as fh:
        solo, accomp, _ = parse_smf(
            fh.read(), solo_track=cfg.solo_track, accomp_track=cfg.accomp_track
        )
    if cfg.weights_path is None:
        weights = zero_weights()
    else:
        with open(cfg.weights_path, "rb") as fh:
            weights = load_weights(fh.read())

    if cfg.sim is not None:
        stream: Sequence[SimNote] = simulate(solo, cfg.sim).notes
    else:
        stream = open_device_source(cfg.input_device)

    if cfg.sink == "mem":
        sink: Sink = MemorySink()
    elif cfg.sink == "file":
        sink = SMFCaptureSink(cfg.sink_arg)
    else:
        sink = open_device_sink(cfg.sink_arg)

    clock = VirtualClock(cfg.clock_speed) if cfg.clock == "virtual" else RealtimeClock()

    server: Optional[TelemetryServer] = None
    if cfg.ws_port is not None:
        server = TelemetryServer(cfg.ws_port, _piece_message(solo, accomp))
        server.start()

    try:
        return _run_loop(cfg, solo, accomp, weights, stream, sink, clock, server)
    finally:
        sink.close()
        if server is not None:
            server.stop()


def _run_loop(
    cfg: SessionConfig,
    solo: SoloScore,
    accomp: AccompanimentScore,
    weights: ModelWeights,
    stream: Sequence[SimNote],
    sink: Sink,
    clock,
    server: Optional[TelemetryServer],
) -> SessionResult:
    follower = ScoreFollower(solo, FollowerParams())
    tparams = TempoParams()
    fstate = follower.init_state()
    tstate = init_state(tparams)
    engine = AccompanimentEngine(
        accomp, weights, initial_beat_period=cfg.initial_beat_period
    )
    if cfg.scaling:
        for target, value in cfg.scaling.items():
            engine.set_scaling(target, value)
    onsets = solo.onsets
    result = SessionResult(sink=sink)

    def drain_controls() -> None:
        if server is None:
            return
        while True:
            try:
                target, value = server.control_queue.get_nowait()
            except queue.Empty:
                return
            engine.set_scaling(target, value)

    def advance(t: float) -> None:
        # realtime sessions keep servicing the control queue while waiting
        if clock.is_virtual:
            clock.advance_to(t)
            return
        while clock.now() < t:
            clock.advance_to(min(t, clock.now() + REALTIME_CONTROL_POLL))
            drain_controls()

    def fire(events: List[ScheduledEvent]) -> None:
        for ev in events:
            sink.emit(ev)
            result.emitted_count += 1
            if server is not None:
                server.publish(
                    accomp_note_message(ev.pitch, ev.velocity, ev.time, ev.duration)
                )

    prev_time: Optional[float] = None
    anchor_time: Optional[float] = None  # time of the last position-advancing event
    last_solo: Optional[float] = None
    idx = 0
    while True:
        drain_controls()
        t_in = stream[idx].onset_seconds if idx < len(stream) else None
        t_due = engine.next_due_time()
        due_open = t_due is not None and (
            last_solo is None or t_due <= last_solo + cfg.freeze_timeout
        )
        if t_in is None and not due_open:
            break
        if t_in is not None and (not due_open or t_in <= t_due):
            note = stream[idx]
            idx += 1
            advance(t_in)
            started = _time.perf_counter()
            ioi = None if prev_time is None else note.onset_seconds - prev_time
            old_map = fstate.map_index
            fstate, aligned = follower.observe(
                fstate, note.pitch, ioi, current_beat_period(tstate)
            )
            if aligned.label != INSERTION:
                # pair the tempo observation with the span it measures: from
                # the last anchored position, not from an inserted note
                if anchor_time is not None:
                    score_ioi = onsets[fstate.map_index] - onsets[old_map]
                    if score_ioi > 0.0:
                        tstate = step(
                            tstate,
                            tparams,
                            note.onset_seconds - anchor_time,
                            score_ioi,
                            aligned.label,
                        )
                anchor_time = note.onset_seconds
            engine.on_solo_event(
                event_time=note.onset_seconds,
                velocity=note.velocity,
                label=aligned.label,
                position_beats=onsets[fstate.map_index],
                beat_period=current_beat_period(tstate),
            )
            result.latencies.append(_time.perf_counter() - started)
            prev_time = note.onset_seconds
            last_solo = note.onset_seconds
            result.solo_count += 1
            sink.solo(
                note.pitch, note.velocity, note.onset_seconds, note.duration_seconds
            )
            if server is not None:
                server.publish(
                    solo_note_message(
                        note.pitch, note.velocity, note.onset_seconds, aligned.label
                    )
                )
                server.publish(
                    tempo_message(
                        current_beat_period(tstate), onsets[fstate.map_index]
                    )
                )
            fire(engine.pop_due(clock.now()))
        else:
            advance(t_due)
            fire(engine.pop_due(clock.now()))

    if engine.pending_count():
        log.info(
            "soloist silent for %.1f s: %d unplayed events left frozen",
            cfg.freeze_timeout,
            engine.pending_count(),
        )
    if server is not None:
        result.dropped_frames = server.dropped
    return result
