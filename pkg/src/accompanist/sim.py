"""Synthetic soloist and evaluation harness.

Renders a solo score into a performed note stream under a piecewise tempo
curve with Gaussian timing/velocity noise and per-note error injection
(skips, insertions, wrong pitches), keeping the ground-truth alignment so the
follower and tempo tracker can be scored against it. Everything is driven by
one seeded generator, so a config fully determines the stream.
"""
from __future__ import annotations

import bisect
import json
import math
import time as _time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .follower import INSERTION, MATCH, FollowerParams, ScoreFollower
from .score import SoloScore
from .tempo import TempoParams, current_beat_period, init_state, step


class SimConfigError(Exception):
    pass


# --- tempo curve -----------------------------------------------------------


@dataclass(frozen=True)
class TempoPoint:
    beat: float
    bpm: float
    ramp: bool = False  # BPM moves linearly to the next point instead of holding


class TempoCurve:
    """Piecewise BPM over score beats, integrable in closed form.

    Each point holds its BPM until the next point, or ramps linearly (in BPM)
    to it when flagged. The curve must start at beat 0; the last point holds
    forever. time_at inverts beats to seconds exactly: constant segments are
    linear, ramps integrate 1/bpm to a logarithm.
    """

    def __init__(self, points: Sequence[TempoPoint]) -> None:
        if not points:
            raise SimConfigError("tempo curve needs at least one point")
        if points[0].beat != 0.0:
            raise SimConfigError("tempo curve must start at beat 0")
        for p in points:
            if p.bpm <= 0.0:
                raise SimConfigError(f"tempo curve BPM must be positive, got {p.bpm}")
        beats = [p.beat for p in points]
        if any(b >= c for b, c in zip(beats, beats[1:])):
            raise SimConfigError("tempo curve beats must be strictly increasing")
        self.points = list(points)
        self._beats = beats
        self._knot_times = [0.0]
        for i in range(len(points) - 1):
            self._knot_times.append(
                self._knot_times[-1]
                + self._segment_time(i, points[i].beat, points[i + 1].beat)
            )

    def _segment_bpms(self, i: int) -> Tuple[float, float]:
        v0 = self.points[i].bpm
        if i + 1 < len(self.points) and self.points[i].ramp:
            return v0, self.points[i + 1].bpm
        return v0, v0

    def _segment_time(self, i: int, a: float, b: float) -> float:
        """Seconds to traverse [a, b], both inside segment i."""
        if b <= a:
            return 0.0
        v0, v1 = self._segment_bpms(i)
        if v0 == v1:
            return 60.0 * (b - a) / v0
        beat0, beat1 = self.points[i].beat, self.points[i + 1].beat
        r = (v1 - v0) / (beat1 - beat0)
        return (60.0 / r) * math.log((v0 + r * (b - beat0)) / (v0 + r * (a - beat0)))

    def _segment_index(self, beat: float) -> int:
        return max(0, bisect.bisect_right(self._beats, beat) - 1)

    def bpm_at(self, beat: float) -> float:
        i = self._segment_index(beat)
        v0, v1 = self._segment_bpms(i)
        if v0 == v1 or beat >= self._beats[-1]:
            return v0
        beat0, beat1 = self.points[i].beat, self.points[i + 1].beat
        return v0 + (v1 - v0) * (beat - beat0) / (beat1 - beat0)

    def beat_period_at(self, beat: float) -> float:
        return 60.0 / self.bpm_at(beat)

    def time_at(self, beat: float) -> float:
        if beat < 0.0:
            raise SimConfigError("tempo curve is defined for beats >= 0")
        i = self._segment_index(beat)
        if i == len(self.points) - 1:
            return self._knot_times[i] + 60.0 * (beat - self._beats[i]) / self.points[i].bpm
        return self._knot_times[i] + self._segment_time(i, self._beats[i], beat)


# --- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    tempo_curve: Tuple[TempoPoint, ...] = (TempoPoint(0.0, 120.0),)
    timing_jitter_std: float = 0.01
    velocity_base: int = 72
    velocity_jitter_std: float = 6.0
    p_insert: float = 0.0
    p_skip: float = 0.0
    p_wrong_pitch: float = 0.0
    wrong_pitch_range: int = 3

    def __post_init__(self) -> None:
        for name in ("p_insert", "p_skip", "p_wrong_pitch"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise SimConfigError(f"{name} must be in [0, 1], got {p}")
        # p_skip = 1 (skip everything) is a legal degenerate limit
        if self.p_insert + self.p_skip >= 1.0 and self.p_skip != 1.0:
            raise SimConfigError("p_insert + p_skip must be < 1")
        if not 1 <= self.velocity_base <= 127:
            raise SimConfigError("velocity_base must be in 1..127")
        if self.timing_jitter_std < 0.0 or self.velocity_jitter_std < 0.0:
            raise SimConfigError("jitter deviations must be >= 0")
        if self.wrong_pitch_range < 1:
            raise SimConfigError("wrong_pitch_range must be >= 1")

    @property
    def curve(self) -> TempoCurve:
        return TempoCurve(self.tempo_curve)


_JSON_KEYS = {
    "seed": "seed",
    "tempoCurve": "tempo_curve",
    "timingJitterStd": "timing_jitter_std",
    "velocityBase": "velocity_base",
    "velocityJitterStd": "velocity_jitter_std",
    "pInsert": "p_insert",
    "pSkip": "p_skip",
    "pWrongPitch": "p_wrong_pitch",
    "wrongPitchRange": "wrong_pitch_range",
}


def sim_config_from_dict(doc: Dict) -> SimConfig:
    if not isinstance(doc, dict):
        raise SimConfigError("simulation config must be a JSON object")
    kwargs = {}
    for key, value in doc.items():
        if key not in _JSON_KEYS:
            raise SimConfigError(f"unknown simulation config key {key!r}")
        if key == "tempoCurve":
            points = []
            for entry in value:
                extra = set(entry) - {"beat", "bpm", "ramp"}
                if extra:
                    raise SimConfigError(
                        f"unknown tempo curve key {sorted(extra)[0]!r}"
                    )
                points.append(
                    TempoPoint(
                        beat=float(entry["beat"]),
                        bpm=float(entry["bpm"]),
                        ramp=bool(entry.get("ramp", False)),
                    )
                )
            kwargs["tempo_curve"] = tuple(points)
        else:
            kwargs[_JSON_KEYS[key]] = value
    return SimConfig(**kwargs)


def load_sim_config(path: str) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SimConfigError(f"{path}: not valid JSON: {exc}") from exc
    return sim_config_from_dict(doc)


# --- simulation ------------------------------------------------------------


@dataclass(frozen=True)
class SimNote:
    """One performed note with its ground truth attached."""

    pitch: int
    onset_seconds: float
    velocity: int
    duration_seconds: float
    score_index: Optional[int]  # None for inserted notes
    clean: bool  # from the score, pitch unperturbed


@dataclass(frozen=True)
class SimResult:
    notes: Tuple[SimNote, ...]
    skipped: Tuple[int, ...]  # score indices never performed
    config: SimConfig

    def true_beat_period(self, score_beat: float) -> float:
        return self.config.curve.beat_period_at(score_beat)


def simulate(score: SoloScore, cfg: SimConfig) -> SimResult:
    rng = np.random.default_rng(cfg.seed)
    curve = cfg.curve
    r = cfg.wrong_pitch_range

    def velocity() -> int:
        v = cfg.velocity_base + rng.normal(0.0, cfg.velocity_jitter_std)
        return int(np.clip(round(v), 1, 127))

    notes: List[SimNote] = []
    skipped: List[int] = []
    for j, note in enumerate(score.notes):
        u = rng.random()
        if u < cfg.p_skip:
            skipped.append(j)
            continue
        base_time = curve.time_at(note.onset)
        bp = curve.beat_period_at(note.onset)
        if u < cfg.p_skip + cfg.p_insert:
            delta = int(rng.integers(-r, r + 1))
            frac = rng.uniform(0.25, 0.75)
            notes.append(
                SimNote(
                    pitch=int(np.clip(note.pitch + delta, 0, 127)),
                    onset_seconds=base_time - frac * bp,
                    velocity=velocity(),
                    duration_seconds=0.5 * bp,
                    score_index=None,
                    clean=False,
                )
            )
        wrong = rng.random() < cfg.p_wrong_pitch
        pitch = note.pitch
        if wrong:
            # nonzero offset, uniform over +-1..r
            offsets = [d for d in range(-r, r + 1) if d != 0]
            pitch = int(np.clip(pitch + offsets[rng.integers(0, len(offsets))], 0, 127))
        onset = base_time + rng.normal(0.0, cfg.timing_jitter_std)
        notes.append(
            SimNote(
                pitch=pitch,
                onset_seconds=onset,
                velocity=velocity(),
                duration_seconds=note.duration * bp,
                score_index=j,
                clean=not wrong,
            )
        )

    notes.sort(key=lambda n: n.onset_seconds)
    if notes and notes[0].onset_seconds < 0.0:
        shift = -notes[0].onset_seconds
        notes = [
            SimNote(
                pitch=n.pitch,
                onset_seconds=n.onset_seconds + shift,
                velocity=n.velocity,
                duration_seconds=n.duration_seconds,
                score_index=n.score_index,
                clean=n.clean,
            )
            for n in notes
        ]
    return SimResult(notes=tuple(notes), skipped=tuple(skipped), config=cfg)


# --- evaluation ------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    event_count: int
    match_rate: float
    position_rate: float
    mean_abs_tempo_error: float
    max_latency: float
    p95_latency: float

    BURN_IN = 8

    def to_json(self, include_timing: bool = False) -> bytes:
        doc = {
            "eventCount": self.event_count,
            "matchRate": self.match_rate,
            "positionRate": self.position_rate,
            "meanAbsTempoError": self.mean_abs_tempo_error,
        }
        if include_timing:
            doc["maxLatency"] = self.max_latency
            doc["p95Latency"] = self.p95_latency
        return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()

    def format_table(self) -> str:
        rows = [
            ("events", str(self.event_count)),
            ("match rate", f"{self.match_rate:.4f}"),
            ("position rate", f"{self.position_rate:.4f}"),
            ("tempo error (mean)", f"{self.mean_abs_tempo_error * 100.0:.3f}%"),
            ("max latency", f"{self.max_latency * 1000.0:.2f} ms"),
            ("p95 latency", f"{self.p95_latency * 1000.0:.2f} ms"),
        ]
        width = max(len(label) for label, _ in rows)
        return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


@dataclass(frozen=True)
class EvalTrace:
    """Per-event pipeline record, for reports and plots."""

    time: float
    pitch: int
    label: str
    map_index: int
    score_index: Optional[int]
    clean: bool
    est_beat_period: float
    true_beat_period: Optional[float]


def run_pipeline(
    score: SoloScore,
    sim: SimResult,
    follower_params: Optional[FollowerParams] = None,
    tempo_params: Optional[TempoParams] = None,
) -> Tuple[List[EvalTrace], List[float]]:
    """Follower + tempo tracker over a simulated stream.

    Returns the per-event trace and the per-event processing latencies in
    seconds (wall clock; everything else is deterministic).
    """
    if len(score) == 0:
        return [], []
    follower = ScoreFollower(score, follower_params or FollowerParams())
    tparams = tempo_params or TempoParams()
    fstate = follower.init_state()
    tstate = init_state(tparams)
    onsets = score.onsets
    trace: List[EvalTrace] = []
    latencies: List[float] = []
    prev_time: Optional[float] = None
    anchor_time: Optional[float] = None  # time of the last position-advancing event
    for ev in sim.notes:
        started = _time.perf_counter()
        ioi = None if prev_time is None else ev.onset_seconds - prev_time
        old_map = fstate.map_index
        fstate, aligned = follower.observe(
            fstate, ev.pitch, ioi, current_beat_period(tstate)
        )
        if aligned.label != INSERTION:
            # the score IOI spans from the previous anchored position, so the
            # observed IOI must too; measuring from an inserted note would
            # pair a fractional interval with a full score IOI
            if anchor_time is not None:
                score_ioi = onsets[fstate.map_index] - onsets[old_map]
                if score_ioi > 0.0:
                    tstate = step(
                        tstate,
                        tparams,
                        ev.onset_seconds - anchor_time,
                        score_ioi,
                        aligned.label,
                    )
            anchor_time = ev.onset_seconds
        latencies.append(_time.perf_counter() - started)
        prev_time = ev.onset_seconds
        trace.append(
            EvalTrace(
                time=ev.onset_seconds,
                pitch=ev.pitch,
                label=aligned.label,
                map_index=fstate.map_index,
                score_index=ev.score_index,
                clean=ev.clean,
                est_beat_period=current_beat_period(tstate),
                true_beat_period=(
                    sim.true_beat_period(onsets[ev.score_index])
                    if ev.score_index is not None
                    else None
                ),
            )
        )
    return trace, latencies


def evaluate(
    score: SoloScore,
    cfg: SimConfig,
    follower_params: Optional[FollowerParams] = None,
    tempo_params: Optional[TempoParams] = None,
) -> Tuple[EvalReport, List[EvalTrace]]:
    sim = simulate(score, cfg)
    trace, latencies = run_pipeline(score, sim, follower_params, tempo_params)
    return summarize(trace, latencies), trace


def summarize(trace: Sequence[EvalTrace], latencies: Sequence[float]) -> EvalReport:
    n = len(trace)
    if n == 0:
        return EvalReport(
            event_count=0,
            match_rate=1.0,
            position_rate=1.0,
            mean_abs_tempo_error=0.0,
            max_latency=0.0,
            p95_latency=0.0,
        )
    clean = [t for t in trace if t.clean]
    matched = sum(
        1 for t in clean if t.label == MATCH and t.map_index == t.score_index
    )
    placed = [t for t in trace if t.score_index is not None]
    positioned = sum(1 for t in placed if t.map_index == t.score_index)
    errors = [
        abs(t.est_beat_period - t.true_beat_period) / t.true_beat_period
        for t in trace[EvalReport.BURN_IN :]
        if t.true_beat_period is not None
    ]
    lat = np.asarray(latencies) if latencies else np.zeros(1)
    return EvalReport(
        event_count=n,
        match_rate=matched / len(clean) if clean else 0.0,
        position_rate=positioned / len(placed) if placed else 0.0,
        mean_abs_tempo_error=float(np.mean(errors)) if errors else 0.0,
        max_latency=float(lat.max()),
        p95_latency=float(np.percentile(lat, 95.0)),
    )
