"""Accompaniment scheduling.

Couples the follower/tempo pipeline to the accompaniment score: every solo
event re-anchors the mapping from score beats to clock seconds and reschedules
everything not yet emitted. Expressive targets from the prediction nets are
blended toward or away from neutral by five live scaling controls before they
touch velocities and times.

Emission is final: once an event is handed out by pop_due its velocity, onset
and duration are fixed, no matter what later solo events imply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .follower import INSERTION, MATCH, WRONG_NOTE
from .mixer import (
    ModelWeights,
    extract_note_basis_matrix,
    extract_onset_basis,
    predict_notewise_batch,
    predict_onsetwise,
)
from .score import ONSET_EQ_TOLERANCE, AccompanimentScore

EMA_ALPHA = 0.3
SCALING_TARGETS = ("loudness_trend", "bp", "loudness_dev", "timing", "articulation")


class EngineError(Exception):
    pass


def apply_scaling(value: float, neutral: float, scale: float) -> float:
    """Blend a predicted target toward its neutral value.

    scale 0 returns neutral and scale 1 returns value exactly (no float round
    trip); between and beyond, additive targets (neutral 0) interpolate
    linearly and multiplicative ones (neutral 1) geometrically, so scale 2
    doubles a deviation or squares a ratio.
    """
    if not 0.0 <= scale <= 2.0:
        raise EngineError(f"scaling value {scale} outside [0, 2]")
    if scale == 0.0:
        return neutral
    if scale == 1.0:
        return value
    if neutral == 0.0:
        return scale * value
    return neutral * math.exp(scale * math.log(value / neutral))


def _apply_scaling_array(values: np.ndarray, neutral: float, scale: float) -> np.ndarray:
    if scale == 0.0:
        return np.full_like(values, neutral)
    if scale == 1.0:
        return values.copy()
    if neutral == 0.0:
        return scale * values
    return neutral * np.exp(scale * np.log(values / neutral))


@dataclass
class ScalingControls:
    loudness_trend: float = 1.0
    bp: float = 1.0
    loudness_dev: float = 1.0
    timing: float = 1.0
    articulation: float = 1.0

    def set(self, target: str, value: float) -> float:
        """Store a control value, clamped to [0, 2]; returns what was stored."""
        if target not in SCALING_TARGETS:
            raise EngineError(f"unknown scaling target {target!r}")
        clamped = min(2.0, max(0.0, float(value)))
        setattr(self, target, clamped)
        return clamped

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in SCALING_TARGETS}


@dataclass(frozen=True)
class ScheduledEvent:
    note_id: int
    group_index: int
    pitch: int
    velocity: int
    time: float  # clock seconds
    duration: float  # seconds


class AccompanimentEngine:
    """Schedules accompaniment notes against the live solo.

    The engine is clock-agnostic: on_solo_event and pop_due take times from
    whatever clock the session runs on. Nothing is scheduled until the first
    anchoring solo event; accompaniment strictly before that anchor is dropped
    (joining mid-piece must not replay the past).
    """

    def __init__(
        self,
        accomp: AccompanimentScore,
        weights: ModelWeights,
        initial_beat_period: float = 0.5,
        controls: Optional[ScalingControls] = None,
    ) -> None:
        if initial_beat_period <= 0.0:
            raise EngineError("initial beat period must be positive")
        self.accomp = accomp
        self.controls = controls if controls is not None else ScalingControls()
        self._beat_period = initial_beat_period

        groups = accomp.onsets
        self._group_onsets = np.array([g.onset_beats for g in groups])
        note_ids: List[int] = []
        note_group: List[int] = []
        for g, group in enumerate(groups):
            note_ids.extend(group.note_ids)
            note_group.extend([g] * len(group.note_ids))
        self._note_ids = np.asarray(note_ids, dtype=int)
        self._note_group = np.asarray(note_group, dtype=int)
        self._note_pitch = np.array(
            [accomp.note_by_id(i).pitch for i in note_ids], dtype=int
        )
        self._note_dur_beats = np.array(
            [accomp.note_by_id(i).duration for i in note_ids]
        )
        self._group_start = np.searchsorted(
            self._note_group, np.arange(len(groups))
        )

        self._onset_targets = predict_onsetwise(weights, extract_onset_basis(accomp))
        self._note_targets = predict_notewise_batch(
            weights, extract_note_basis_matrix(accomp)
        )

        n = len(note_ids)
        self._sched_on = np.full(n, np.inf)
        self._sched_vel = np.zeros(n, dtype=int)
        self._sched_dur = np.zeros(n)
        self._emitted = np.zeros(n, dtype=bool)
        self._cancelled = np.zeros(n, dtype=bool)

        self._ema: Optional[float] = None
        self._anchor_beat: Optional[float] = None
        self._anchor_time: Optional[float] = None

    # --- state ------------------------------------------------------------

    @property
    def solo_velocity_ema(self) -> Optional[float]:
        return self._ema

    @property
    def anchor(self) -> Optional[tuple]:
        if self._anchor_beat is None:
            return None
        return (self._anchor_beat, self._anchor_time)

    @property
    def tracked_beat_period(self) -> float:
        return self._beat_period

    def pending_count(self) -> int:
        return int(np.count_nonzero(~self._emitted & ~self._cancelled))

    def emitted_count(self) -> int:
        return int(np.count_nonzero(self._emitted))

    # --- control ----------------------------------------------------------

    def set_scaling(self, target: str, value: float) -> float:
        """Store a control change; it lands on the next solo-event reschedule."""
        return self.controls.set(target, value)

    # --- solo input ---------------------------------------------------------

    def on_solo_event(
        self,
        event_time: float,
        velocity: int,
        label: str,
        position_beats: float,
        beat_period: float,
    ) -> None:
        """Absorb one followed solo note and reschedule what it affects.

        Matches and wrong notes move the anchor (the follower advanced, so the
        soloist is at position_beats right now); insertions only feed the
        loudness average.
        """
        if label not in (MATCH, WRONG_NOTE, INSERTION):
            raise EngineError(f"unknown alignment label {label!r}")
        if beat_period <= 0.0:
            raise EngineError("beat period must be positive")
        if self._ema is None:
            self._ema = float(velocity)
        else:
            self._ema = EMA_ALPHA * velocity + (1.0 - EMA_ALPHA) * self._ema
        self._beat_period = beat_period
        if label in (MATCH, WRONG_NOTE):
            first_anchor = self._anchor_beat is None
            self._anchor_beat = position_beats
            self._anchor_time = event_time
            if first_anchor:
                behind = (
                    self._group_onsets[self._note_group]
                    < position_beats - ONSET_EQ_TOLERANCE
                )
                self._cancelled |= behind & ~self._emitted
        self._reschedule()

    # --- scheduling ---------------------------------------------------------

    def _reschedule(self) -> None:
        if self._anchor_beat is None or self._ema is None:
            return
        note_onsets = self._group_onsets[self._note_group]
        mask = (
            ~self._emitted
            & ~self._cancelled
            & (note_onsets >= self._anchor_beat - ONSET_EQ_TOLERANCE)
        )
        if not mask.any():
            return
        c = self.controls
        trend = _apply_scaling_array(self._onset_targets[:, 0], 1.0, c.loudness_trend)
        bp_ratio = _apply_scaling_array(self._onset_targets[:, 1], 1.0, c.bp)
        dev = _apply_scaling_array(self._note_targets[:, 0], 0.0, c.loudness_dev)
        timing = _apply_scaling_array(self._note_targets[:, 1], 0.0, c.timing)
        artic = _apply_scaling_array(self._note_targets[:, 2], 1.0, c.articulation)

        group_bp = self._beat_period * bp_ratio
        group_on = (
            self._anchor_time
            + (self._group_onsets - self._anchor_beat) * group_bp
        )
        chord_max = np.clip(np.rint(self._ema * trend), 1, 127)
        # the chord's largest deviation lands exactly on the chord ceiling
        max_dev = np.maximum.reduceat(dev, self._group_start)

        g = self._note_group[mask]
        self._sched_on[mask] = group_on[g] + timing[mask]
        self._sched_vel[mask] = np.clip(
            np.rint(chord_max[g] + dev[mask] - max_dev[g]), 1, 127
        ).astype(int)
        self._sched_dur[mask] = self._note_dur_beats[mask] * group_bp[g] * artic[mask]

    def next_due_time(self) -> Optional[float]:
        live = ~self._emitted & ~self._cancelled
        if not live.any():
            return None
        t = self._sched_on[live].min()
        return None if math.isinf(t) else float(t)

    def pop_due(self, now: float) -> List[ScheduledEvent]:
        """Emit every pending event scheduled at or before now.

        An event whose slot has already passed (a reschedule pulled it into
        the past) fires at the current clock time; its duration is preserved.
        """
        live = ~self._emitted & ~self._cancelled
        due = live & (self._sched_on <= now + 1e-12)
        idx = np.flatnonzero(due)
        if idx.size == 0:
            return []
        idx = idx[np.argsort(self._sched_on[idx], kind="stable")]
        events = []
        for i in idx:
            events.append(
                ScheduledEvent(
                    note_id=int(self._note_ids[i]),
                    group_index=int(self._note_group[i]),
                    pitch=int(self._note_pitch[i]),
                    velocity=int(self._sched_vel[i]),
                    time=float(max(self._sched_on[i], now)),
                    duration=float(self._sched_dur[i]),
                )
            )
            self._emitted[i] = True
        return events
