"""Beat-period tracking with a switching Kalman filter.

State is [beat period (s/beat), per-event drift]; the constant-velocity
transition lets ritardando/accelerando show up as drift. Process and
observation noise switch on the follower's alignment label; insertions carry
no score IOI and therefore produce no observation at all.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .follower import INSERTION, MATCH, WRONG_NOTE

BEAT_PERIOD_MIN = 0.1  # s/beat (600 BPM)
BEAT_PERIOD_MAX = 4.0  # s/beat (15 BPM)

TRANSITION = np.array([[1.0, 1.0], [0.0, 1.0]])


class TempoError(Exception):
    pass


def _diag(a: float, b: float) -> np.ndarray:
    return np.diag([a, b]).astype(float)


@dataclass(frozen=True)
class TempoParams:
    """Per-regime noise. Process-noise entries may be zero (pins a state
    component, e.g. the drift-free scalar subcase); observation noise must be
    strictly positive."""

    process_noise: Dict[str, np.ndarray] = field(
        default_factory=lambda: {
            MATCH: _diag(1e-4, 1e-5),
            INSERTION: _diag(1e-6, 1e-7),
            WRONG_NOTE: _diag(4e-4, 4e-5),
        }
    )
    obs_noise: Dict[str, float] = field(
        default_factory=lambda: {MATCH: 1e-3, WRONG_NOTE: 1e-2}
    )
    initial_mean: Tuple[float, float] = (0.5, 0.0)
    initial_cov: np.ndarray = field(default_factory=lambda: _diag(0.04, 1e-4))

    def __post_init__(self):
        for regime, q in self.process_noise.items():
            if np.any(np.asarray(q) < 0):
                raise TempoError(f"process noise for {regime} has negative entries")
        for regime, r in self.obs_noise.items():
            if r <= 0:
                raise TempoError(f"observation noise for {regime} must be > 0, got {r}")


@dataclass
class TempoState:
    mean: np.ndarray  # [beat period, drift]
    cov: np.ndarray  # 2x2 symmetric PSD
    regime: str = MATCH

    def copy(self) -> "TempoState":
        return TempoState(mean=self.mean.copy(), cov=self.cov.copy(), regime=self.regime)

    @property
    def beat_period(self) -> float:
        return current_beat_period(self)


def init_state(params: TempoParams = TempoParams()) -> TempoState:
    return TempoState(
        mean=np.asarray(params.initial_mean, dtype=float),
        cov=np.asarray(params.initial_cov, dtype=float).copy(),
        regime=MATCH,
    )


def _clamped(mean: np.ndarray) -> np.ndarray:
    out = mean.copy()
    out[0] = min(max(out[0], BEAT_PERIOD_MIN), BEAT_PERIOD_MAX)
    return out


def predict(state: TempoState, params: TempoParams) -> TempoState:
    q = params.process_noise[state.regime]
    mean = TRANSITION @ state.mean
    cov = TRANSITION @ state.cov @ TRANSITION.T + q
    return TempoState(mean=_clamped(mean), cov=cov, regime=state.regime)


def update(
    state: TempoState,
    params: TempoParams,
    ioi_seconds: float,
    score_ioi_beats: float,
    regime: str,
) -> TempoState:
    """Condition on one observed IOI spanning `score_ioi_beats`. Insertions
    consume no observation and return the input state unchanged."""
    if regime == INSERTION:
        return state
    if regime not in params.obs_noise:
        raise TempoError(f"unknown regime {regime!r}")
    if score_ioi_beats <= 0:
        raise TempoError(f"score_ioi_beats must be > 0, got {score_ioi_beats}")

    h = np.array([score_ioi_beats, 0.0])
    innovation = ioi_seconds - h @ state.mean
    s = h @ state.cov @ h + params.obs_noise[regime]
    if s <= 0:
        raise TempoError(f"non-positive innovation variance {s}")
    gain = state.cov @ h / s
    mean = state.mean + gain * innovation
    cov = (np.eye(2) - np.outer(gain, h)) @ state.cov
    cov = (cov + cov.T) / 2.0
    return TempoState(mean=_clamped(mean), cov=cov, regime=regime)


def step(
    state: TempoState,
    params: TempoParams,
    ioi_seconds: float,
    score_ioi_beats: float,
    regime: str,
) -> TempoState:
    """Predict-then-update for one solo event; identity for insertions."""
    if regime == INSERTION:
        return state
    return update(predict(state, params), params, ioi_seconds, score_ioi_beats, regime)


def current_beat_period(state: TempoState) -> float:
    return float(min(max(state.mean[0], BEAT_PERIOD_MIN), BEAT_PERIOD_MAX))
