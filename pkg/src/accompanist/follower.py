"""Online monophonic score following.

One hidden state per solo score position. Each incoming performed note updates
the posterior with a single forward-algorithm step; transitions are forward-only
(self loop = insertion, advance by k = normal progress or skipped notes) and the
observation couples the performed pitch with the inter-onset interval measured
in beats at the current tempo estimate. All accumulation is in log space: linear
products underflow on pieces of a few hundred notes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .score import PerformedNote, SoloScore, validate_solo

LOG_ZERO = -np.inf


class FollowerError(Exception):
    pass


@dataclass(frozen=True)
class FollowerParams:
    p_correct_pitch: float = 0.95
    pitch_mismatch_decay: float = 0.5
    self_loop_prob: float = 0.05
    max_skip: int = 4
    skip_decay: float = 0.5
    ioi_std_beats: float = 0.1

    def __post_init__(self):
        for name in ("p_correct_pitch", "pitch_mismatch_decay", "self_loop_prob", "skip_decay"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise FollowerError(f"{name} must be in (0, 1), got {v}")
        if self.max_skip < 1:
            raise FollowerError(f"max_skip must be >= 1, got {self.max_skip}")
        if self.ioi_std_beats <= 0:
            raise FollowerError(f"ioi_std_beats must be > 0, got {self.ioi_std_beats}")


@dataclass
class FollowerState:
    """Posterior belief over score positions after the most recent solo event."""

    log_posterior: np.ndarray
    map_index: int
    last_map_index: int
    last_event_time: Optional[float] = None

    @property
    def posterior(self) -> np.ndarray:
        return np.exp(self.log_posterior)

    @property
    def confidence(self) -> float:
        return float(np.exp(self.log_posterior[self.map_index]))

    def copy(self) -> "FollowerState":
        return FollowerState(
            log_posterior=self.log_posterior.copy(),
            map_index=self.map_index,
            last_map_index=self.last_map_index,
            last_event_time=self.last_event_time,
        )


MATCH = "match"
INSERTION = "insertion"
WRONG_NOTE = "wrong_note"


@dataclass(frozen=True)
class AlignmentEvent:
    """Label attached to one performed solo note."""

    performed: PerformedNote
    label: str  # MATCH | INSERTION | WRONG_NOTE
    score_index: Optional[int]  # None for insertions
    confidence: float


class ScoreFollower:
    """Binds a validated solo score and parameters; precomputes transition tables."""

    def __init__(self, score: SoloScore, params: FollowerParams = FollowerParams()):
        if len(score) == 0:
            raise FollowerError("cannot follow an empty score")
        if validate_solo(score) is not None:
            raise FollowerError("solo score is not monophonic")
        self.score = score
        self.params = params
        n = len(score)
        self.n = n
        self.onsets = np.asarray(score.onsets, dtype=np.float64)
        self.pitches = np.asarray(score.pitches, dtype=np.int64)

        p = params
        # skip-distribution normalizer per state over the advances that exist
        avail = np.minimum(p.max_skip, (n - 1) - np.arange(n))
        with np.errstate(divide="ignore"):
            z_skip = np.where(
                avail > 0,
                (1.0 - p.skip_decay ** avail) / (1.0 - p.skip_decay),
                np.nan,
            )
        self.log_self = np.where(avail > 0, math.log(p.self_loop_prob), 0.0)
        # log_advance[k-1][i] = log P(advance by k | at i); -inf where i+k walks off the end
        self.log_advance = np.full((p.max_skip, n), LOG_ZERO)
        for k in range(1, p.max_skip + 1):
            valid = avail >= k
            with np.errstate(divide="ignore", invalid="ignore"):
                probs = (1.0 - p.self_loop_prob) * p.skip_decay ** (k - 1) / z_skip
                self.log_advance[k - 1][valid] = np.log(probs[valid])

        # pitch model: mass p_correct on the expected pitch, geometric decay elsewhere,
        # renormalized over the 0..127 range per state
        decay_pow = p.pitch_mismatch_decay ** np.abs(
            np.arange(128)[None, :] - self.pitches[:, None]
        )
        z_pitch = decay_pow.sum(axis=1) - 1.0  # drop the exact-match term
        lik = (1.0 - p.p_correct_pitch) * decay_pow / z_pitch[:, None]
        lik[np.arange(n), self.pitches] = p.p_correct_pitch
        self.log_pitch_lik = np.log(lik)  # shape (n, 128)

        self._log_gauss_const = -math.log(p.ioi_std_beats * math.sqrt(2.0 * math.pi))

    # -- state construction -------------------------------------------------

    def init_state(self, uniform_start: bool = False) -> FollowerState:
        """Point mass at position 0, or uniform for mid-piece entry."""
        if uniform_start:
            log_post = np.full(self.n, -math.log(self.n))
        else:
            log_post = np.full(self.n, LOG_ZERO)
            log_post[0] = 0.0
        return FollowerState(log_posterior=log_post, map_index=0, last_map_index=0)

    # -- inference ----------------------------------------------------------

    def _log_ioi_density(self, ioi_beats: float, mean_beats: np.ndarray) -> np.ndarray:
        z = (ioi_beats - mean_beats) / self.params.ioi_std_beats
        return self._log_gauss_const - 0.5 * z * z

    def observe(
        self,
        state: FollowerState,
        pitch: int,
        ioi_seconds: Optional[float],
        beat_period: float,
        event_time: Optional[float] = None,
        performed: Optional[PerformedNote] = None,
    ) -> Tuple[FollowerState, AlignmentEvent]:
        """One forward step. `ioi_seconds=None` marks the first note of a performance:
        the initial distribution is weighted by pitch likelihood only, with no
        transition and no IOI factor."""
        if not 0 <= pitch <= 127:
            raise FollowerError(f"pitch {pitch} outside 0..127")
        if beat_period <= 0:
            raise FollowerError(f"beat_period must be > 0, got {beat_period}")
        first_event = ioi_seconds is None

        if first_event:
            log_prior = state.log_posterior
        else:
            if ioi_seconds < 0:
                raise FollowerError(f"ioi_seconds must be >= 0, got {ioi_seconds}")
            ioi_beats = ioi_seconds / beat_period
            candidates = np.full((self.params.max_skip + 1, self.n), LOG_ZERO)
            candidates[0] = (
                state.log_posterior
                + self.log_self
                + self._log_ioi_density(ioi_beats, np.zeros(self.n))
            )
            for k in range(1, self.params.max_skip + 1):
                if k >= self.n:
                    break
                # source state i = j - k feeds state j; expected IOI spans the skipped onsets
                mean = self.onsets[k:] - self.onsets[:-k]
                candidates[k, k:] = (
                    state.log_posterior[:-k]
                    + self.log_advance[k - 1][:-k]
                    + self._log_ioi_density(ioi_beats, mean)
                )
            with np.errstate(invalid="ignore"):
                log_prior = np.logaddexp.reduce(candidates, axis=0)

        log_post = log_prior + self.log_pitch_lik[:, pitch]
        norm = _logsumexp(log_post)
        if norm == LOG_ZERO:
            raise FollowerError("posterior vanished: all states have zero likelihood")
        log_post = log_post - norm

        old_map = state.map_index
        new_map = int(np.argmax(log_post))
        if first_event:
            label = MATCH if pitch == self.pitches[new_map] else WRONG_NOTE
        elif new_map > old_map:
            label = MATCH if pitch == self.pitches[new_map] else WRONG_NOTE
        else:
            label = INSERTION

        new_state = FollowerState(
            log_posterior=log_post,
            map_index=new_map,
            last_map_index=old_map,
            last_event_time=event_time,
        )
        event = AlignmentEvent(
            performed=performed,
            label=label,
            score_index=new_map if label in (MATCH, WRONG_NOTE) else None,
            confidence=float(np.exp(log_post[new_map])),
        )
        return new_state, event

    def map_position_beats(self, state: FollowerState) -> float:
        """Score-beat cursor: onset of the MAP position."""
        return float(self.onsets[state.map_index])


def _logsumexp(values: np.ndarray) -> float:
    m = np.max(values)
    if m == LOG_ZERO:
        return LOG_ZERO
    return float(m + np.log(np.sum(np.exp(values - m))))
