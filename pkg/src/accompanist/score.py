"""Symbolic score data model: notes, monophonic solo lines, chord-grouped accompaniment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

ONSET_EQ_TOLERANCE = 1e-9  # beats; notes closer than this share an onset group


class ScoreError(Exception):
    """Raised for structurally invalid score material."""


@dataclass(frozen=True)
class ScoreNote:
    """A single symbolic note. Onset and duration are in beats."""

    id: int
    pitch: int
    onset: float
    duration: float
    part: str  # "solo" | "accompaniment"

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ScoreError(f"pitch {self.pitch} outside 0..127")
        if self.duration <= 0:
            raise ScoreError(f"note {self.id}: duration must be > 0, got {self.duration}")
        if self.onset < 0:
            raise ScoreError(f"note {self.id}: onset must be >= 0, got {self.onset}")


@dataclass(frozen=True)
class SoloScore:
    """Monophonic solo line with strictly increasing onsets."""

    notes: tuple

    @property
    def pitches(self) -> List[int]:
        return [n.pitch for n in self.notes]

    @property
    def onsets(self) -> List[float]:
        return [n.onset for n in self.notes]

    @property
    def score_iois(self) -> List[float]:
        """Beats between consecutive onsets; length len(notes) - 1."""
        ons = self.onsets
        return [b - a for a, b in zip(ons, ons[1:])]

    def __len__(self) -> int:
        return len(self.notes)


@dataclass(frozen=True)
class OnsetGroup:
    """Accompaniment notes sharing one onset (a chord in the loose sense)."""

    onset_beats: float
    note_ids: tuple


@dataclass(frozen=True)
class AccompanimentScore:
    """Chord-grouped accompaniment in score order."""

    onsets: tuple  # of OnsetGroup
    notes: tuple  # of ScoreNote, all parts "accompaniment"

    def note_by_id(self, note_id: int) -> ScoreNote:
        return self._note_table[note_id]

    @property
    def _note_table(self):
        table = getattr(self, "_table_cache", None)
        if table is None:
            table = {n.id: n for n in self.notes}
            object.__setattr__(self, "_table_cache", table)
        return table

    def __len__(self) -> int:
        return len(self.onsets)


@dataclass
class PerformedNote:
    """A note as actually played: wall/virtual-clock seconds, MIDI velocity."""

    pitch: int
    onset_seconds: float
    velocity: int
    duration_seconds: Optional[float] = None  # None while still sounding

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ScoreError(f"performed pitch {self.pitch} outside 0..127")
        if not 1 <= self.velocity <= 127:
            raise ScoreError(f"performed velocity {self.velocity} outside 1..127")
        if self.duration_seconds is not None and self.duration_seconds <= 0:
            raise ScoreError("performed duration must be > 0 when known")


def make_solo_score(notes: Sequence[ScoreNote]) -> SoloScore:
    """Build a SoloScore, enforcing strictly increasing onsets."""
    ordered = tuple(sorted(notes, key=lambda n: n.onset))
    bad = validate_solo_onsets([n.onset for n in ordered])
    if bad is not None:
        raise ScoreError(f"solo part is not monophonic: duplicate onset at note index {bad}")
    return SoloScore(notes=ordered)


def validate_solo_onsets(onsets: Sequence[float]) -> Optional[int]:
    """Return the first index whose onset does not strictly increase, or None if ok."""
    for i in range(1, len(onsets)):
        if onsets[i] - onsets[i - 1] <= ONSET_EQ_TOLERANCE:
            return i
    return None


def validate_solo(score: SoloScore) -> Optional[int]:
    """Monophony check over an already-built score; None means ok."""
    return validate_solo_onsets(score.onsets)


def group_onsets(notes: Sequence[ScoreNote]) -> AccompanimentScore:
    """Group accompaniment notes into onset chords (tolerance ONSET_EQ_TOLERANCE beats)."""
    ordered = sorted(notes, key=lambda n: (n.onset, n.pitch, n.id))
    groups: List[OnsetGroup] = []
    current_ids: List[int] = []
    current_onset = None
    for note in ordered:
        if current_onset is not None and abs(note.onset - current_onset) <= ONSET_EQ_TOLERANCE:
            current_ids.append(note.id)
        else:
            if current_ids:
                groups.append(OnsetGroup(onset_beats=current_onset, note_ids=tuple(current_ids)))
            current_onset = note.onset
            current_ids = [note.id]
    if current_ids:
        groups.append(OnsetGroup(onset_beats=current_onset, note_ids=tuple(current_ids)))
    return AccompanimentScore(onsets=tuple(groups), notes=tuple(ordered))
