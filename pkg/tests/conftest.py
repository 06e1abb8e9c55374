"""Shared builders for synthetic scores and streams."""
import socket

import pytest

from accompanist.score import (
    AccompanimentScore,
    ScoreNote,
    SoloScore,
    group_onsets,
    make_solo_score,
)
from accompanist.smf import write_score_smf


def solo_line(
    n: int, spacing: float = 1.0, base_pitch: int = 60, duration: float = 0.5
) -> SoloScore:
    """Monophonic line of n notes on a regular beat grid, pitch walking a scale."""
    steps = (0, 2, 4, 5, 7, 9, 11, 12)
    notes = [
        ScoreNote(
            id=i,
            pitch=base_pitch + steps[i % len(steps)],
            onset=i * spacing,
            duration=duration,
            part="solo",
        )
        for i in range(n)
    ]
    return make_solo_score(notes)


def accomp_blocks(
    n_groups: int, spacing: float = 1.0, base_pitch: int = 48, offset: float = 0.0
) -> AccompanimentScore:
    """n_groups triads on a regular grid, ids disjoint from solo_line's."""
    notes = []
    nid = 1000
    for g in range(n_groups):
        onset = offset + g * spacing
        for dp in (0, 4, 7):
            notes.append(
                ScoreNote(
                    id=nid,
                    pitch=base_pitch + (g % 12) + dp,
                    onset=onset,
                    duration=spacing,
                    part="accompaniment",
                )
            )
            nid += 1
    return group_onsets(notes)


def demo_piece(n_solo: int = 8, spacing: float = 1.0):
    solo = solo_line(n_solo, spacing=spacing)
    accomp = accomp_blocks(n_solo, spacing=spacing)
    return solo, accomp


@pytest.fixture
def score_file(tmp_path):
    """Write a small two-part piece to an SMF and return its path."""

    def build(n_solo: int = 8, spacing: float = 1.0) -> str:
        solo, accomp = demo_piece(n_solo, spacing=spacing)
        path = tmp_path / f"score_{n_solo}_{spacing}.mid"
        path.write_bytes(write_score_smf(solo, accomp))
        return str(path)

    return build


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]
