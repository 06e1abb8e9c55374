"""Standard MIDI File reading and writing.

Supports format 0/1 with ticks-per-quarter division. Parsing is total: any byte
input either yields scores or raises SMFError; it never crashes or loops.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .score import (
    AccompanimentScore,
    PerformedNote,
    ScoreNote,
    SoloScore,
    group_onsets,
    make_solo_score,
    validate_solo_onsets,
)

log = logging.getLogger(__name__)

META_END_OF_TRACK = 0x2F
DEFAULT_TICKS_PER_BEAT = 480
CAPTURE_TICKS_PER_BEAT = 960
CAPTURE_SECONDS_PER_BEAT = 0.5  # capture files carry a fixed 120 BPM tempo map


class SMFError(Exception):
    """Structured parse error; message carries offset/tick context."""


class _Reader:
    """Byte cursor with bounds-checked reads."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def read(self, n: int) -> bytes:
        if self.remaining() < n:
            raise SMFError(
                f"truncated chunk: wanted {n} bytes at offset {self.pos}, "
                f"have {self.remaining()}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def read_u8(self) -> int:
        return self.read(1)[0]

    def read_u16(self) -> int:
        b = self.read(2)
        return (b[0] << 8) | b[1]

    def read_u32(self) -> int:
        b = self.read(4)
        return (b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3]

    def read_vlq(self) -> int:
        # SMF caps variable-length quantities at 4 bytes (28 bits)
        value = 0
        for i in range(4):
            b = self.read_u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise SMFError(f"variable-length quantity longer than 4 bytes at offset {self.pos}")


def decode_vlq(data: bytes) -> int:
    """Decode a single variable-length quantity from the start of `data`."""
    return _Reader(data).read_vlq()


def encode_vlq(value: int) -> bytes:
    if value < 0 or value > 0x0FFFFFFF:
        raise ValueError(f"VLQ out of range: {value}")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


@dataclass
class RawNote:
    """Tick-domain note extracted from one track."""

    pitch: int
    velocity: int
    on_tick: int
    off_tick: int
    channel: int


def _parse_track(body: bytes, track_index: int) -> List[RawNote]:
    """Extract matched note pairs from one MTrk body."""
    rd = _Reader(body)
    tick = 0
    running_status: Optional[int] = None
    notes: List[RawNote] = []
    # FIFO of (tick, velocity) per (channel, pitch): earliest note-on closes first
    open_notes: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}

    def close_note(channel: int, pitch: int) -> None:
        stack = open_notes.get((channel, pitch))
        if not stack:
            return  # stray note-off: ignore, standard practice
        on_tick, velocity = stack.pop(0)
        # zero-length pairs get one tick so durations stay positive
        notes.append(
            RawNote(
                pitch=pitch,
                velocity=velocity,
                on_tick=on_tick,
                off_tick=max(tick, on_tick + 1),
                channel=channel,
            )
        )

    while True:
        if rd.remaining() == 0:
            raise SMFError(f"track {track_index}: missing end-of-track meta event")
        tick += rd.read_vlq()
        first = rd.read_u8()
        if first < 0x80:
            if running_status is None:
                raise SMFError(
                    f"track {track_index}: data byte 0x{first:02x} with no running status "
                    f"at offset {rd.pos}"
                )
            status = running_status
            data1 = first
        else:
            status = first
            data1 = None

        if status == 0xFF:  # meta
            running_status = None
            meta_type = rd.read_u8()
            length = rd.read_vlq()
            rd.read(length)
            if meta_type == META_END_OF_TRACK:
                break
        elif status in (0xF0, 0xF7):  # sysex: length-prefixed, not interpreted
            running_status = None
            length = rd.read_vlq()
            rd.read(length)
        elif status >= 0xF0:
            raise SMFError(
                f"track {track_index}: unsupported system message 0x{status:02x} "
                f"at offset {rd.pos}"
            )
        else:
            running_status = status
            kind = status & 0xF0
            channel = status & 0x0F
            if data1 is None:
                data1 = rd.read_u8()
            if kind in (0xC0, 0xD0):  # program change / channel pressure: 1 data byte
                continue
            data2 = rd.read_u8()
            if kind == 0x90 and data2 > 0:
                open_notes.setdefault((channel, data1), []).append((tick, data2))
            elif kind == 0x80 or (kind == 0x90 and data2 == 0):
                close_note(channel, data1)
            # 0xA0 / 0xB0 / 0xE0 carry no note information

    dangling = sorted(
        (stack[0][0], pitch)
        for (channel, pitch), stack in open_notes.items()
        if stack
    )
    if dangling:
        tick0, pitch0 = dangling[0]
        raise SMFError(
            f"track {track_index}: unmatched note-on (pitch {pitch0}) at tick {tick0}"
        )
    notes.sort(key=lambda n: (n.on_tick, n.pitch))
    return notes


def parse_smf(
    data: bytes,
    solo_track: Optional[int] = None,
    accomp_track: Optional[int] = None,
):
    """Parse SMF bytes into (solo: SoloScore, accomp: AccompanimentScore, ticks_per_beat).

    Track mapping defaults to the first note-carrying track as solo and the
    second as accompaniment; `solo_track`/`accomp_track` override with raw
    0-based track indices.
    """
    rd = _Reader(data)
    if rd.read(4) != b"MThd":
        raise SMFError("malformed header: missing MThd magic")
    header_len = rd.read_u32()
    if header_len < 6:
        raise SMFError(f"malformed header: length {header_len} < 6")
    fmt = rd.read_u16()
    ntrks = rd.read_u16()
    division = rd.read_u16()
    rd.read(header_len - 6)
    if fmt not in (0, 1):
        raise SMFError(f"unsupported SMF format {fmt} (only 0 and 1)")
    if division & 0x8000:
        raise SMFError("SMPTE division is not supported (ticks-per-quarter only)")
    if division == 0:
        raise SMFError("division of 0 ticks per beat is invalid")

    tracks: List[List[RawNote]] = []
    while len(tracks) < ntrks:
        if rd.remaining() == 0:
            raise SMFError(f"truncated file: header declares {ntrks} tracks, found {len(tracks)}")
        chunk_id = rd.read(4)
        chunk_len = rd.read_u32()
        body = rd.read(chunk_len)
        if chunk_id != b"MTrk":
            continue  # alien chunks are skipped per the SMF spec
        tracks.append(_parse_track(body, len(tracks)))

    carrying = [i for i, t in enumerate(tracks) if t]
    if solo_track is None:
        solo_track = carrying[0] if carrying else -1
    if accomp_track is None:
        remaining = [i for i in carrying if i != solo_track]
        accomp_track = remaining[0] if remaining else -1

    def track_notes(index: int) -> List[RawNote]:
        if index < 0:
            return []
        if index >= len(tracks):
            raise SMFError(f"configured track {index} does not exist (file has {len(tracks)})")
        return tracks[index]

    tpb = division
    next_id = 0
    solo_notes = []
    for raw in track_notes(solo_track):
        solo_notes.append(
            ScoreNote(
                id=next_id,
                pitch=raw.pitch,
                onset=raw.on_tick / tpb,
                duration=(raw.off_tick - raw.on_tick) / tpb,
                part="solo",
            )
        )
        next_id += 1
    bad = validate_solo_onsets([n.onset for n in solo_notes])
    if bad is not None:
        raise SMFError(
            f"solo track {solo_track} is not monophonic: simultaneous onset at "
            f"tick {round(solo_notes[bad].onset * tpb)}"
        )
    accomp_notes = []
    for raw in track_notes(accomp_track):
        accomp_notes.append(
            ScoreNote(
                id=next_id,
                pitch=raw.pitch,
                onset=raw.on_tick / tpb,
                duration=(raw.off_tick - raw.on_tick) / tpb,
                part="accompaniment",
            )
        )
        next_id += 1

    solo = make_solo_score(solo_notes)
    accomp = group_onsets(accomp_notes)
    return solo, accomp, tpb


# --- writing ---------------------------------------------------------------


def _track_chunk(events: Sequence[Tuple[int, bytes]]) -> bytes:
    """Serialize (abs_tick, message) events plus end-of-track into an MTrk chunk."""
    ordered = sorted(events, key=lambda e: e[0])
    out = bytearray()
    last_tick = 0
    for tick, msg in ordered:
        out += encode_vlq(tick - last_tick)
        out += msg
        last_tick = tick
    out += encode_vlq(0) + bytes([0xFF, META_END_OF_TRACK, 0x00])
    return b"MTrk" + len(out).to_bytes(4, "big") + bytes(out)


def _header_chunk(fmt: int, ntrks: int, division: int) -> bytes:
    body = fmt.to_bytes(2, "big") + ntrks.to_bytes(2, "big") + division.to_bytes(2, "big")
    return b"MThd" + (6).to_bytes(4, "big") + body


def _tempo_meta(microseconds_per_beat: int) -> bytes:
    return bytes([0xFF, 0x51, 0x03]) + microseconds_per_beat.to_bytes(3, "big")


def _note_events(
    notes: Sequence[Tuple[int, int, int, int]], channel: int
) -> List[Tuple[int, bytes]]:
    """(pitch, velocity, on_tick, off_tick) tuples to note-on/off messages."""
    events = []
    for pitch, velocity, on_tick, off_tick in notes:
        events.append((on_tick, bytes([0x90 | channel, pitch, velocity])))
        events.append((max(off_tick, on_tick + 1), bytes([0x80 | channel, pitch, 0])))
    return events


def write_score_smf(
    solo: SoloScore,
    accomp: AccompanimentScore,
    ticks_per_beat: int = DEFAULT_TICKS_PER_BEAT,
) -> bytes:
    """Serialize a score pair to SMF format 1 (tempo track, solo track, accomp track)."""

    def to_ticks(notes: Sequence[ScoreNote]) -> List[Tuple[int, int, int, int]]:
        out = []
        for n in notes:
            on = round(n.onset * ticks_per_beat)
            off = round((n.onset + n.duration) * ticks_per_beat)
            out.append((n.pitch, 64, on, off))
        return out

    tempo_track = _track_chunk([(0, _tempo_meta(500000))])
    solo_track = _track_chunk(_note_events(to_ticks(solo.notes), channel=0))
    accomp_track = _track_chunk(_note_events(to_ticks(accomp.notes), channel=1))
    return _header_chunk(1, 3, ticks_per_beat) + tempo_track + solo_track + accomp_track


def seconds_to_capture_ticks(seconds: float) -> int:
    return round(seconds * CAPTURE_TICKS_PER_BEAT / CAPTURE_SECONDS_PER_BEAT)


def write_performance_smf(notes: Sequence[PerformedNote]) -> bytes:
    """Serialize a performed stream to a single-track SMF at a fixed 120 BPM map."""
    tick_notes = []
    for n in notes:
        duration = n.duration_seconds if n.duration_seconds is not None else 0.25
        on = seconds_to_capture_ticks(n.onset_seconds)
        off = seconds_to_capture_ticks(n.onset_seconds + duration)
        tick_notes.append((n.pitch, n.velocity, on, off))
    track = _track_chunk([(0, _tempo_meta(500000))] + _note_events(tick_notes, channel=0))
    return _header_chunk(0, 1, CAPTURE_TICKS_PER_BEAT) + track


def write_capture_smf(
    solo_notes: Sequence[Tuple[float, int, int, float]],
    accomp_events: Sequence[Tuple[float, int, int, float]],
) -> bytes:
    """Serialize a session capture: format 1, solo echo track then accompaniment track.

    Both inputs are (onset_seconds, pitch, velocity, duration_seconds) tuples.
    """

    def to_ticks(rows):
        out = []
        for onset, pitch, velocity, duration in rows:
            on = seconds_to_capture_ticks(onset)
            off = seconds_to_capture_ticks(onset + duration)
            out.append((pitch, velocity, on, off))
        return out

    tempo_track = _track_chunk([(0, _tempo_meta(500000))])
    solo_track = _track_chunk(_note_events(to_ticks(solo_notes), channel=0))
    accomp_track = _track_chunk(_note_events(to_ticks(accomp_events), channel=1))
    return _header_chunk(1, 3, CAPTURE_TICKS_PER_BEAT) + tempo_track + solo_track + accomp_track
