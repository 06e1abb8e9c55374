"""Output sinks for scheduled accompaniment.

A sink receives each accompaniment event exactly once, at emission, plus an
echo of the followed solo input so captures hold the whole session. Memory
keeps events for assertions, capture writes a two-track MIDI file on close,
and the device sink is a placeholder until a realtime MIDI backend is wired
in.
"""
from __future__ import annotations

from typing import List, Tuple

from .engine import ScheduledEvent
from .smf import write_capture_smf


class DeviceUnavailableError(Exception):
    pass


class Sink:
    def solo(self, pitch: int, velocity: int, time: float, duration: float) -> None:
        pass

    def emit(self, event: ScheduledEvent) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MemorySink(Sink):
    def __init__(self) -> None:
        self.events: List[ScheduledEvent] = []
        self.solo_notes: List[Tuple[float, int, int, float]] = []

    def solo(self, pitch: int, velocity: int, time: float, duration: float) -> None:
        self.solo_notes.append((time, pitch, velocity, duration))

    def emit(self, event: ScheduledEvent) -> None:
        self.events.append(event)


class SMFCaptureSink(Sink):
    """Buffers the session and writes a format-1 capture file on close."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._solo: List[Tuple[float, int, int, float]] = []
        self._accomp: List[Tuple[float, int, int, float]] = []

    def solo(self, pitch: int, velocity: int, time: float, duration: float) -> None:
        self._solo.append((time, pitch, velocity, duration))

    def emit(self, event: ScheduledEvent) -> None:
        self._accomp.append((event.time, event.pitch, event.velocity, event.duration))

    def close(self) -> None:
        with open(self.path, "wb") as fh:
            fh.write(write_capture_smf(self._solo, self._accomp))


def open_device_sink(name: str) -> Sink:
    raise DeviceUnavailableError(
        f"MIDI output device {name!r}: no realtime MIDI backend is available in this build"
    )


def open_device_source(name: str):
    raise DeviceUnavailableError(
        f"MIDI input device {name!r}: no realtime MIDI backend is available in this build"
    )
