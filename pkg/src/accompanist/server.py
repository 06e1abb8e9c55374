"""WebSocket telemetry and control.

One port carries everything: the session publishes solo/accompaniment/tempo
messages to every connected client, and clients send scaling changes back.
The server lives on its own thread with its own asyncio loop so the pipeline
never waits on a socket; each client gets a bounded queue and a slow client
loses its oldest frames (counted and logged), never the session's time.
"""
from __future__ import annotations

import asyncio
import json
import logging
import queue
import threading
from typing import Dict, Optional, Set

from websockets.asyncio.server import serve

from .engine import SCALING_TARGETS

log = logging.getLogger(__name__)

CLIENT_QUEUE_LIMIT = 256

SOLO_STATUS = {"match": "match", "insertion": "insert", "wrong_note": "miss"}


def solo_note_message(pitch: int, velocity: int, time: float, label: str) -> Dict:
    return {
        "type": "solo_note",
        "pitch": pitch,
        "velocity": velocity,
        "time": time,
        "status": SOLO_STATUS[label],
    }


def accomp_note_message(pitch: int, velocity: int, time: float, duration: float) -> Dict:
    return {
        "type": "accomp_note",
        "pitch": pitch,
        "velocity": velocity,
        "time": time,
        "duration": duration,
    }


def tempo_message(beat_period: float, score_beat: float) -> Dict:
    return {"type": "tempo", "beat_period": beat_period, "score_beat": score_beat}


class ServerStartupError(Exception):
    pass


class TelemetryServer:
    """Background WebSocket fanout plus control ingress.

    publish() is safe from any thread and never blocks. Scaling messages from
    clients land in control_queue as (target, value) pairs, already clamped;
    the session drains that queue at its own pace (last writer wins).
    """

    def __init__(self, port: int, piece: Dict, host: str = "127.0.0.1") -> None:
        self.port = port
        self.host = host
        self.piece = piece
        self.control_queue: "queue.Queue[tuple]" = queue.Queue()
        self.dropped = 0
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._ready = threading.Event()
        self._startup_error: Optional[BaseException] = None
        self._stop: Optional[asyncio.Event] = None
        self._clients: Set[asyncio.Queue] = set()

    # --- lifecycle --------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._run, name="telemetry-ws", daemon=True
        )
        self._thread.start()
        self._ready.wait()
        if self._startup_error is not None:
            raise ServerStartupError(
                f"cannot listen on ws://{self.host}:{self.port}: {self._startup_error}"
            )

    def _run(self) -> None:
        asyncio.run(self._main())

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        try:
            async with serve(self._handle_client, self.host, self.port):
                self._ready.set()
                await self._stop.wait()
        except OSError as exc:
            self._startup_error = exc
            self._ready.set()

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            try:
                self._loop.call_soon_threadsafe(self._stop.set)
            except RuntimeError:
                pass  # loop already closed; stop() must stay idempotent
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        if self.dropped:
            log.warning("telemetry dropped %d frames to slow clients", self.dropped)

    # --- egress -----------------------------------------------------------

    def publish(self, message: Dict) -> None:
        if self._loop is None:
            return
        frame = json.dumps(message)
        try:
            self._loop.call_soon_threadsafe(self._fan_out, frame)
        except RuntimeError:
            pass  # loop already closed during shutdown

    def _fan_out(self, frame: str) -> None:
        for q in self._clients:
            try:
                q.put_nowait(frame)
            except asyncio.QueueFull:
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
                q.put_nowait(frame)
                self.dropped += 1
                if self.dropped == 1 or self.dropped % 100 == 0:
                    log.warning(
                        "slow telemetry client: dropped %d frames so far", self.dropped
                    )

    # --- per-client -------------------------------------------------------

    async def _handle_client(self, websocket) -> None:
        q: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_QUEUE_LIMIT)
        self._clients.add(q)
        sender = asyncio.ensure_future(self._pump(websocket, q))
        try:
            await websocket.send(json.dumps(self.piece))
            async for raw in websocket:
                self._handle_inbound(raw)
        except Exception:
            pass  # client went away; nothing to unwind beyond cleanup
        finally:
            self._clients.discard(q)
            sender.cancel()

    async def _pump(self, websocket, q: asyncio.Queue) -> None:
        while True:
            frame = await q.get()
            await websocket.send(frame)

    def _handle_inbound(self, raw) -> None:
        try:
            message = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            log.warning("ignoring unparseable control frame")
            return
        if not isinstance(message, dict):
            log.warning("ignoring non-object control frame")
            return
        kind = message.get("type")
        if kind != "scaling":
            log.warning("ignoring unknown message type %r", kind)
            return
        target = message.get("target")
        if target not in SCALING_TARGETS:
            log.warning("ignoring scaling message for unknown target %r", target)
            return
        try:
            value = float(message.get("value"))
        except (TypeError, ValueError):
            log.warning("ignoring scaling message with non-numeric value")
            return
        clamped = min(2.0, max(0.0, value))
        if clamped != value:
            log.info("scaling %s: clamped %g to %g", target, value, clamped)
        self.control_queue.put((target, clamped))
