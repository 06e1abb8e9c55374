/**
 * The roll buffer: everything the renderer needs, built incrementally from
 * socket messages. Appending is the only mutation; rendering reads it.
 */
import { ServerMessage, PieceMsg } from "./protocol.js";

export type NoteKind = "soloMatch" | "soloError" | "accomp";

export interface RollNote {
  pitch: number;
  startTime: number;
  duration: number;
  kind: NoteKind;
  /** velocity mapped linearly to [0, 1]; drives line lightness */
  brightness: number;
}

/** Visual length of a solo line as a fraction of the current beat period
    (the wire carries no solo durations; this is a display choice). */
const SOLO_LINE_BEATS = 0.3;

export class RollBuffer {
  piece: PieceMsg | null = null;
  notes: RollNote[] = [];
  beatPeriod = 0.5;
  scoreBeat = 0;

  constructor(readonly windowSeconds = 12) {}

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "piece":
        this.piece = msg;
        break;
      case "tempo":
        this.beatPeriod = msg.beat_period;
        this.scoreBeat = msg.score_beat;
        break;
      case "solo_note":
        this.notes.push({
          pitch: msg.pitch,
          startTime: msg.time,
          duration: SOLO_LINE_BEATS * this.beatPeriod,
          kind: msg.status === "match" ? "soloMatch" : "soloError",
          brightness: brightness(msg.velocity),
        });
        break;
      case "accomp_note":
        this.notes.push({
          pitch: msg.pitch,
          startTime: msg.time,
          duration: msg.duration,
          kind: "accomp",
          brightness: brightness(msg.velocity),
        });
        break;
    }
  }

  /** Drop notes that have scrolled out of the window ending at `now`. */
  prune(now: number): void {
    const cutoff = now - this.windowSeconds;
    if (this.notes.length && this.notes[0].startTime + this.notes[0].duration < cutoff) {
      this.notes = this.notes.filter((n) => n.startTime + n.duration >= cutoff);
    }
  }
}

export function brightness(velocity: number): number {
  return Math.min(1, Math.max(0, velocity / 127));
}
