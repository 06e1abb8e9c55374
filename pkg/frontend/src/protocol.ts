/**
 * Wire protocol shared with the session's WebSocket server.
 *
 * Field names are bit-exact with the server side; the JSON schema under
 * schema/ws_messages.schema.json is the single source of truth and the test
 * suite validates every message this module builds or accepts against it.
 * Parsing here is hand-rolled structural checking so the browser bundle
 * carries no validator dependency.
 */

export type SoloStatus = "match" | "insert" | "miss";

export interface SoloNoteMsg {
  type: "solo_note";
  pitch: number;
  velocity: number;
  time: number;
  status: SoloStatus;
}

export interface AccompNoteMsg {
  type: "accomp_note";
  pitch: number;
  velocity: number;
  time: number;
  duration: number;
}

export interface TempoMsg {
  type: "tempo";
  beat_period: number;
  score_beat: number;
}

export interface PieceNote {
  pitch: number;
  onset_beats: number;
  duration_beats: number;
}

export interface PieceMsg {
  type: "piece";
  solo: PieceNote[];
  accomp: PieceNote[];
}

export type ServerMessage = SoloNoteMsg | AccompNoteMsg | TempoMsg | PieceMsg;

export const SCALING_TARGETS = [
  "loudness_trend",
  "bp",
  "loudness_dev",
  "timing",
  "articulation",
] as const;

export type ScalingTarget = (typeof SCALING_TARGETS)[number];

export interface ScalingMsg {
  type: "scaling";
  target: ScalingTarget;
  value: number;
}

export const SCALING_MIN = 0;
export const SCALING_MAX = 2;

export function clampScaling(value: number): number {
  if (!Number.isFinite(value)) return 1;
  return Math.min(SCALING_MAX, Math.max(SCALING_MIN, value));
}

/** Build a scaling message with the value already clamped to the legal range. */
export function scalingMessage(target: ScalingTarget, value: number): ScalingMsg {
  return { type: "scaling", target, value: clampScaling(value) };
}

function isPitch(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v) && v >= 0 && v <= 127;
}

function isVelocity(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v) && v >= 1 && v <= 127;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPieceNote(v: unknown): v is PieceNote {
  if (typeof v !== "object" || v === null) return false;
  const n = v as Record<string, unknown>;
  return (
    isPitch(n.pitch) &&
    isFiniteNumber(n.onset_beats) &&
    n.onset_beats >= 0 &&
    isFiniteNumber(n.duration_beats) &&
    n.duration_beats > 0
  );
}

/**
 * Parse one server frame. Returns null for anything that is not a known,
 * well-formed message; unknown types are logged once per type so a newer
 * server does not flood the console.
 */
const warnedTypes = new Set<string>();

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const m = doc as Record<string, unknown>;
  switch (m.type) {
    case "solo_note":
      if (
        isPitch(m.pitch) &&
        isVelocity(m.velocity) &&
        isFiniteNumber(m.time) &&
        (m.status === "match" || m.status === "insert" || m.status === "miss")
      ) {
        return {
          type: "solo_note",
          pitch: m.pitch,
          velocity: m.velocity,
          time: m.time,
          status: m.status,
        };
      }
      return null;
    case "accomp_note":
      if (
        isPitch(m.pitch) &&
        isVelocity(m.velocity) &&
        isFiniteNumber(m.time) &&
        isFiniteNumber(m.duration) &&
        m.duration >= 0
      ) {
        return {
          type: "accomp_note",
          pitch: m.pitch,
          velocity: m.velocity,
          time: m.time,
          duration: m.duration,
        };
      }
      return null;
    case "tempo":
      if (
        isFiniteNumber(m.beat_period) &&
        m.beat_period > 0 &&
        isFiniteNumber(m.score_beat) &&
        m.score_beat >= 0
      ) {
        return { type: "tempo", beat_period: m.beat_period, score_beat: m.score_beat };
      }
      return null;
    case "piece":
      if (
        Array.isArray(m.solo) &&
        Array.isArray(m.accomp) &&
        m.solo.every(isPieceNote) &&
        m.accomp.every(isPieceNote)
      ) {
        return { type: "piece", solo: m.solo, accomp: m.accomp };
      }
      return null;
    default: {
      const t = typeof m.type === "string" ? m.type : String(m.type);
      if (!warnedTypes.has(t)) {
        warnedTypes.add(t);
        console.warn(`ignoring unknown message type ${JSON.stringify(t)}`);
      }
      return null;
    }
  }
}
