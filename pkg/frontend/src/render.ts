/**
 * Piano-roll rendering. renderFrame is a pure function of (buffer, now,
 * viewport, connected): no clocks, no randomness, no retained state, so
 * replaying a message log reproduces every frame pixel for pixel.
 *
 * It draws through a minimal 2D-context interface instead of the full
 * CanvasRenderingContext2D so tests can substitute a recording context; a
 * real canvas context satisfies it structurally.
 */
import { RollBuffer, RollNote, NoteKind } from "./roll.js";

export interface Draw2D {
  // union mirrors the real context; this module only ever assigns strings
  fillStyle: string | CanvasGradient | CanvasPattern;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Viewport {
  width: number;
  height: number;
}

/** Where the "now" line sits: notes enter from the right fifth and scroll left. */
const NOW_FRACTION = 0.8;
const PITCH_HIGH = 108;
const PITCH_LOW = 21;

export const BACKGROUND = "#11131a";
export const NOW_LINE = "#3a3f4f";
export const TEXT = "#c8ccd8";
export const BANNER = "rgba(10, 10, 14, 0.65)";

const HUES: Record<NoteKind, number> = {
  soloMatch: 130,
  soloError: 4,
  accomp: 215,
};

/** Louder notes draw brighter lines; lightness is linear in velocity. */
export function noteColor(kind: NoteKind, brightness: number): string {
  const light = 24 + 54 * brightness;
  return `hsl(${HUES[kind]}, 80%, ${light}%)`;
}

export interface Layout {
  timeToX(t: number): number;
  pitchToY(pitch: number): number;
  pxPerSecond: number;
  rowHeight: number;
}

export function makeLayout(view: Viewport, now: number, windowSeconds: number): Layout {
  const pxPerSecond = view.width / windowSeconds;
  const originTime = now - NOW_FRACTION * windowSeconds;
  const rows = PITCH_HIGH - PITCH_LOW + 1;
  const rowHeight = Math.max(2, Math.floor(view.height / rows));
  return {
    pxPerSecond,
    rowHeight,
    timeToX: (t) => (t - originTime) * pxPerSecond,
    pitchToY: (pitch) => {
      const clamped = Math.min(PITCH_HIGH, Math.max(PITCH_LOW, pitch));
      return ((PITCH_HIGH - clamped) / rows) * (view.height - rowHeight);
    },
  };
}

function drawNote(ctx: Draw2D, layout: Layout, note: RollNote): void {
  const x = layout.timeToX(note.startTime);
  const w = Math.max(2, note.duration * layout.pxPerSecond);
  ctx.fillStyle = noteColor(note.kind, note.brightness);
  ctx.fillRect(x, layout.pitchToY(note.pitch), w, layout.rowHeight);
}

export function renderFrame(
  ctx: Draw2D,
  roll: RollBuffer,
  now: number,
  view: Viewport,
  connected: boolean,
): void {
  ctx.fillStyle = BACKGROUND;
  ctx.fillRect(0, 0, view.width, view.height);

  const layout = makeLayout(view, now, roll.windowSeconds);

  // accompaniment underneath, solo lines on top
  for (const note of roll.notes) {
    if (note.kind === "accomp") drawNote(ctx, layout, note);
  }
  for (const note of roll.notes) {
    if (note.kind !== "accomp") drawNote(ctx, layout, note);
  }

  ctx.fillStyle = NOW_LINE;
  ctx.fillRect(layout.timeToX(now), 0, 1, view.height);

  ctx.fillStyle = TEXT;
  ctx.font = "12px sans-serif";
  const bpm = 60 / roll.beatPeriod;
  ctx.fillText(`${bpm.toFixed(1)} BPM   beat ${roll.scoreBeat.toFixed(2)}`, 8, 16);

  if (!connected) {
    ctx.fillStyle = BANNER;
    ctx.fillRect(0, 0, view.width, view.height);
    ctx.fillStyle = TEXT;
    ctx.font = "16px sans-serif";
    ctx.fillText("disconnected — retrying", view.width / 2 - 90, view.height / 2);
  }
}
