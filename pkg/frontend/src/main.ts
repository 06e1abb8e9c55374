/**
 * Browser entry point: wires the socket, the roll buffer, the canvas, and
 * the five scaling sliders together. Everything testable lives in the other
 * modules; this file is DOM glue.
 */
import { RollBuffer } from "./roll.js";
import { renderFrame } from "./render.js";
import { ScalingControls, NEUTRAL } from "./controls.js";
import { TelemetryClient } from "./socket.js";
import { SCALING_TARGETS, ScalingTarget } from "./protocol.js";

const SLIDER_LABELS: Record<ScalingTarget, string> = {
  loudness_trend: "loudness trend",
  bp: "beat period",
  loudness_dev: "loudness spread",
  timing: "timing",
  articulation: "articulation",
};

function wsUrl(): string {
  const params = new URLSearchParams(location.search);
  const host = params.get("host") ?? location.hostname ?? "127.0.0.1";
  const port = params.get("port") ?? "8765";
  return `ws://${host}:${port}`;
}

function start(): void {
  const canvas = document.getElementById("roll") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");

  const roll = new RollBuffer();
  let connected = false;

  // telemetry timestamps are session-clock seconds; between frames the view
  // dead-reckons from the newest one so the roll keeps scrolling
  let latestTime = 0;
  let latestWall = performance.now();

  const client = new TelemetryClient(wsUrl(), {
    onMessage(msg) {
      roll.apply(msg);
      if (msg.type === "solo_note" || msg.type === "accomp_note") {
        if (msg.time > latestTime) {
          latestTime = msg.time;
          latestWall = performance.now();
        }
      }
    },
    onStatus(up) {
      connected = up;
      if (up) controls.flush();
    },
  });

  const controls = new ScalingControls((msg) => client.send(msg));
  buildSliders(controls);
  client.connect();

  const frame = () => {
    const now = latestTime + (performance.now() - latestWall) / 1000;
    roll.prune(now);
    canvas.width = canvas.clientWidth;
    canvas.height = canvas.clientHeight;
    renderFrame(ctx, roll, now, { width: canvas.width, height: canvas.height }, connected);
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

function buildSliders(controls: ScalingControls): void {
  const panel = document.getElementById("controls");
  if (!panel) return;
  for (const target of SCALING_TARGETS) {
    const row = document.createElement("label");
    row.className = "control-row";

    const name = document.createElement("span");
    name.textContent = SLIDER_LABELS[target];

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "2";
    slider.step = "0.01";
    slider.value = String(NEUTRAL);

    const readout = document.createElement("span");
    readout.className = "readout";
    readout.textContent = NEUTRAL.toFixed(2);

    slider.addEventListener("input", () => {
      const clamped = controls.set(target, Number(slider.value));
      slider.value = String(clamped);
      readout.textContent = clamped.toFixed(2);
    });
    // double-click anywhere on the row: neutral reset for every target
    row.addEventListener("dblclick", () => {
      controls.reset();
      for (const r of panel.querySelectorAll<HTMLInputElement>("input[type=range]")) {
        r.value = String(NEUTRAL);
      }
      for (const r of panel.querySelectorAll(".readout")) {
        r.textContent = NEUTRAL.toFixed(2);
      }
    });

    row.append(name, slider, readout);
    panel.append(row);
  }
}

start();
