/**
 * Scaling slider state. Values clamp to the server's legal range before
 * anything is displayed or sent; while the socket is down the latest value
 * per target is queued and flushed on reconnect (intermediate drags are
 * stale the moment a newer one exists).
 */
import {
  SCALING_TARGETS,
  ScalingMsg,
  ScalingTarget,
  clampScaling,
  scalingMessage,
} from "./protocol.js";

export const NEUTRAL = 1;

/** Returns true when the message went out, false when the caller is offline. */
export type SendFn = (msg: ScalingMsg) => boolean;

export class ScalingControls {
  readonly values: Record<ScalingTarget, number>;
  private pending = new Map<ScalingTarget, number>();

  constructor(private send: SendFn) {
    this.values = Object.fromEntries(
      SCALING_TARGETS.map((t) => [t, NEUTRAL]),
    ) as Record<ScalingTarget, number>;
  }

  /** Apply a slider move; returns the clamped value for the widget to show. */
  set(target: ScalingTarget, raw: number): number {
    const value = clampScaling(raw);
    this.values[target] = value;
    const msg = scalingMessage(target, value);
    if (this.send(msg)) {
      this.pending.delete(target);
    } else {
      this.pending.set(target, value);
    }
    return value;
  }

  /** Neutral reset: every target back to 1, one message each. */
  reset(): void {
    for (const target of SCALING_TARGETS) {
      this.set(target, NEUTRAL);
    }
  }

  /** Called on reconnect: push the latest queued value per target. */
  flush(): void {
    for (const [target, value] of this.pending) {
      if (this.send(scalingMessage(target, value))) {
        this.pending.delete(target);
      }
    }
  }

  get pendingCount(): number {
    return this.pending.size;
  }
}
