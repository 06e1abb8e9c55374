/**
 * Reconnecting telemetry socket. Wraps a browser-style WebSocket (the ws
 * package satisfies the same surface, which is what the integration tests
 * inject); parses frames through the protocol module and hands the app only
 * well-formed messages.
 */
import { ServerMessage, parseServerMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface TelemetryHandlers {
  onMessage(msg: ServerMessage): void;
  onStatus?(connected: boolean): void;
}

const INITIAL_RETRY_MS = 500;
const MAX_RETRY_MS = 4000;

export class TelemetryClient {
  private socket: SocketLike | null = null;
  private open = false;
  private closedByUser = false;
  private retryMs = INITIAL_RETRY_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private handlers: TelemetryHandlers,
    private factory: SocketFactory = (u) =>
      new (globalThis as { WebSocket: new (url: string) => SocketLike }).WebSocket(u),
  ) {}

  connect(): void {
    this.closedByUser = false;
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.open = true;
      this.retryMs = INITIAL_RETRY_MS;
      this.handlers.onStatus?.(true);
    };
    socket.onmessage = (ev) => {
      const raw = typeof ev.data === "string" ? ev.data : String(ev.data);
      const msg = parseServerMessage(raw);
      if (msg) this.handlers.onMessage(msg);
    };
    socket.onerror = () => {
      // the close handler owns reconnect; nothing to do here
    };
    socket.onclose = () => {
      const wasOpen = this.open;
      this.open = false;
      this.socket = null;
      if (wasOpen) this.handlers.onStatus?.(false);
      if (!this.closedByUser) this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      if (!this.closedByUser) this.connect();
    }, this.retryMs);
    this.retryMs = Math.min(MAX_RETRY_MS, this.retryMs * 2);
  }

  get connected(): boolean {
    return this.open;
  }

  /** Fire-and-forget send; false when the socket is down (caller queues). */
  send(msg: object): boolean {
    if (!this.open || this.socket === null) return false;
    try {
      this.socket.send(JSON.stringify(msg));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.open = false;
  }
}
