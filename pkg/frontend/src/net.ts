import { SCHEMA_VERSION, type ClientMessage } from "./types.js";

export type ConnectionStatus = "connecting" | "connected" | "reconnecting";

/** The slice of WebSocket this module touches; tests substitute a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export interface BridgeHooks {
  onText(text: string): void;
  onStatus?(status: ConnectionStatus): void;
  onOpen?(): void;
}

/**
 * Websocket wrapper with capped-backoff reconnect. Outbound traffic is
 * restricted to ClientMessage, so the server only ever sees the documented
 * message types.
 */
export class BridgeClient {
  private sock: SocketLike | null = null;
  private retryMs = 1000;
  private closed = false;
  private up = false;

  constructor(
    private url: string,
    private hooks: BridgeHooks,
    private makeSocket: (url: string) => SocketLike = (u) =>
      new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.setStatus(this.retryMs > 1000 || this.sock ? "reconnecting" : "connecting");
    const sock = this.makeSocket(this.url);
    this.sock = sock;

    sock.onopen = () => {
      this.retryMs = 1000;
      this.up = true;
      this.setStatus("connected");
      this.hooks.onOpen?.();
    };
    sock.onmessage = (ev) => {
      if (typeof ev.data === "string") this.hooks.onText(ev.data);
    };
    sock.onclose = () => {
      this.up = false;
      if (this.closed) return;
      this.setStatus("reconnecting");
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 8000);
    };
    sock.onerror = () => {
      // onclose owns the retry
    };
  }

  get connected(): boolean {
    return this.up;
  }

  /** Returns false when the socket is down; nothing is queued here. */
  send(msg: ClientMessage): boolean {
    if (!this.up || !this.sock) return false;
    this.sock.send(JSON.stringify(msg));
    return true;
  }

  close(): void {
    this.closed = true;
    this.sock?.close();
  }

  private setStatus(status: ConnectionStatus) {
    this.hooks.onStatus?.(status);
  }
}

export interface GoalSenderOptions {
  perSecond?: number;
  dropAfterMs?: number;
  now?: () => number;
}

/**
 * Rate-limits goal updates from pointer drags. A leading send goes out
 * immediately, later positions within the refractory window collapse into
 * one trailing send, so the final drag position always lands while any
 * one-second window carries at most perSecond messages.
 *
 * Drags made while disconnected are buffered (latest wins) and replayed on
 * reconnect, unless the outage lasted longer than dropAfterMs.
 */
export class GoalSender {
  private minIntervalMs: number;
  private dropAfterMs: number;
  private now: () => number;
  private lastSentAt = -Infinity;
  private pending: number[] | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private buffered: { position: number[]; at: number } | null = null;

  constructor(
    private send: (msg: ClientMessage) => boolean,
    private isConnected: () => boolean,
    opts: GoalSenderOptions = {},
  ) {
    // ceil keeps floor(1000 / interval) at or below the advertised rate
    this.minIntervalMs = Math.ceil(1000 / (opts.perSecond ?? 30));
    this.dropAfterMs = opts.dropAfterMs ?? 2000;
    this.now = opts.now ?? (() => Date.now());
  }

  offer(position: number[]): void {
    if (!this.isConnected()) {
      this.buffered = { position, at: this.now() };
      return;
    }
    const t = this.now();
    if (this.timer === null && t - this.lastSentAt >= this.minIntervalMs) {
      this.sendNow(position, t);
      return;
    }
    this.pending = position;
    if (this.timer === null) {
      const delay = Math.max(0, this.lastSentAt + this.minIntervalMs - t);
      this.timer = setTimeout(() => this.flush(), delay);
    }
  }

  /** Call when the connection comes back; replays a fresh buffered drag. */
  onConnected(): void {
    if (this.buffered === null) return;
    const { position, at } = this.buffered;
    this.buffered = null;
    if (this.now() - at <= this.dropAfterMs) {
      this.offer(position);
    }
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = null;
  }

  private flush(): void {
    this.timer = null;
    if (this.pending === null) return;
    const position = this.pending;
    this.pending = null;
    if (!this.isConnected()) {
      this.buffered = { position, at: this.now() };
      return;
    }
    this.sendNow(position, this.now());
  }

  private sendNow(position: number[], t: number): void {
    if (this.send({ v: SCHEMA_VERSION, type: "set_goal", position })) {
      this.lastSentAt = t;
    }
  }
}
