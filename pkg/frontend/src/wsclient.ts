import type { Envelope } from "./types";

export type BusStatus = "connecting" | "open" | "closed";

/** The subset of the WebSocket API the client touches, so tests can fake it. */
export interface WebSocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

const WS_OPEN = 1;

export interface BusClientOptions {
  onEnvelope: (env: Envelope) => void;
  onStatus?: (status: BusStatus) => void;
  /** Device filter sent as a sub op right after the socket opens. */
  devices?: readonly string[];
  /** Reconnect delay after a drop; 0 disables reconnection. */
  reconnectMs?: number;
  wsFactory?: (url: string) => WebSocketLike;
  schedule?: (fn: () => void, ms: number) => unknown;
}

function looksLikeEnvelope(obj: unknown): obj is Envelope {
  if (typeof obj !== "object" || obj === null) return false;
  const rec = obj as Record<string, unknown>;
  return (
    typeof rec["device_id"] === "string" &&
    typeof rec["seq"] === "number" &&
    typeof rec["timestamp_ms"] === "number" &&
    typeof rec["payload"] === "object" &&
    rec["payload"] !== null
  );
}

/**
 * Bus connection over the /bus WebSocket.
 *
 * Frames are JSON text: envelope objects in both directions, plus a small
 * op grammar ({"op":"sub"}, {"op":"ping"} / {"op":"pong"}, {"op":"err"}).
 * The client resubscribes automatically after a reconnect.
 */
export class BusClient {
  readonly url: string;
  private opts: Required<Pick<BusClientOptions, "reconnectMs">> & BusClientOptions;
  private ws: WebSocketLike | null = null;
  private status: BusStatus = "closed";
  private stopped = false;
  private devices: readonly string[];
  lastError = "";

  constructor(url: string, opts: BusClientOptions) {
    this.url = url;
    this.opts = { reconnectMs: 1000, ...opts };
    this.devices = opts.devices ?? [];
  }

  connect(): void {
    this.stopped = false;
    this.openSocket();
  }

  private openSocket(): void {
    const factory =
      this.opts.wsFactory ?? ((u: string) => new WebSocket(u) as unknown as WebSocketLike);
    this.setStatus("connecting");
    let ws: WebSocketLike;
    try {
      ws = factory(this.url);
    } catch {
      this.setStatus("closed");
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.setStatus("open");
      ws.send(JSON.stringify({ op: "sub", devices: this.devices }));
    };
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onerror = () => {
      // onclose follows; nothing to do here
    };
    ws.onclose = () => {
      if (this.ws === ws) this.ws = null;
      this.setStatus("closed");
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.opts.reconnectMs <= 0) return;
    const schedule = this.opts.schedule ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
    schedule(() => {
      if (!this.stopped && this.ws === null) this.openSocket();
    }, this.opts.reconnectMs);
  }

  private handleMessage(data: unknown): void {
    if (typeof data !== "string") return;
    let obj: unknown;
    try {
      obj = JSON.parse(data);
    } catch {
      return;
    }
    if (looksLikeEnvelope(obj)) {
      this.opts.onEnvelope(obj);
      return;
    }
    const rec = obj as Record<string, unknown> | null;
    if (rec && rec["op"] === "ping") {
      this.ws?.send(JSON.stringify({ op: "pong" }));
    } else if (rec && rec["op"] === "err") {
      this.lastError = String(rec["detail"] ?? "unknown bus error");
    }
  }

  private setStatus(s: BusStatus): void {
    if (s === this.status) return;
    this.status = s;
    this.opts.onStatus?.(s);
  }

  getStatus(): BusStatus {
    return this.status;
  }

  isOpen(): boolean {
    return this.ws !== null && this.ws.readyState === WS_OPEN;
  }

  /** Change the device filter; takes effect immediately if connected. */
  subscribe(devices: readonly string[]): void {
    this.devices = devices;
    if (this.isOpen()) this.ws?.send(JSON.stringify({ op: "sub", devices }));
  }

  /** Send one envelope. Returns false (and drops it) when not connected. */
  publish(env: Envelope): boolean {
    if (!this.isOpen()) return false;
    this.ws?.send(JSON.stringify(env));
    return true;
  }

  close(): void {
    this.stopped = true;
    const ws = this.ws;
    this.ws = null;
    ws?.close();
    this.setStatus("closed");
  }
}
