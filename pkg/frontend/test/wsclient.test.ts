import { describe, expect, it } from "vitest";
import { BusClient, type BusStatus, type WebSocketLike } from "../src/wsclient";
import type { Envelope } from "../src/types";

class FakeWS implements WebSocketLike {
  readyState = 0; // CONNECTING
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }
  receive(obj: unknown): void {
    this.onmessage?.({ data: typeof obj === "string" ? obj : JSON.stringify(obj) });
  }
  dropFromServer(): void {
    this.readyState = 3;
    this.onclose?.();
  }
  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

interface Harness {
  client: BusClient;
  sockets: FakeWS[];
  statuses: BusStatus[];
  envelopes: Envelope[];
  pending: Array<() => void>;
}

function harness(devices: string[] = ["scene"]): Harness {
  const sockets: FakeWS[] = [];
  const statuses: BusStatus[] = [];
  const envelopes: Envelope[] = [];
  const pending: Array<() => void> = [];
  const client = new BusClient("ws://test/bus", {
    devices,
    onEnvelope: (env) => envelopes.push(env),
    onStatus: (s) => statuses.push(s),
    wsFactory: () => {
      const ws = new FakeWS();
      sockets.push(ws);
      return ws;
    },
    schedule: (fn) => pending.push(fn),
  });
  return { client, sockets, statuses, envelopes, pending };
}

describe("BusClient", () => {
  it("subscribes right after the socket opens", () => {
    const h = harness(["scene", "haptic"]);
    h.client.connect();
    expect(h.statuses).toEqual(["connecting"]);
    h.sockets[0]!.open();
    expect(h.statuses).toEqual(["connecting", "open"]);
    expect(JSON.parse(h.sockets[0]!.sent[0]!)).toEqual({
      op: "sub",
      devices: ["scene", "haptic"],
    });
  });

  it("delivers parsed envelopes and ignores noise", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0]!.open();
    const env = {
      device_id: "scene",
      seq: 3,
      timestamp_ms: 99,
      payload: { schema: "tims/scene/1" },
    };
    h.sockets[0]!.receive(env);
    h.sockets[0]!.receive("not json at all {");
    h.sockets[0]!.receive({ op: "hello" });
    h.sockets[0]!.receive([1, 2, 3]);
    expect(h.envelopes).toEqual([env]);
  });

  it("answers ping with pong and records bus errors", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0]!.open();
    h.sockets[0]!.receive({ op: "ping" });
    const pong = h.sockets[0]!.sent.map((s) => JSON.parse(s)).find((m) => m.op === "pong");
    expect(pong).toBeDefined();
    h.sockets[0]!.receive({ op: "err", detail: "bad envelope" });
    expect(h.client.lastError).toBe("bad envelope");
  });

  it("drops publishes while disconnected instead of queueing them", () => {
    const h = harness();
    const env: Envelope = { device_id: "leader", seq: 1, timestamp_ms: 0, payload: {} };
    expect(h.client.publish(env)).toBe(false);
    h.client.connect();
    expect(h.client.publish(env)).toBe(false); // still connecting
    h.sockets[0]!.open();
    expect(h.client.publish(env)).toBe(true);
    expect(h.sockets[0]!.sent.map((s) => JSON.parse(s))).toContainEqual(env);
    h.sockets[0]!.dropFromServer();
    expect(h.client.publish(env)).toBe(false);
  });

  it("reconnects after a server drop and resubscribes", () => {
    const h = harness(["wtd"]);
    h.client.connect();
    h.sockets[0]!.open();
    h.sockets[0]!.dropFromServer();
    expect(h.statuses[h.statuses.length - 1]).toBe("closed");
    expect(h.pending.length).toBe(1);
    h.pending.shift()!();
    expect(h.sockets.length).toBe(2);
    h.sockets[1]!.open();
    expect(JSON.parse(h.sockets[1]!.sent[0]!)).toEqual({ op: "sub", devices: ["wtd"] });
    expect(h.client.isOpen()).toBe(true);
  });

  it("stays closed once close() is called", () => {
    const h = harness();
    h.client.connect();
    h.sockets[0]!.open();
    h.client.close();
    expect(h.client.isOpen()).toBe(false);
    // a queued reconnect from the close must not reopen
    for (const fn of h.pending.splice(0)) fn();
    expect(h.sockets.length).toBe(1);
    expect(h.client.getStatus()).toBe("closed");
  });

  it("updates the device filter live", () => {
    const h = harness(["scene"]);
    h.client.connect();
    h.sockets[0]!.open();
    h.client.subscribe(["scene", "trial"]);
    const subs = h.sockets[0]!.sent.map((s) => JSON.parse(s)).filter((m) => m.op === "sub");
    expect(subs[subs.length - 1]).toEqual({ op: "sub", devices: ["scene", "trial"] });
  });
});
