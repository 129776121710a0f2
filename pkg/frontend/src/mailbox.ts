import type { Envelope } from "./types";

interface Slot {
  env: Envelope;
  rxMs: number;
}

/**
 * Latest-value store between the socket and the render loop.
 *
 * The renderer never queues envelopes: a slow frame simply skips ahead to
 * whatever arrived most recently. Per device it also remembers the local
 * receive time so the UI can flag feeds that have gone quiet.
 */
export class Mailbox {
  private slots = new Map<string, Slot>();

  /** Store an envelope. Out-of-order deliveries (seq not advancing) are dropped. */
  put(env: Envelope, rxMs: number): boolean {
    const cur = this.slots.get(env.device_id);
    if (cur && env.seq <= cur.env.seq) return false;
    this.slots.set(env.device_id, { env, rxMs });
    return true;
  }

  latest(device: string): Envelope | undefined {
    return this.slots.get(device)?.env;
  }

  payload<T>(device: string): T | undefined {
    return this.slots.get(device)?.env.payload as T | undefined;
  }

  /** Milliseconds since the device last delivered, or undefined if never. */
  ageMs(device: string, nowMs: number): number | undefined {
    const slot = this.slots.get(device);
    return slot ? nowMs - slot.rxMs : undefined;
  }

  /** Devices whose newest envelope is older than limitMs. */
  stale(nowMs: number, limitMs = 500): string[] {
    const out: string[] = [];
    for (const [device, slot] of this.slots) {
      if (nowMs - slot.rxMs > limitMs) out.push(device);
    }
    return out.sort();
  }

  devices(): string[] {
    return [...this.slots.keys()].sort();
  }

  clear(): void {
    this.slots.clear();
  }
}
