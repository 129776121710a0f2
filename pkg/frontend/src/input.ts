import type { Envelope, LeaderPayload, Vec3 } from "./types";

export interface LeaderInputOptions {
  /** Follower-equivalent micrometres of motion per pixel of pointer drag. */
  umPerPx?: number;
  /** Depth change per wheel notch, same units as umPerPx. */
  umPerWheelTick?: number;
  /** Publish rate cap. */
  maxHz?: number;
}

const UM_PER_MM = 1000;

/**
 * Turns 2.5-D pointer gestures into leader pose samples.
 *
 * This replaces the stylus of a physical input arm: drag moves the leader in
 * the x-y plane, wheel or modifier-drag moves depth (z), a key acts as the
 * clutch pedal and another as the stylus insertion switch. Samples are only
 * produced while connected, only when something changed, and never faster
 * than maxHz. Sequence numbers are contiguous from 1.
 */
export class LeaderInput {
  readonly umPerPx: number;
  readonly umPerWheelTick: number;
  readonly minIntervalMs: number;

  private position: Vec3 = [0, 0, 0]; // mm
  private pedal = false;
  private stylusPending = false;
  private stylusDown = false; // value carried by the last published sample
  private dirty = false;
  private connected = false;
  private seq = 0;
  private lastSampleMs = -Infinity;

  constructor(opts: LeaderInputOptions = {}) {
    this.umPerPx = opts.umPerPx ?? 10;
    this.umPerWheelTick = opts.umPerWheelTick ?? 50;
    const maxHz = opts.maxHz ?? 125;
    if (maxHz <= 0) throw new Error("maxHz must be > 0");
    this.minIntervalMs = 1000 / maxHz;
  }

  /** While disconnected every gesture is ignored and sample() yields nothing. */
  setConnected(connected: boolean): void {
    this.connected = connected;
  }

  isConnected(): boolean {
    return this.connected;
  }

  positionMm(): Vec3 {
    return [...this.position] as Vec3;
  }

  /** Pointer drag. Screen right is +x, screen up is +y; depth drags map
      vertical motion to z instead. */
  drag(dxPx: number, dyPx: number, depth = false): void {
    if (!this.connected) return;
    if (depth) {
      this.position[2] -= (dyPx * this.umPerPx) / UM_PER_MM;
    } else {
      this.position[0] += (dxPx * this.umPerPx) / UM_PER_MM;
      this.position[1] -= (dyPx * this.umPerPx) / UM_PER_MM;
    }
    this.dirty = true;
  }

  /** Wheel notches; positive steps push the tool deeper (-z). */
  wheel(steps: number): void {
    if (!this.connected) return;
    this.position[2] -= (steps * this.umPerWheelTick) / UM_PER_MM;
    this.dirty = true;
  }

  setPedal(engaged: boolean): void {
    if (!this.connected) return;
    if (engaged !== this.pedal) {
      this.pedal = engaged;
      this.dirty = true;
    }
  }

  pedalEngaged(): boolean {
    return this.pedal;
  }

  /** One insertion request: the next sample carries stylus_pressed=true and
      the one after drops it back to false so the receiver sees a clean edge. */
  tapStylus(): void {
    if (!this.connected) return;
    this.stylusPending = true;
    this.dirty = true;
  }

  /**
   * Poll for the next envelope to publish.
   *
   * Returns null when there is nothing new, when the rate cap has not
   * elapsed, or while disconnected. Callers poll this at or above maxHz.
   */
  sample(nowMs: number): Envelope | null {
    if (!this.connected) return null;
    const fallingEdge = this.stylusDown && !this.stylusPending;
    if (!this.dirty && !fallingEdge) return null;
    if (nowMs - this.lastSampleMs < this.minIntervalMs) return null;

    const pressed = this.stylusPending;
    this.stylusPending = false;
    this.stylusDown = pressed;
    this.dirty = false;
    this.lastSampleMs = nowMs;
    this.seq += 1;

    const payload: LeaderPayload = {
      schema: "tims/leader/1",
      position_mm: [...this.position] as Vec3,
      stylus_pressed: pressed,
      pedal_engaged: this.pedal,
    };
    return {
      device_id: "leader",
      seq: this.seq,
      timestamp_ms: Math.max(0, Math.round(nowMs)),
      payload: payload as unknown as Record<string, unknown>,
    };
  }
}
