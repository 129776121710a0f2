import type { Envelope } from "./types";

const ENVELOPE_KEYS = ["device_id", "seq", "timestamp_ms", "payload"];
const LEADER_KEYS = ["schema", "position_mm", "stylus_pressed", "pedal_engaged"];

/**
 * Pre-flight check for outgoing leader envelopes.
 *
 * The engine validates every published envelope against the shared JSON
 * schemas and drops offenders, so the console checks the same constraints
 * locally and refuses to send anything that would bounce. Returns a list of
 * violations; empty means the envelope is wire-legal.
 */
export function leaderEnvelopeViolations(env: Envelope): string[] {
  const out: string[] = [];
  if (typeof env.device_id !== "string" || env.device_id.length < 1) {
    out.push("device_id must be a non-empty string");
  }
  if (!Number.isInteger(env.seq) || env.seq < 0) {
    out.push("seq must be an integer >= 0");
  }
  if (!Number.isInteger(env.timestamp_ms) || env.timestamp_ms < 0) {
    out.push("timestamp_ms must be an integer >= 0");
  }
  for (const key of Object.keys(env)) {
    if (!ENVELOPE_KEYS.includes(key)) out.push(`envelope has extra key ${key}`);
  }
  const p = env.payload as Record<string, unknown> | null;
  if (typeof p !== "object" || p === null || Array.isArray(p)) {
    out.push("payload must be an object");
    return out;
  }
  for (const key of LEADER_KEYS) {
    if (!(key in p)) out.push(`payload missing ${key}`);
  }
  for (const key of Object.keys(p)) {
    if (!LEADER_KEYS.includes(key)) out.push(`payload has extra key ${key}`);
  }
  if ("schema" in p && p["schema"] !== "tims/leader/1") {
    out.push("payload.schema must be tims/leader/1");
  }
  if ("position_mm" in p) {
    const pos = p["position_mm"];
    const ok =
      Array.isArray(pos) &&
      pos.length === 3 &&
      pos.every((v) => typeof v === "number" && Number.isFinite(v));
    if (!ok) out.push("payload.position_mm must be 3 finite numbers");
  }
  if ("stylus_pressed" in p && typeof p["stylus_pressed"] !== "boolean") {
    out.push("payload.stylus_pressed must be a boolean");
  }
  if ("pedal_engaged" in p && typeof p["pedal_engaged"] !== "boolean") {
    out.push("payload.pedal_engaged must be a boolean");
  }
  return out;
}
