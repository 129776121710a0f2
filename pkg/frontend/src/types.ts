// Wire types for the bus traffic the console reads and writes.
// Shapes mirror the JSON Schema documents shipped in ../schemas/.

export type Vec3 = [number, number, number];

export interface Envelope {
  device_id: string;
  seq: number;
  timestamp_ms: number;
  payload: Record<string, unknown>;
}

export interface LeaderPayload {
  schema: "tims/leader/1";
  position_mm: Vec3;
  stylus_pressed: boolean;
  pedal_engaged: boolean;
}

export interface FollowerPayload {
  schema: "tims/follower/1";
  position_um: Vec3;
  engaged: boolean;
  insertion_latched: boolean;
}

export interface HapticPayload {
  schema: "tims/haptic/1";
  force_n: Vec3;
  nearest_index: number;
  deviation_um: number;
  fixture_violated: boolean;
}

export interface ContactInfo {
  touching: boolean;
  penetration_um: number;
  contact_point_um: Vec3;
}

export interface ScenePayload {
  schema: "tims/scene/1";
  tool_tip_um: Vec3;
  contact: ContactInfo;
  clot_states: boolean[];
  frame_seq: number;
}

export interface WtdPayload {
  schema: "tims/wtd/1";
  actuators: number[];
  commanded: boolean;
}

export interface PedalPayload {
  schema: "tims/pedal/1";
  engaged: boolean;
}

export interface LayoutClot {
  position_um: Vec3;
  radius_um: number;
}

export interface LayoutPayload {
  schema: "tims/layout/1";
  phantom: {
    center_um: Vec3;
    radius_um: number;
    vessel_um: Vec3[];
    clots: LayoutClot[];
  };
  guide: {
    points_um: Vec3[];
    ci_halfwidth_um: Vec3[];
  };
  deadzone_um: number;
}

export interface TrialEventPayload {
  schema: "tims/trial/1";
  event: string;
  [key: string]: unknown;
}

/** Devices the render loop subscribes to. The console never simulates any
    of them locally; everything on screen comes out of these envelopes. */
export const RENDER_DEVICES = [
  "layout",
  "scene",
  "haptic",
  "wtd",
  "follower",
  "pedal",
  "trial",
] as const;
