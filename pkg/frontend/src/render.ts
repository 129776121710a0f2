import type {
  FollowerPayload,
  HapticPayload,
  LayoutPayload,
  ScenePayload,
  Vec3,
  WtdPayload,
} from "./types";

export type View = "top" | "side";

/** Orthographic projections: top view is the x-y plane, side view is x-z. */
export function project(view: View, p: Vec3): [number, number] {
  return view === "top" ? [p[0], p[1]] : [p[0], p[2]];
}

/**
 * World (micrometres) to canvas pixels. Screen y grows downward, so the
 * second world axis is flipped to keep "up" up.
 */
export class ViewTransform {
  constructor(
    readonly scale: number,
    readonly ox: number,
    readonly oy: number,
  ) {}

  /** Fit a centered square of half-extent extentUm into a w x h canvas. */
  static fit(extentUm: number, w: number, h: number, marginPx = 18): ViewTransform {
    const usable = Math.max(10, Math.min(w, h) - 2 * marginPx);
    return new ViewTransform(usable / (2 * extentUm), w / 2, h / 2);
  }

  toPx(wx: number, wy: number): [number, number] {
    return [this.ox + wx * this.scale, this.oy - wy * this.scale];
  }

  lenPx(umLen: number): number {
    return umLen * this.scale;
  }
}

/**
 * Force arrow geometry: length is proportional to the full 3-D magnitude,
 * direction is the in-view projection. Zero force draws nothing (null).
 * A force pointing straight out of the view plane keeps its length but has
 * no direction; dx/dy come back 0 and the caller renders a dot.
 */
export function forceArrow(
  force: Vec3,
  view: View,
  pxPerN: number,
): { dx: number; dy: number; lenPx: number } | null {
  const mag = Math.hypot(force[0], force[1], force[2]);
  if (mag === 0) return null;
  const lenPx = mag * pxPerN;
  const [fx, fy] = project(view, force);
  const flat = Math.hypot(fx, fy);
  if (flat === 0) return { dx: 0, dy: 0, lenPx };
  // screen y is flipped relative to world y/z
  return { dx: (fx / flat) * lenPx, dy: (-fy / flat) * lenPx, lenPx };
}

/** The slice of CanvasRenderingContext2D the renderer uses; tests stub it. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

/** Everything a frame is drawn from; filled out of the mailbox each frame. */
export interface RenderModel {
  layout?: LayoutPayload;
  scene?: ScenePayload;
  haptic?: HapticPayload;
  wtd?: WtdPayload;
  follower?: FollowerPayload;
}

const COLORS = {
  background: "#10141a",
  phantom: "#3b4a5f",
  vessel: "#c45660",
  clot: "#8e2f3c",
  clotCleared: "#3f7d4e",
  guide: "#e8b74a",
  band: "#e8b74a",
  deadzone: "#2e6f6a",
  tip: "#f2f4f8",
  tipViolated: "#ff5151",
  force: "#6fb7ff",
  text: "#9aa7b8",
};

function polyline(ctx: Ctx2D, t: ViewTransform, view: View, pts: Vec3[]): void {
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [wx, wy] = project(view, p);
    const [x, y] = t.toPx(wx, wy);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function circle(ctx: Ctx2D, x: number, y: number, r: number, fill: boolean): void {
  ctx.beginPath();
  ctx.arc(x, y, Math.max(r, 0.5), 0, Math.PI * 2);
  if (fill) ctx.fill();
  else ctx.stroke();
}

/** Half-extent that keeps the whole phantom (plus slack) in frame. */
export function viewExtentUm(layout?: LayoutPayload): number {
  if (!layout) return 25000;
  return layout.phantom.radius_um * 1.25;
}

/**
 * Draw one projection of the work site. Pure consumer of received payloads:
 * nothing here integrates motion or physics, it only plots the latest state.
 */
export function drawScene(
  ctx: Ctx2D,
  view: View,
  model: RenderModel,
  w: number,
  h: number,
): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillStyle = COLORS.text;
  ctx.fillText(view === "top" ? "top (x-y)" : "side (x-z)", 8, 16);

  const t = ViewTransform.fit(viewExtentUm(model.layout), w, h);
  const layout = model.layout;
  if (!layout) {
    ctx.fillText("waiting for layout...", 8, 32);
    return;
  }

  // phantom boundary
  const [cx, cy] = t.toPx(...project(view, layout.phantom.center_um));
  ctx.strokeStyle = COLORS.phantom;
  ctx.lineWidth = 1.5;
  circle(ctx, cx, cy, t.lenPx(layout.phantom.radius_um), false);

  // dead zone: a tube of radius deadzone_um around the guide path, drawn as
  // a fat translucent stroke under everything else
  const guidePts = layout.guide.points_um;
  if (guidePts.length >= 2) {
    ctx.globalAlpha = 0.35;
    ctx.strokeStyle = COLORS.deadzone;
    ctx.lineWidth = Math.max(1, 2 * t.lenPx(layout.deadzone_um));
    polyline(ctx, t, view, guidePts);
    ctx.globalAlpha = 1;
  }

  // confidence band: per-segment stroke width from the in-view half-widths
  const ci = layout.guide.ci_halfwidth_um;
  if (guidePts.length >= 2 && ci.length === guidePts.length) {
    ctx.globalAlpha = 0.25;
    ctx.strokeStyle = COLORS.band;
    for (let i = 0; i + 1 < guidePts.length; i++) {
      const a = guidePts[i]!;
      const b = guidePts[i + 1]!;
      const [hx, hy] = project(view, ci[i]!);
      ctx.lineWidth = Math.max(1, t.lenPx(Math.max(Math.abs(hx), Math.abs(hy)) * 2));
      ctx.beginPath();
      const [ax, ay] = t.toPx(...project(view, a));
      const [bx, by] = t.toPx(...project(view, b));
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }

  // guide centerline
  if (guidePts.length >= 2) {
    ctx.strokeStyle = COLORS.guide;
    ctx.lineWidth = 1.5;
    polyline(ctx, t, view, guidePts);
  }

  // vessel
  if (layout.phantom.vessel_um.length >= 2) {
    ctx.strokeStyle = COLORS.vessel;
    ctx.lineWidth = 2.5;
    polyline(ctx, t, view, layout.phantom.vessel_um);
  }

  // clots; scene.clot_states marks the cleared ones
  const states = model.scene?.clot_states ?? [];
  layout.phantom.clots.forEach((clot, i) => {
    const cleared = states[i] === true;
    ctx.fillStyle = cleared ? COLORS.clotCleared : COLORS.clot;
    const [x, y] = t.toPx(...project(view, clot.position_um));
    circle(ctx, x, y, Math.max(2, t.lenPx(clot.radius_um)), true);
  });

  // tool tip crosshair, red when the guidance fixture is violated
  const tip = model.scene?.tool_tip_um ?? model.follower?.position_um;
  if (tip) {
    const violated = model.haptic?.fixture_violated === true;
    ctx.strokeStyle = violated ? COLORS.tipViolated : COLORS.tip;
    ctx.lineWidth = 1.5;
    const [x, y] = t.toPx(...project(view, tip));
    ctx.beginPath();
    ctx.moveTo(x - 7, y);
    ctx.lineTo(x + 7, y);
    ctx.moveTo(x, y - 7);
    ctx.lineTo(x, y + 7);
    ctx.stroke();
    if (model.scene?.contact.touching) {
      ctx.strokeStyle = COLORS.tipViolated;
      circle(ctx, x, y, 10, false);
    }

    // force arrow anchored at the tip; displayed, not felt
    const force = model.haptic?.force_n;
    if (force) {
      const arrow = forceArrow(force, view, 24);
      if (arrow) {
        ctx.strokeStyle = COLORS.force;
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(x, y);
        ctx.lineTo(x + arrow.dx, y + arrow.dy);
        ctx.stroke();
        if (arrow.dx === 0 && arrow.dy === 0) {
          ctx.fillStyle = COLORS.force;
          circle(ctx, x, y, 3, true);
        }
      }
    }
  }
}

const GRID = 4;

/** 4x4 tactile array; cell brightness tracks the actuator level in [0, 1]. */
export function drawTactile(ctx: Ctx2D, wtd: WtdPayload | undefined, w: number, h: number): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, w, h);
  const pad = 8;
  const cell = Math.min((w - 2 * pad) / GRID, (h - 2 * pad) / GRID);
  for (let r = 0; r < GRID; r++) {
    for (let c = 0; c < GRID; c++) {
      const level = wtd ? Math.min(1, Math.max(0, wtd.actuators[r * GRID + c] ?? 0)) : 0;
      const x = pad + c * cell;
      const y = pad + r * cell;
      ctx.fillStyle = tactileFill(level);
      ctx.fillRect(x + 1, y + 1, cell - 2, cell - 2);
      ctx.strokeStyle = COLORS.phantom;
      ctx.lineWidth = 1;
      ctx.strokeRect(x + 1, y + 1, cell - 2, cell - 2);
    }
  }
  if (wtd?.commanded) {
    ctx.fillStyle = COLORS.guide;
    ctx.fillText("pulse", pad, h - 4);
  }
}

/** Inflation level to fill color, linear in brightness. */
export function tactileFill(level: number): string {
  const clamped = Math.min(1, Math.max(0, level));
  const v = Math.round(30 + clamped * 200);
  return `rgb(${Math.round(v * 0.45)}, ${Math.round(v * 0.75)}, ${v})`;
}

/**
 * Frame pacing monitor. tick() once per rendered frame; any gap above
 * dropGapMs counts as dropped frames and records a warning. fps is the
 * frame count over the trailing second.
 */
export class FrameMeter {
  readonly dropGapMs: number;
  fps = 0;
  droppedFrames = 0;
  warnings: string[] = [];
  private frames: number[] = [];
  private last: number | null = null;

  constructor(dropGapMs = 40) {
    this.dropGapMs = dropGapMs;
  }

  tick(nowMs: number): void {
    if (this.last !== null) {
      const gap = nowMs - this.last;
      if (gap > this.dropGapMs) {
        this.droppedFrames += 1;
        if (this.warnings.length < 50) {
          this.warnings.push(`dropped frame: ${gap.toFixed(1)} ms gap at ${nowMs.toFixed(0)}`);
        }
      }
    }
    this.last = nowMs;
    this.frames.push(nowMs);
    const cutoff = nowMs - 1000;
    while (this.frames.length > 0 && this.frames[0]! <= cutoff) this.frames.shift();
    this.fps = this.frames.length;
  }
}
