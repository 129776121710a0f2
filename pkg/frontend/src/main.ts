// Entry point: wires the bus client, input mapper, and render loop to the
// static page. Everything on screen is re-derived each frame from the latest
// received envelopes; the console runs no physics of its own.

import { LeaderInput } from "./input";
import { Mailbox } from "./mailbox";
import { drawScene, drawTactile, FrameMeter, type Ctx2D, type RenderModel } from "./render";
import { SessionApi } from "./session";
import { BusClient } from "./wsclient";
import { leaderEnvelopeViolations } from "./validate";
import {
  RENDER_DEVICES,
  type FollowerPayload,
  type HapticPayload,
  type LayoutPayload,
  type ScenePayload,
  type TrialEventPayload,
  type WtdPayload,
} from "./types";

const STALE_LIMIT_MS = 500;
const BADGE_DEVICES = ["scene", "haptic", "wtd", "follower"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvasCtx(canvas: HTMLCanvasElement): Ctx2D {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  return ctx as unknown as Ctx2D;
}

function main(): void {
  const topCanvas = el<HTMLCanvasElement>("view-top");
  const sideCanvas = el<HTMLCanvasElement>("view-side");
  const tactileCanvas = el<HTMLCanvasElement>("view-tactile");
  const banner = el<HTMLDivElement>("banner");
  const statusText = el<HTMLSpanElement>("conn-status");
  const badges = el<HTMLDivElement>("badges");
  const readouts = el<HTMLDivElement>("readouts");
  const metricsPre = el<HTMLPreElement>("metrics");
  const startBtn = el<HTMLButtonElement>("btn-start");
  const stopBtn = el<HTMLButtonElement>("btn-stop");
  const metricsBtn = el<HTMLButtonElement>("btn-metrics");
  const settingSel = el<HTMLSelectElement>("sel-setting");
  const seedInput = el<HTMLInputElement>("inp-seed");

  const mailbox = new Mailbox();
  const meter = new FrameMeter();
  const input = new LeaderInput();
  const api = new SessionApi();
  let warned = 0;

  const bus = new BusClient(`ws://${location.host}/bus`, {
    devices: RENDER_DEVICES,
    onEnvelope: (env) => mailbox.put(env, performance.now()),
    onStatus: (status) => {
      const open = status === "open";
      input.setConnected(open);
      statusText.textContent = status;
      statusText.className = open ? "ok" : "bad";
      banner.style.display = open ? "none" : "block";
      banner.textContent = open ? "" : `bus ${status}: input suppressed`;
    },
  });
  bus.connect();

  // ---- leader input wiring (pointer = x-y, shift/wheel = depth) ----
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  for (const canvas of [topCanvas, sideCanvas]) {
    canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      lastX = ev.clientX;
      lastY = ev.clientY;
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      const depth = ev.shiftKey || canvas === sideCanvas;
      input.drag(ev.clientX - lastX, ev.clientY - lastY, depth);
      lastX = ev.clientX;
      lastY = ev.clientY;
    });
    canvas.addEventListener("pointerup", () => {
      dragging = false;
    });
    canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      input.wheel(Math.sign(ev.deltaY));
    });
  }
  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (ev.code === "Space") {
      ev.preventDefault();
      input.setPedal(true);
    } else if (ev.key === "i") {
      input.tapStylus();
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.code === "Space") input.setPedal(false);
  });

  // publish pump: polls above the rate cap; LeaderInput enforces <= 125 Hz
  setInterval(() => {
    const env = input.sample(performance.now());
    if (!env) return;
    const violations = leaderEnvelopeViolations(env);
    if (violations.length > 0) {
      console.warn("leader envelope rejected locally:", violations.join("; "));
      return;
    }
    bus.publish(env);
  }, 4);

  // ---- session controls ----
  startBtn.addEventListener("click", () => {
    void api
      .start({ setting: settingSel.value, seed: Number(seedInput.value) || 0 })
      .then((res) => {
        metricsPre.textContent = JSON.stringify(res.body, null, 2);
      });
  });
  stopBtn.addEventListener("click", () => {
    void api.stop().then((res) => {
      metricsPre.textContent = JSON.stringify(res.body, null, 2);
    });
  });
  metricsBtn.addEventListener("click", () => {
    void api.metrics().then((res) => {
      metricsPre.textContent = JSON.stringify(res.body, null, 2);
    });
  });

  // ---- render loop: latest-value semantics, one pass per animation frame ----
  const topCtx = canvasCtx(topCanvas);
  const sideCtx = canvasCtx(sideCanvas);
  const tactileCtx = canvasCtx(tactileCanvas);

  function frame(): void {
    const now = performance.now();
    meter.tick(now);

    const model: RenderModel = {
      layout: mailbox.payload<LayoutPayload>("layout"),
      scene: mailbox.payload<ScenePayload>("scene"),
      haptic: mailbox.payload<HapticPayload>("haptic"),
      wtd: mailbox.payload<WtdPayload>("wtd"),
      follower: mailbox.payload<FollowerPayload>("follower"),
    };
    drawScene(topCtx, "top", model, topCanvas.width, topCanvas.height);
    drawScene(sideCtx, "side", model, sideCanvas.width, sideCanvas.height);
    drawTactile(tactileCtx, model.wtd, tactileCanvas.width, tactileCanvas.height);

    const stale = new Set(mailbox.stale(now, STALE_LIMIT_MS));
    badges.innerHTML = "";
    for (const device of BADGE_DEVICES) {
      const span = document.createElement("span");
      const age = mailbox.ageMs(device, now);
      const isStale = stale.has(device) || age === undefined;
      span.className = `badge ${isStale ? "stale" : "fresh"}`;
      span.textContent =
        age === undefined ? `${device}: --` : isStale ? `${device}: STALE` : device;
      badges.appendChild(span);
    }

    const trial = mailbox.payload<TrialEventPayload>("trial");
    const haptic = model.haptic;
    const pos = input.positionMm();
    readouts.textContent = [
      `fps ${meter.fps}  dropped ${meter.droppedFrames}`,
      `trial ${trial ? trial["event"] : "--"}`,
      `deviation ${haptic ? haptic.deviation_um.toFixed(0) : "--"} um`,
      `force ${haptic ? Math.hypot(...haptic.force_n).toFixed(2) : "--"} N (displayed, not felt)`,
      `leader [${pos.map((v) => v.toFixed(2)).join(", ")}] mm  pedal ${input.pedalEngaged() ? "on" : "off"}`,
    ].join("\n");

    while (warned < meter.warnings.length) {
      console.warn(meter.warnings[warned]);
      warned += 1;
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
