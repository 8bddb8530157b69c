// Browser entry point: wires the session machine, the calibration
// panel, the avatar source, and the two wireframe canvases to the DOM.
// All logic lives in the sibling modules; this file only translates
// between DOM events and module calls, on the single UI thread.

import {
  CalibrationState,
  RecordedFrame,
  applyCalibration,
  calibrate,
  loadCalibration,
  parseRecording,
  saveCalibration,
} from "./calibration.js";
import { eulerToQuaternion, quaternionToEuler } from "./geometry.js";
import { DEFAULT_VIEW, drawWireframe } from "./render2d.js";
import { Session, SessionStatus } from "./session.js";
import { MotionKind, MOTIONS, gridTessellation, motionFrame } from "./synth.js";

const FPS_CAP = 30;
const TRIANGLES = gridTessellation();

interface Controls {
  wsUrl: HTMLInputElement;
  createBtn: HTMLButtonElement;
  roomInput: HTMLInputElement;
  joinBtn: HTMLButtonElement;
  hangUpBtn: HTMLButtonElement;
  roomIdOut: HTMLElement;
  statusOut: HTMLElement;
  bannerOut: HTMLElement;
  streamBtn: HTMLButtonElement;
  motionSelect: HTMLSelectElement;
  recordingInput: HTMLInputElement;
  sliders: Record<SliderKey, HTMLInputElement>;
  sliderOuts: Record<SliderKey, HTMLElement>;
  autoBtn: HTMLButtonElement;
  saveBtn: HTMLButtonElement;
  loadInput: HTMLInputElement;
  localCanvas: HTMLCanvasElement;
  remoteCanvas: HTMLCanvasElement;
  rateOut: HTMLElement;
  sentOut: HTMLElement;
  receivedOut: HTMLElement;
  droppedOut: HTMLElement;
}

type SliderKey = "tx" | "ty" | "tz" | "rx" | "ry" | "rz" | "scale";

const SLIDER_SPEC: Array<[SliderKey, string, number, number, number, number]> = [
  // key, label, min, max, step, initial
  ["tx", "translate x", -2, 2, 0.001, 0],
  ["ty", "translate y", -2, 2, 0.001, 0],
  ["tz", "translate z", -2, 2, 0.001, 0],
  ["rx", "rotate x (deg)", -180, 180, 0.1, 0],
  ["ry", "rotate y (deg)", -180, 180, 0.1, 0],
  ["rz", "rotate z (deg)", -180, 180, 0.1, 0],
  ["scale", "scale", 0.25, 4, 0.01, 1],
];

class App {
  private readonly c: Controls;
  private session: Session | null = null;
  private socket: WebSocket | null = null;
  private streaming = false;
  private recording: RecordedFrame[] | null = null;
  private startMs = 0;
  private lastDrawnRemote = -1;
  private latestRaw: Float64Array | null = null;

  constructor(controls: Controls) {
    this.c = controls;
    this.wire();
    this.applyStatus("idle");
    const loop = () => {
      this.drawRemote();
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  // ----- calibration panel: the sliders are the source of truth -----

  private sliderState(): CalibrationState {
    const v = (key: SliderKey) => Number(this.c.sliders[key].value);
    const rad = (deg: number) => (deg * Math.PI) / 180;
    return {
      translation: { x: v("tx"), y: v("ty"), z: v("tz") },
      rotation: eulerToQuaternion({ phi: rad(v("rx")), theta: rad(v("ry")), psi: rad(v("rz")) }),
      scale: v("scale"),
    };
  }

  private setSliders(state: CalibrationState): void {
    const angles = quaternionToEuler(state.rotation);
    const deg = (rad: number) => (rad * 180) / Math.PI;
    const assign: Record<SliderKey, number> = {
      tx: state.translation.x,
      ty: state.translation.y,
      tz: state.translation.z,
      rx: deg(angles.phi),
      ry: deg(angles.theta),
      rz: deg(angles.psi),
      scale: state.scale,
    };
    for (const key of Object.keys(assign) as SliderKey[]) {
      this.c.sliders[key].value = String(assign[key]);
      this.refreshSliderOut(key);
    }
  }

  private refreshSliderOut(key: SliderKey): void {
    this.c.sliderOuts[key].textContent = Number(this.c.sliders[key].value).toFixed(3);
  }

  // ----- avatar source -----

  private currentRaw(nowMs: number): Float64Array {
    if (this.recording && this.recording.length > 0) {
      const frames = this.recording;
      const span = frames[frames.length - 1].timestampMs + 1000 / FPS_CAP;
      const t = span > 0 ? (nowMs - this.startMs) % span : 0;
      // last frame at or before t; frames are in timestamp order
      let pick = frames[0];
      for (const frame of frames) {
        if (frame.timestampMs <= t) pick = frame;
        else break;
      }
      return pick.coords;
    }
    const kind = this.c.motionSelect.value as MotionKind;
    return motionFrame(kind, (nowMs - this.startMs) / 1000);
  }

  // ----- streaming and drawing -----

  private tick(): void {
    const session = this.session;
    const nowMs = Date.now();
    const raw = this.currentRaw(nowMs);
    this.latestRaw = raw;
    const shown = applyCalibration(this.sliderState(), raw);
    const ctx = this.c.localCanvas.getContext("2d");
    if (ctx) drawWireframe(ctx, shown, TRIANGLES);
    const canSend = session?.canSend() ?? false;
    this.c.streamBtn.disabled = !canSend;
    if (!canSend && this.streaming) this.setStreaming(false);
    if (this.streaming && session && canSend) {
      session.sendFrame(shown);
    }
  }

  private drawRemote(): void {
    const session = this.session;
    if (!session || !session.remoteFrame) return;
    if (session.remoteFrame.sequence === this.lastDrawnRemote) return;
    this.lastDrawnRemote = session.remoteFrame.sequence;
    const ctx = this.c.remoteCanvas.getContext("2d");
    if (ctx) drawWireframe(ctx, session.remoteFrame.coords, TRIANGLES, DEFAULT_VIEW, "#345a8a");
  }

  private refreshStats(): void {
    if (!this.session) return;
    const stats = this.session.stats();
    this.c.rateOut.textContent =
      stats.inboundRate === null ? "n/a" : `${(stats.inboundRate / 1000).toFixed(1)} KB/s`;
    this.c.sentOut.textContent = String(stats.framesSent);
    this.c.receivedOut.textContent = String(stats.framesReceived);
    this.c.droppedOut.textContent = String(stats.framesDropped);
  }

  // ----- session plumbing -----

  private connect(onOpen: (session: Session) => void): void {
    let url = this.c.wsUrl.value.trim();
    if (!url) url = `ws://${location.host}/ws`;
    let socket: WebSocket;
    try {
      socket = new WebSocket(url);
    } catch (exc) {
      this.banner(`cannot open ${url}: ${exc}`);
      return;
    }
    const session = new Session(socket, {
      onStatus: (status) => this.applyStatus(status),
      onRoomId: (roomId) => {
        this.c.roomIdOut.textContent = roomId;
      },
      onBanner: (text) => this.banner(text),
      onStats: () => this.refreshStats(),
    });
    socket.onopen = () => onOpen(session);
    socket.onmessage = (event) => {
      if (typeof event.data === "string") session.handleText(event.data);
    };
    socket.onclose = () => {
      if (session.status !== "closed" && session.status !== "failed") {
        this.banner("signaling connection closed");
        this.applyStatus("closed");
      }
    };
    socket.onerror = () => this.banner(`websocket error on ${url}`);
    this.socket = socket;
    this.session = session;
  }

  private applyStatus(status: SessionStatus): void {
    this.c.statusOut.textContent = status;
    const canSend = this.session?.canSend() ?? false;
    const idle = status === "idle" || status === "closed" || status === "failed";
    this.c.createBtn.disabled = !idle;
    this.c.joinBtn.disabled = !idle;
    this.c.streamBtn.disabled = !canSend;
    this.c.hangUpBtn.disabled = idle;
    if (!canSend && this.streaming) this.setStreaming(false);
    if (status === "closed" || status === "failed") {
      this.socket?.close();
    }
  }

  // The tick interval runs from startup so the local preview always
  // animates; this flag only gates whether ticks also send.
  private setStreaming(on: boolean): void {
    this.streaming = on;
    this.c.streamBtn.textContent = on ? "stop streaming" : "start streaming";
  }

  private banner(text: string): void {
    const line = document.createElement("div");
    line.className = "banner";
    line.textContent = text;
    this.c.bannerOut.prepend(line);
    while (this.c.bannerOut.childElementCount > 4) {
      this.c.bannerOut.lastElementChild?.remove();
    }
  }

  // ----- wiring -----

  private wire(): void {
    const c = this.c;
    c.createBtn.onclick = () => {
      this.reset();
      this.connect((session) => session.createRoom());
    };
    c.joinBtn.onclick = () => {
      const roomId = c.roomInput.value.trim();
      if (!roomId) {
        this.banner("enter the room id shown on the other tab");
        return;
      }
      this.reset();
      this.connect((session) => session.joinRoom(roomId));
    };
    c.hangUpBtn.onclick = () => {
      this.session?.hangUp();
    };
    c.streamBtn.onclick = () => this.setStreaming(!this.streaming);

    for (const [key] of SLIDER_SPEC) {
      c.sliders[key].oninput = () => this.refreshSliderOut(key);
    }
    c.autoBtn.onclick = () => {
      const raw = this.latestRaw ?? this.currentRaw(Date.now());
      try {
        this.setSliders(calibrate(raw));
        this.banner("auto-calibrated from the current frame");
      } catch (exc) {
        this.banner(`auto-calibrate failed: ${exc}`);
      }
    };
    c.saveBtn.onclick = () => {
      const text = saveCalibration(this.sliderState());
      const blob = new Blob([text], { type: "text/plain" });
      const anchor = document.createElement("a");
      anchor.href = URL.createObjectURL(blob);
      anchor.download = "calibration.profile";
      anchor.click();
      URL.revokeObjectURL(anchor.href);
    };
    c.loadInput.onchange = () => {
      const file = c.loadInput.files?.[0];
      if (!file) return;
      file.text().then(
        (text) => {
          try {
            this.setSliders(loadCalibration(text));
            this.banner(`loaded calibration from ${file.name}`);
          } catch (exc) {
            this.banner(`rejected profile: ${exc}`);
          }
        },
        (exc) => this.banner(`cannot read ${file.name}: ${exc}`),
      );
    };
    c.recordingInput.onchange = () => {
      const file = c.recordingInput.files?.[0];
      if (!file) {
        this.recording = null;
        return;
      }
      file.text().then(
        (text) => {
          try {
            this.recording = parseRecording(text);
            this.banner(`playing recording ${file.name} (${this.recording.length} frames)`);
          } catch (exc) {
            this.recording = null;
            this.banner(`rejected recording: ${exc}`);
          }
        },
        (exc) => this.banner(`cannot read ${file.name}: ${exc}`),
      );
    };

    // local preview runs even before any room exists
    this.startMs = Date.now();
    setInterval(() => this.tick(), 1000 / FPS_CAP);
  }

  private reset(): void {
    this.socket?.close();
    this.socket = null;
    this.session = null;
    this.setStreaming(false);
    this.lastDrawnRemote = -1;
    this.c.roomIdOut.textContent = "";
  }
}

// ---------------------------------------------------------------------------
// DOM construction

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "text") node.textContent = value;
    else node.setAttribute(key, value);
  }
  parent?.appendChild(node);
  return node;
}

function buildUi(root: HTMLElement): Controls {
  const top = el("div", { class: "panel" }, root);
  el("h1", { text: "meshwire" }, top);

  const roomRow = el("div", { class: "row" }, top);
  const wsUrl = el("input", { type: "text", size: "32", placeholder: `ws://${location.host}/ws` }, roomRow);
  const createBtn = el("button", { text: "create room" }, roomRow);
  const roomInput = el("input", { type: "text", size: "12", placeholder: "room id" }, roomRow);
  const joinBtn = el("button", { text: "join room" }, roomRow);
  const hangUpBtn = el("button", { text: "hang up" }, roomRow);

  const statusRow = el("div", { class: "row" }, top);
  el("span", { text: "status:" }, statusRow);
  const statusOut = el("b", {}, statusRow);
  el("span", { text: "room:" }, statusRow);
  const roomIdOut = el("b", { class: "room-id" }, statusRow);
  const bannerOut = el("div", { class: "banners" }, top);

  const stage = el("div", { class: "stage" }, root);
  const localBox = el("div", {}, stage);
  el("div", { text: "you", class: "caption" }, localBox);
  const localCanvas = el("canvas", { width: "512", height: "512" }, localBox);
  const remoteBox = el("div", {}, stage);
  el("div", { text: "peer", class: "caption" }, remoteBox);
  const remoteCanvas = el("canvas", { width: "512", height: "512" }, remoteBox);

  const streamRow = el("div", { class: "row" }, root);
  const streamBtn = el("button", { text: "start streaming", disabled: "" }, streamRow);
  el("span", { text: "avatar:" }, streamRow);
  const motionSelect = el("select", {}, streamRow);
  for (const kind of MOTIONS) el("option", { value: kind, text: kind }, motionSelect);
  motionSelect.value = "orbit";
  el("span", { text: "or recording:" }, streamRow);
  const recordingInput = el("input", { type: "file", accept: ".rec,.txt" }, streamRow);

  const statsRow = el("div", { class: "row stats" }, root);
  el("span", { text: "inbound:" }, statsRow);
  const rateOut = el("b", { text: "n/a" }, statsRow);
  el("span", { text: "sent:" }, statsRow);
  const sentOut = el("b", { text: "0" }, statsRow);
  el("span", { text: "received:" }, statsRow);
  const receivedOut = el("b", { text: "0" }, statsRow);
  el("span", { text: "dropped:" }, statsRow);
  const droppedOut = el("b", { text: "0" }, statsRow);

  const calPanel = el("div", { class: "panel" }, root);
  el("h2", { text: "calibration" }, calPanel);
  const sliders = {} as Record<SliderKey, HTMLInputElement>;
  const sliderOuts = {} as Record<SliderKey, HTMLElement>;
  for (const [key, label, min, max, step, initial] of SLIDER_SPEC) {
    const row = el("div", { class: "row slider" }, calPanel);
    el("label", { text: label }, row);
    sliders[key] = el(
      "input",
      { type: "range", min: String(min), max: String(max), step: String(step), value: String(initial) },
      row,
    );
    sliderOuts[key] = el("span", { text: initial.toFixed(3) }, row);
  }
  const calRow = el("div", { class: "row" }, calPanel);
  const autoBtn = el("button", { text: "auto-calibrate" }, calRow);
  const saveBtn = el("button", { text: "save profile" }, calRow);
  el("span", { text: "load:" }, calRow);
  const loadInput = el("input", { type: "file", accept: ".profile,.txt" }, calRow);

  return {
    wsUrl,
    createBtn,
    roomInput,
    joinBtn,
    hangUpBtn,
    roomIdOut,
    statusOut,
    bannerOut,
    streamBtn,
    motionSelect,
    recordingInput,
    sliders,
    sliderOuts,
    autoBtn,
    saveBtn,
    loadInput,
    localCanvas,
    remoteCanvas,
    rateOut,
    sentOut,
    receivedOut,
    droppedOut,
  };
}

function main(): void {
  const root = document.getElementById("app");
  if (!root) return;
  new App(buildUi(root));
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", main);
  } else {
    main();
  }
}
