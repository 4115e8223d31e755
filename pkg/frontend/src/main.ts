import { parseServerMessage, SCHEMA_VERSION, type HelloMsg, type StateMsg } from "./types.js";
import { BridgeClient, GoalSender, type ConnectionStatus } from "./net.js";
import { fitBounds, fitChain, screenToWorld, type Viewport } from "./viewport.js";
import { drawScene, Trail } from "./render.js";
import { updateHud, type HudElements } from "./hud.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const errorEl = document.getElementById("server-error")!;
const hud: HudElements = {
  poseError: document.getElementById("pose-error")!,
  latency: document.getElementById("latency")!,
  collision: document.getElementById("collision")!,
  bars: document.getElementById("cost-bars")!,
};

let hello: HelloMsg | null = null;
let lastState: StateMsg | null = null;
let vp: Viewport | null = null;
const trail = new Trail();
let errorTimer: ReturnType<typeof setTimeout> | null = null;

function refit() {
  if (!hello) return;
  const { bounds_min, bounds_max } = hello.world;
  vp =
    bounds_min && bounds_max && bounds_min.length >= 2
      ? fitBounds(bounds_min, bounds_max, canvas.width, canvas.height)
      : fitChain(hello.chain, canvas.width, canvas.height);
}

function draw() {
  if (hello && lastState && vp) drawScene(ctx, vp, hello, lastState, trail);
}

function resize() {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.max(1, Math.round(canvas.clientWidth * dpr));
  canvas.height = Math.max(1, Math.round(canvas.clientHeight * dpr));
  refit();
  draw(); // repaint the persisted frame at the new size
}

function flashError(message: string) {
  errorEl.textContent = message;
  if (errorTimer !== null) clearTimeout(errorTimer);
  errorTimer = setTimeout(() => {
    errorEl.textContent = "";
  }, 4000);
}

function onText(text: string) {
  const msg = parseServerMessage(text);
  if (msg === null) {
    console.warn("skipping malformed frame:", text.slice(0, 200));
    return;
  }
  if (msg.type === "error") {
    console.warn("server rejected a message:", msg.message);
    flashError(msg.message);
    return;
  }
  if (msg.type === "hello") {
    hello = msg;
    trail.clear();
    refit();
    return;
  }
  lastState = msg;
  trail.push(msg.ee);
  draw();
  updateHud(hud, msg);
}

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new BridgeClient(wsUrl, {
  onText,
  onStatus(status: ConnectionStatus) {
    statusEl.textContent = status;
    statusEl.dataset.state = status;
  },
  onOpen() {
    goals.onConnected();
  },
});
const goals = new GoalSender(
  (msg) => client.send(msg),
  () => client.connected,
);

function offerGoalFromPointer(ev: PointerEvent) {
  if (!vp) return;
  const rect = canvas.getBoundingClientRect();
  const sx = ((ev.clientX - rect.left) * canvas.width) / rect.width;
  const sy = ((ev.clientY - rect.top) * canvas.height) / rect.height;
  const [wx, wy] = screenToWorld(vp, sx, sy);
  if (hello && hello.chain.task_dim === 3) {
    // top-down view: dragging moves x/y, the goal keeps its height
    const z = lastState?.goal[2] ?? hello.goal[2] ?? 0;
    goals.offer([wx, wy, z]);
  } else {
    goals.offer([wx, wy]);
  }
}

let dragging = false;
canvas.addEventListener("pointerdown", (ev) => {
  dragging = true;
  canvas.setPointerCapture(ev.pointerId);
  offerGoalFromPointer(ev);
});
canvas.addEventListener("pointermove", (ev) => {
  if (dragging) offerGoalFromPointer(ev);
});
canvas.addEventListener("pointerup", () => {
  dragging = false;
});
canvas.addEventListener("pointercancel", () => {
  dragging = false;
});

document.getElementById("pause")!.addEventListener("click", () => {
  client.send({ v: SCHEMA_VERSION, type: "pause" });
});
document.getElementById("resume")!.addEventListener("click", () => {
  client.send({ v: SCHEMA_VERSION, type: "resume" });
});
document.getElementById("reset")!.addEventListener("click", () => {
  client.send({ v: SCHEMA_VERSION, type: "reset" });
  trail.clear();
});

window.addEventListener("resize", resize);
resize();
client.connect();
