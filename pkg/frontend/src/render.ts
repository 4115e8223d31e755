import type { HelloMsg, StateMsg } from "./types.js";
import { worldToScreen, type Viewport } from "./viewport.js";

// planar chains draw in their own plane; spatial chains drop z and draw top-down,
// which the point layouts already reflect (the bridge sends x, y first)

const COLORS = {
  background: "#14171c",
  bounds: "#2a2f38",
  obstacle: "#4a5568",
  obstacleEdge: "#5f6b7f",
  goal: "#f0b429",
  trail: "#3d8361",
  rollout: "#3b82f6",
  link: "#cbd5e1",
  joint: "#8b97a8",
  ee: "#f8fafc",
};

/** Ring of past end-effector positions, oldest dropped first. */
export class Trail {
  points: number[][] = [];

  constructor(private cap = 600) {}

  push(p: number[]): void {
    this.points.push(p);
    if (this.points.length > this.cap) this.points.shift();
  }

  clear(): void {
    this.points = [];
  }
}

function polyline(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  points: number[][],
): void {
  ctx.beginPath();
  points.forEach((p, i) => {
    const [sx, sy] = worldToScreen(vp, p[0], p[1]);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();
}

function drawWorld(ctx: CanvasRenderingContext2D, vp: Viewport, hello: HelloMsg): void {
  const { world } = hello;
  if (world.bounds_min && world.bounds_max) {
    const [x0, y0] = worldToScreen(vp, world.bounds_min[0], world.bounds_max[1]);
    const [x1, y1] = worldToScreen(vp, world.bounds_max[0], world.bounds_min[1]);
    ctx.strokeStyle = COLORS.bounds;
    ctx.lineWidth = 1;
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  }
  ctx.fillStyle = COLORS.obstacle;
  ctx.strokeStyle = COLORS.obstacleEdge;
  ctx.lineWidth = 1;
  for (const [cx, cy, , r] of world.spheres) {
    const [sx, sy] = worldToScreen(vp, cx, cy);
    ctx.beginPath();
    ctx.arc(sx, sy, r * vp.scale, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
  for (const box of world.boxes) {
    const [x0, y0] = worldToScreen(vp, box[0], box[4]);
    const [x1, y1] = worldToScreen(vp, box[3], box[1]);
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  }
}

function drawGoal(ctx: CanvasRenderingContext2D, vp: Viewport, goal: number[]): void {
  const [sx, sy] = worldToScreen(vp, goal[0], goal[1]);
  ctx.strokeStyle = COLORS.goal;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(sx, sy, 9, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(sx - 13, sy);
  ctx.lineTo(sx + 13, sy);
  ctx.moveTo(sx, sy - 13);
  ctx.lineTo(sx, sy + 13);
  ctx.stroke();
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  hello: HelloMsg,
  links: number[][],
): void {
  // stroke width per segment from that link's capsule radius
  const radiusByLink = new Map<number, number>();
  for (const cap of hello.chain.capsules) {
    if (!radiusByLink.has(cap.link)) radiusByLink.set(cap.link, cap.radius);
  }
  ctx.strokeStyle = COLORS.link;
  ctx.lineCap = "round";
  for (let i = 0; i + 1 < links.length; i++) {
    const r = radiusByLink.get(i) ?? 0;
    ctx.lineWidth = Math.max(3, 2 * r * vp.scale);
    polyline(ctx, vp, [links[i], links[i + 1]]);
  }
  ctx.fillStyle = COLORS.joint;
  for (const p of links) {
    const [sx, sy] = worldToScreen(vp, p[0], p[1]);
    ctx.beginPath();
    ctx.arc(sx, sy, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  hello: HelloMsg,
  state: StateMsg,
  trail: Trail,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vp.width, vp.height);

  drawWorld(ctx, vp, hello);

  if (trail.points.length > 1) {
    ctx.strokeStyle = COLORS.trail;
    ctx.lineWidth = 1.5;
    polyline(ctx, vp, trail.points);
  }

  ctx.strokeStyle = COLORS.rollout;
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.65;
  for (const path of state.top_rollouts) {
    if (path.length > 1) polyline(ctx, vp, path);
  }
  ctx.globalAlpha = 1.0;

  drawGoal(ctx, vp, state.goal);
  drawRobot(ctx, vp, hello, state.links);

  const [ex, ey] = worldToScreen(vp, state.ee[0], state.ee[1]);
  ctx.fillStyle = COLORS.ee;
  ctx.beginPath();
  ctx.arc(ex, ey, 5, 0, 2 * Math.PI);
  ctx.fill();
}
