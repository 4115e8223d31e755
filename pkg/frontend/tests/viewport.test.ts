import { describe, expect, it } from "vitest";
import {
  fitBounds,
  fitChain,
  screenToWorld,
  worldToScreen,
  type Viewport,
} from "../src/viewport.js";
import type { ChainInfo } from "../src/types.js";

// deterministic LCG so the 100-point sweep is reproducible
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

describe("viewport round trip", () => {
  it("screen -> world -> screen stays within 1 px over 100 random points", () => {
    const rand = lcg(42);
    for (let trial = 0; trial < 100; trial++) {
      const vp: Viewport = {
        scale: 20 + rand() * 480,
        cx: (rand() - 0.5) * 10,
        cy: (rand() - 0.5) * 10,
        width: 200 + Math.floor(rand() * 1800),
        height: 200 + Math.floor(rand() * 1200),
      };
      const sx = rand() * vp.width;
      const sy = rand() * vp.height;
      const [wx, wy] = screenToWorld(vp, sx, sy);
      const [bx, by] = worldToScreen(vp, wx, wy);
      expect(Math.hypot(bx - sx, by - sy)).toBeLessThan(1.0);
    }
  });

  it("world -> screen -> world is exact to float noise", () => {
    const vp: Viewport = { scale: 137.5, cx: 0.3, cy: -1.2, width: 900, height: 700 };
    const [sx, sy] = worldToScreen(vp, 1.75, -0.6);
    const [wx, wy] = screenToWorld(vp, sx, sy);
    expect(wx).toBeCloseTo(1.75, 10);
    expect(wy).toBeCloseTo(-0.6, 10);
  });

  it("canvas center of a symmetric viewport maps to the workspace origin", () => {
    const vp = fitBounds([-2, -2], [2, 2], 800, 600);
    const [wx, wy] = screenToWorld(vp, 400, 300);
    expect(wx).toBeCloseTo(0, 12);
    expect(wy).toBeCloseTo(0, 12);
    expect(worldToScreen(vp, 0, 0)).toEqual([400, 300]);
  });

  it("world y up means screen y down", () => {
    const vp: Viewport = { scale: 100, cx: 0, cy: 0, width: 400, height: 400 };
    const [, syHigh] = worldToScreen(vp, 0, 1);
    const [, syLow] = worldToScreen(vp, 0, -1);
    expect(syHigh).toBeLessThan(syLow);
  });
});

describe("fitBounds", () => {
  it("keeps the whole bounds rectangle inside the canvas margin", () => {
    const vp = fitBounds([-1, -3], [5, 1], 640, 480, 20);
    for (const [wx, wy] of [
      [-1, -3],
      [5, 1],
      [-1, 1],
      [5, -3],
    ]) {
      const [sx, sy] = worldToScreen(vp, wx, wy);
      expect(sx).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(sx).toBeLessThanOrEqual(640 - 20 + 1e-9);
      expect(sy).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(sy).toBeLessThanOrEqual(480 - 20 + 1e-9);
    }
  });

  it("survives degenerate bounds", () => {
    const vp = fitBounds([0.5, 0.5], [0.5, 0.5], 300, 300);
    expect(vp.scale).toBeGreaterThan(0);
    expect(Number.isFinite(vp.scale)).toBe(true);
  });
});

describe("fitChain fallback", () => {
  const chain: ChainInfo = {
    name: "planar2",
    dof: 2,
    task_dim: 2,
    capsules: [
      { link: 0, p0: [0, 0, 0], p1: [1.0, 0, 0], radius: 0.05 },
      { link: 1, p0: [0, 0, 0], p1: [0.8, 0, 0], radius: 0.05 },
    ],
  };

  it("frames the full reach around the origin", () => {
    const vp = fitChain(chain, 800, 800);
    // reach 1.8 plus fattest capsule, padded; the stretched arm must fit
    const [sx] = worldToScreen(vp, 1.8, 0);
    expect(sx).toBeGreaterThan(400);
    expect(sx).toBeLessThan(800);
    expect(screenToWorld(vp, 400, 400)[0]).toBeCloseTo(0, 12);
  });

  it("falls back to a unit square for an empty capsule list", () => {
    const vp = fitChain({ ...chain, capsules: [] }, 400, 400);
    expect(vp.scale).toBeGreaterThan(0);
    expect(Number.isFinite(vp.scale)).toBe(true);
  });
});
