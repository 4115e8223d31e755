import type { ChainInfo } from "./types.js";

/**
 * Affine world<->screen map. World y points up, screen y points down; the
 * world point (cx, cy) lands at the canvas center. scale is px per meter.
 * Both directions are exact inverses of each other, so a round trip only
 * loses float rounding (far under the 1 px budget).
 */
export interface Viewport {
  scale: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export function worldToScreen(vp: Viewport, wx: number, wy: number): [number, number] {
  return [vp.width / 2 + (wx - vp.cx) * vp.scale, vp.height / 2 - (wy - vp.cy) * vp.scale];
}

export function screenToWorld(vp: Viewport, sx: number, sy: number): [number, number] {
  return [vp.cx + (sx - vp.width / 2) / vp.scale, vp.cy - (sy - vp.height / 2) / vp.scale];
}

/** Fit a world-space rectangle into the canvas, keeping aspect, with a pixel margin. */
export function fitBounds(
  boundsMin: number[],
  boundsMax: number[],
  width: number,
  height: number,
  marginPx = 24,
): Viewport {
  const spanX = Math.max(boundsMax[0] - boundsMin[0], 1e-6);
  const spanY = Math.max(boundsMax[1] - boundsMin[1], 1e-6);
  const usableW = Math.max(width - 2 * marginPx, 1);
  const usableH = Math.max(height - 2 * marginPx, 1);
  return {
    scale: Math.min(usableW / spanX, usableH / spanY),
    cx: (boundsMin[0] + boundsMax[0]) / 2,
    cy: (boundsMin[1] + boundsMax[1]) / 2,
    width,
    height,
  };
}

/**
 * Framing fallback when the world ships no bounds: a square around the
 * origin sized by the chain's reach, estimated from the capsule endpoints
 * (they live in link-local frames, so the segment extents sum along the arm).
 */
export function fitChain(chain: ChainInfo, width: number, height: number): Viewport {
  let reach = 0;
  let fattest = 0;
  for (const cap of chain.capsules) {
    const n0 = Math.hypot(...cap.p0);
    const n1 = Math.hypot(...cap.p1);
    reach += Math.max(n0, n1);
    fattest = Math.max(fattest, cap.radius);
  }
  const r = (reach + fattest) * 1.1 || 1.0;
  return fitBounds([-r, -r], [r, r], width, height);
}
