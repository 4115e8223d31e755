// Message schema spoken by the jointmpc websocket bridge. Every frame in
// both directions carries v (schema version); see the bridge module's
// docstring in the Python package for the authoritative layout.

export const SCHEMA_VERSION = 1;

export interface Capsule {
  link: number;
  p0: number[];
  p1: number[];
  radius: number;
}

export interface ChainInfo {
  name: string;
  dof: number;
  task_dim: number;
  capsules: Capsule[];
}

export interface WorldInfo {
  /** rows [cx, cy, cz, r] */
  spheres: number[][];
  /** rows [min_x, min_y, min_z, max_x, max_y, max_z] */
  boxes: number[][];
  bounds_min: number[] | null;
  bounds_max: number[] | null;
}

export interface HelloMsg {
  v: number;
  type: "hello";
  k: number;
  control_period: number;
  chain: ChainInfo;
  world: WorldInfo;
  goal: number[];
}

export interface CostBreakdown {
  total: number;
  [term: string]: number;
}

export interface StateMsg {
  v: number;
  type: "state";
  t: number;
  q: number[];
  /** end-effector position, 2 or 3 coords depending on the chain */
  ee: number[];
  goal: number[];
  /** base plus one point per link, same coord count as ee */
  links: number[][];
  /** k end-effector paths, each a list of points */
  top_rollouts: number[][][];
  costs: CostBreakdown;
  latency_ms: number;
  paused: boolean;
  collision: boolean;
}

export interface ErrorMsg {
  v: number;
  type: "error";
  message: string;
}

export type ServerMessage = HelloMsg | StateMsg | ErrorMsg;

export type ClientMessage =
  | { v: typeof SCHEMA_VERSION; type: "set_goal"; position: number[] }
  | { v: typeof SCHEMA_VERSION; type: "pause" }
  | { v: typeof SCHEMA_VERSION; type: "resume" }
  | { v: typeof SCHEMA_VERSION; type: "reset" };

function numVec(x: unknown, minLen = 0): x is number[] {
  return (
    Array.isArray(x) &&
    x.length >= minLen &&
    x.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}

function pointList(x: unknown): x is number[][] {
  return Array.isArray(x) && x.every((p) => numVec(p, 2));
}

/**
 * Parse one server frame. Returns null on anything structurally off so the
 * caller can skip the frame; validation covers exactly the fields the
 * renderer and HUD dereference.
 */
export function parseServerMessage(text: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (m.v !== SCHEMA_VERSION) return null;

  if (m.type === "error") {
    return typeof m.message === "string" ? (m as unknown as ErrorMsg) : null;
  }

  if (m.type === "hello") {
    const chain = m.chain as Record<string, unknown> | undefined;
    const world = m.world as Record<string, unknown> | undefined;
    if (
      typeof m.k !== "number" ||
      typeof m.control_period !== "number" ||
      !chain ||
      typeof chain.dof !== "number" ||
      typeof chain.task_dim !== "number" ||
      !Array.isArray(chain.capsules) ||
      !world ||
      !pointList(world.spheres ?? []) ||
      !pointList(world.boxes ?? []) ||
      !numVec(m.goal, 2)
    ) {
      return null;
    }
    return m as unknown as HelloMsg;
  }

  if (m.type === "state") {
    if (
      typeof m.t !== "number" ||
      !numVec(m.q) ||
      !numVec(m.ee, 2) ||
      !numVec(m.goal, 2) ||
      !pointList(m.links) ||
      !Array.isArray(m.top_rollouts) ||
      !(m.top_rollouts as unknown[]).every(pointList) ||
      typeof m.costs !== "object" ||
      m.costs === null ||
      typeof (m.costs as CostBreakdown).total !== "number" ||
      typeof m.latency_ms !== "number" ||
      typeof m.paused !== "boolean" ||
      typeof m.collision !== "boolean"
    ) {
      return null;
    }
    return m as unknown as StateMsg;
  }

  return null;
}
