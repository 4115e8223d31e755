import type { StateMsg } from "./types.js";

/** Euclidean end-effector-to-goal distance, same definition the episode
 * metrics use. */
export function poseError(ee: number[], goal: number[]): number {
  const n = Math.min(ee.length, goal.length);
  let s = 0;
  for (let i = 0; i < n; i++) s += (ee[i] - goal[i]) ** 2;
  return Math.sqrt(s);
}

export interface CostBar {
  name: string;
  value: number;
  /** bar length relative to the largest term, in [0, 1] */
  frac: number;
}

export function costBars(costs: StateMsg["costs"]): CostBar[] {
  const terms = Object.entries(costs).filter(([name]) => name !== "total");
  const top = Math.max(...terms.map(([, v]) => v), 0);
  return terms.map(([name, value]) => ({
    name,
    value,
    frac: top > 0 ? Math.min(Math.max(value / top, 0), 1) : 0,
  }));
}

export function formatMeters(x: number): string {
  return `${x.toFixed(3)} m`;
}

export function formatMs(x: number): string {
  return `${x.toFixed(1)} ms`;
}

export interface HudElements {
  poseError: HTMLElement;
  latency: HTMLElement;
  collision: HTMLElement;
  bars: HTMLElement;
}

export function updateHud(els: HudElements, state: StateMsg): void {
  els.poseError.textContent = formatMeters(poseError(state.ee, state.goal));
  els.latency.textContent = formatMs(state.latency_ms);
  els.collision.classList.toggle("hit", state.collision);
  els.collision.title = state.collision ? "in collision" : "clear";

  for (const bar of costBars(state.costs)) {
    let row = els.bars.querySelector<HTMLElement>(`[data-term="${bar.name}"]`);
    if (!row) {
      row = document.createElement("div");
      row.className = "cost-row";
      row.dataset.term = bar.name;
      row.innerHTML =
        `<span class="cost-name">${bar.name}</span>` +
        `<span class="cost-track"><span class="cost-fill"></span></span>` +
        `<span class="cost-value"></span>`;
      els.bars.appendChild(row);
    }
    const fill = row.querySelector<HTMLElement>(".cost-fill");
    const value = row.querySelector<HTMLElement>(".cost-value");
    if (fill) fill.style.width = `${(bar.frac * 100).toFixed(1)}%`;
    if (value) value.textContent = bar.value.toFixed(3);
  }
}
