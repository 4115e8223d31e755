"""Throughput and latency measurement.

Three probes:
  throughput_sweep     rollout-evaluation wall time over (N, H, workers)
  backend_comparison   the same workload on the numpy and numba kernels
  latency_probe        end-to-end control_step latency

Records are plain dicts, written as JSON lines plus a CSV table. Wall times
use the best of `repeats` runs; the mean is kept alongside for context.
"""

from __future__ import annotations

import csv
import json
import time

import numpy as np

from . import kernels
from .costs import CostStack, CostWeights, goal_at_position
from .kinematics import load_chain
from .rollout import evaluate_rollouts, make_dt_schedule, zero_state


def _workload(chain, horizon: int, particles: int, seed: int = 0):
    """A fixed rollout-evaluation workload: random but smooth controls and a
    reachable goal, so the cost stack runs every term it would in earnest."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((particles, horizon, chain.dof))
    # convolve(mode="same") returns the longer of the two lengths
    k = min(5, horizon)
    kernel = np.ones(k) / k
    controls = np.apply_along_axis(lambda s: np.convolve(s, kernel, mode="same"), 1, raw)
    sched = make_dt_schedule(horizon, 0.05, "two_phase")
    goal = goal_at_position(np.array([0.4, 0.2, 0.5]))
    stack = CostStack(chain=chain, weights=CostWeights(), goal=goal)
    return zero_state(chain.dof), controls, sched, stack


def _time_rollouts(chain, horizon, particles, workers, repeats) -> dict:
    x0, controls, sched, stack = _workload(chain, horizon, particles)
    evaluate_rollouts(x0, controls, chain, stack, sched, workers=workers)  # warm
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        evaluate_rollouts(x0, controls, chain, stack, sched, workers=workers)
        times.append(time.perf_counter() - t0)
    best = min(times)
    return {
        "kind": "throughput",
        "backend": kernels.BACKEND_NAME,
        "particles": particles,
        "horizon": horizon,
        "workers": workers,
        "dof": chain.dof,
        "best_s": best,
        "mean_s": sum(times) / len(times),
        "per_rollout_us": 1e6 * best / particles,
    }


def throughput_sweep(particles, horizons, workers, chain_file="arm7.chain", repeats=5) -> list:
    chain = load_chain(chain_file)
    records = []
    for n in particles:
        for h in horizons:
            for w in workers:
                records.append(_time_rollouts(chain, h, n, w, repeats))
    return records


def backend_comparison(chain_file="arm7.chain", particles=256, horizon=30, repeats=5) -> list:
    """Same workload on both kernel backends. The numba row is skipped when
    the import fails (fallback hosts)."""
    chain = load_chain(chain_file)
    records = []
    for name in ("numpy", "numba"):
        try:
            ctx = kernels.use_backend(name)
        except (ValueError, ImportError):
            continue
        with ctx:
            rec = _time_rollouts(chain, horizon, particles, 1, repeats)
        rec["kind"] = "backend"
        rec["backend"] = name
        records.append(rec)
    return records


def latency_probe(controller, state, steps=20) -> dict:
    """Median control_step wall time after one warmup call."""
    controller.control_step(state)
    lat = []
    for _ in range(steps):
        _, diag = controller.control_step(state)
        lat.append(diag.latency_ms)
    lat.sort()
    return {
        "kind": "latency",
        "backend": kernels.BACKEND_NAME,
        "particles": controller.particles,
        "horizon": controller.horizon,
        "workers": controller.workers,
        "dof": controller.chain.dof,
        "median_ms": lat[len(lat) // 2],
        "best_ms": lat[0],
        "worst_ms": lat[-1],
    }


_CSV_COLUMNS = [
    "kind", "backend", "particles", "horizon", "workers", "dof",
    "best_s", "mean_s", "per_rollout_us", "median_ms", "best_ms", "worst_ms",
]


def write_records(records, jsonl_path, csv_path=None):
    with open(jsonl_path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for rec in records:
                writer.writerow(rec)


def format_table(records) -> str:
    lines = [f"{'kind':<12}{'backend':<8}{'N':>6}{'H':>4}{'wrk':>4}{'best':>12}{'mean':>12}"]
    for rec in records:
        best = rec.get("best_s")
        mean = rec.get("mean_s")
        if best is None:
            best, mean = rec.get("best_ms", 0.0) / 1e3, rec.get("median_ms", 0.0) / 1e3
        lines.append(
            f"{rec['kind']:<12}{rec['backend']:<8}{rec['particles']:>6}{rec['horizon']:>4}"
            f"{rec['workers']:>4}{best:>11.4f}s{mean:>11.4f}s"
        )
    return "\n".join(lines)
