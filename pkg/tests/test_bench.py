"""Benchmark harness: record structure, backend sweep, rendering."""

import json

import numpy as np
import pytest

from jointmpc import kernels
from jointmpc.bench import (
    backend_comparison,
    format_table,
    latency_probe,
    throughput_sweep,
    write_records,
)
from jointmpc.controller import Controller
from jointmpc.costs import goal_at_position
from jointmpc.rollout import zero_state


@pytest.fixture(scope="module")
def sweep():
    return throughput_sweep(particles=[16], horizons=[4, 6], workers=[1, 2],
                            chain_file="planar2.chain", repeats=2)


class TestThroughput:
    def test_grid_is_exhaustive(self, sweep):
        assert len(sweep) == 4
        combos = {(r["horizon"], r["workers"]) for r in sweep}
        assert combos == {(4, 1), (4, 2), (6, 1), (6, 2)}

    def test_record_fields(self, sweep):
        for rec in sweep:
            assert rec["kind"] == "throughput"
            assert rec["particles"] == 16 and rec["dof"] == 2
            assert rec["best_s"] > 0.0
            assert rec["mean_s"] >= rec["best_s"]
            assert rec["per_rollout_us"] == pytest.approx(
                1e6 * rec["best_s"] / rec["particles"])


class TestBackends:
    def test_both_backends_measured(self):
        recs = backend_comparison(chain_file="planar2.chain", particles=16,
                                  horizon=4, repeats=1)
        names = {r["backend"] for r in recs}
        assert "numpy" in names
        if kernels.BACKEND_NAME == "numba":
            assert names == {"numpy", "numba"}
        for r in recs:
            assert r["kind"] == "backend"

    def test_sweep_leaves_backend_unchanged(self):
        before = kernels.BACKEND_NAME
        backend_comparison(chain_file="planar2.chain", particles=16,
                           horizon=4, repeats=1)
        assert kernels.BACKEND_NAME == before


class TestLatency:
    def test_probe_summary(self, planar2):
        c = Controller(planar2, goal_at_position([1.0, 0.5]), horizon=6,
                       particles=16, seed=0)
        rec = latency_probe(c, zero_state(2), steps=5)
        assert rec["kind"] == "latency"
        assert rec["best_ms"] <= rec["median_ms"] <= rec["worst_ms"]


class TestOutput:
    def test_write_jsonl_and_csv(self, sweep, tmp_path):
        jl = tmp_path / "bench.jsonl"
        cv = tmp_path / "bench.csv"
        write_records(sweep, jl, cv)
        lines = jl.read_text().strip().split("\n")
        assert len(lines) == len(sweep)
        assert json.loads(lines[0])["kind"] == "throughput"
        rows = cv.read_text().strip().split("\n")
        assert rows[0].startswith("kind,backend,particles")
        assert len(rows) == len(sweep) + 1

    def test_format_table(self, sweep):
        table = format_table(sweep)
        lines = table.split("\n")
        assert len(lines) == len(sweep) + 1
        assert "backend" in lines[0]
        assert "throughput" in lines[1]
