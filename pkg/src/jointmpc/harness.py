"""Command-line harness.

Subcommands:
  reach            one fixed-goal episode, CSV log + metrics JSON
  track            one moving-target episode (waypoint script)
  fig3             sampling-strategy comparison batch over seeds
  bench            rollout throughput / control latency sweep
  train-collision  fit the learned self-collision distance model
  serve            websocket bridge + live controller for the browser UI

Every subcommand takes --config (bundled scenario names resolve against the
fixtures directory) and accepts --section.key=value overrides on top.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, apply_overrides, dump_config, load_config
from .controller import Controller, EpisodeLog, run_episode
from .costs import CostWeights, goal_at_position
from .errors import ConfigError, ContractError
from .kinematics import FIXTURES, load_chain
from .rollout import zero_state
from .sampling import SmoothingSpec
from .simworld import load_world, script_from_waypoints
from .surrogate import LearnedSelfCollision, train_collision_surrogate


def resolve_config(path) -> ExperimentConfig:
    """Load a config file, falling back to the bundled scenario fixtures."""
    p = Path(path)
    if not p.exists():
        candidate = FIXTURES / p.name
        if candidate.exists():
            p = candidate
        else:
            raise ConfigError(f"config file not found: {path}")
    return load_config(p)


def _collision_provider(cfg: ExperimentConfig):
    name = cfg.costs.collision_provider
    if name == "oracle":
        return None  # CostStack builds the oracle itself when pairs exist
    if name == "learned":
        if not cfg.costs.surrogate_path:
            raise ConfigError("collision_provider = 'learned' needs costs.surrogate_path")
        p = Path(cfg.costs.surrogate_path)
        if not p.exists():
            raise ConfigError(f"surrogate model not found: {p}")
        return LearnedSelfCollision.load(p)
    raise ConfigError(f"unknown collision provider {name!r}")


def build_controller(cfg: ExperimentConfig) -> Controller:
    chain = load_chain(cfg.chain.file)
    world = load_world(cfg.world.file) if cfg.world.file else None
    rot_w, trans_w = cfg.costs.alpha_p
    weights = CostWeights(
        alpha_rot=np.asarray(rot_w, dtype=float),
        alpha_trans=np.asarray(trans_w, dtype=float),
        alpha_stop=cfg.costs.alpha_s,
        alpha_joint=cfg.costs.alpha_j,
        alpha_manip=cfg.costs.alpha_m,
        alpha_coll=cfg.costs.alpha_c,
        k_jl=cfg.costs.k_jl,
        k_m=cfg.costs.k_m,
    )
    smoothing = SmoothingSpec(
        mode=cfg.sampling.mode,
        spline_degree=cfg.sampling.degree,
        comb_coeffs=tuple(cfg.sampling.comb_coeffs),
        knots_per_horizon=cfg.sampling.knots,
    )
    return Controller(
        chain,
        build_goal_source(cfg, first=True),
        horizon=cfg.rollout.horizon,
        particles=cfg.rollout.particles,
        dt_base=cfg.rollout.dt_base,
        dt_ramp=cfg.rollout.dt_ramp,
        gamma=cfg.rollout.gamma,
        workers=cfg.rollout.workers,
        terminal_weight=cfg.rollout.terminal_weight,
        generator=cfg.sampling.generator,
        smoothing=smoothing,
        null_count=cfg.sampling.null_count,
        weights=weights,
        world=world,
        self_collision=_collision_provider(cfg),
        beta=cfg.policy.beta,
        alpha_mu=cfg.policy.alpha_mu,
        alpha_sigma=cfg.policy.alpha_sigma,
        sigma0_sq=cfg.policy.sigma0,
        sigma_sq_min=cfg.policy.sigma_min,
        sigma_sq_max=cfg.policy.sigma_max,
        policy_mode=cfg.policy.mode,
        command_mode=cfg.policy.command_mode,
        iterations=cfg.policy.iterations,
        control_period=cfg.controller.control_period,
        latency_budget=cfg.controller.latency_budget,
        filter_lambda=cfg.controller.filter_lambda,
        seed=cfg.seed,
    )


def build_goal_source(cfg: ExperimentConfig, first: bool = False):
    """TargetScript when waypoints are given, fixed GoalSpec otherwise.

    first=True collapses a script to its initial goal, which is what the
    controller constructor wants before the episode driver takes over.
    """
    tgt = cfg.target
    if tgt.waypoints:
        script = script_from_waypoints(tgt.waypoints, interpolation=tgt.interpolation, mode=tgt.mode)
        if first:
            from .simworld import target_at

            return target_at(script, 0.0)
        return script
    goal = goal_at_position(np.asarray(tgt.position, dtype=float), mode=tgt.mode)
    if tgt.rpy:
        from .costs import GoalSpec
        from .kinematics import Pose, _rpy_matrix

        pose = Pose(rotation=_rpy_matrix(*tgt.rpy), translation=goal.target_pose.translation)
        goal = GoalSpec(target_pose=pose, mode=tgt.mode)
    return goal


def initial_state(cfg: ExperimentConfig, chain):
    state = zero_state(chain.dof)
    if cfg.target.start:
        theta = np.asarray(cfg.target.start, dtype=float)
        if theta.shape != (chain.dof,):
            raise ConfigError(f"target.start has {theta.size} entries, chain has {chain.dof} joints")
        state.theta = theta
    return state


def _quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix.

    Branches on the largest diagonal term so the divisor stays well away
    from zero for every orientation.
    """
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    out = np.array(q)
    return out / np.linalg.norm(out)


def orientation_error_pct(R_desired: np.ndarray, R_reached: np.ndarray) -> float:
    """Quaternion distance as a percentage: (100/sqrt(2)) * min over the
    double cover. 0 for identical orientations, 100 for a half turn."""
    qd = _quat_from_rotation(R_desired)
    qr = _quat_from_rotation(R_reached)
    return (100.0 / math.sqrt(2.0)) * min(
        float(np.linalg.norm(qd - qr)), float(np.linalg.norm(qd + qr))
    )


def metrics_report(log: EpisodeLog, settle_tol: float = 0.02) -> dict:
    """Episode summary: position error stats, orientation error stats,
    settle time, velocity-limit violations, collision count."""
    if log.steps == 0:
        raise ContractError("empty episode log")
    pos_err = np.linalg.norm(log.ee - log.goal, axis=-1)

    settled = pos_err < settle_tol
    settle_time = None
    for i in range(log.steps):
        if settled[i:].all():
            settle_time = float(log.t[i])
            break

    vel_excess = np.abs(log.theta_dot) - log.chain.velocity_limits[None, :]
    violations = int((vel_excess > 1e-9).any(axis=1).sum())

    report = {
        "steps": log.steps,
        "duration_s": float(log.t[-1] - log.t[0]) if log.steps > 1 else 0.0,
        "median_position_error": float(np.median(pos_err)),
        "max_position_error": float(pos_err.max()),
        "final_position_error": float(pos_err[-1]),
        "min_position_error": float(pos_err.min()),
        "settle_time_s": settle_time,
        "settle_tolerance": settle_tol,
        "velocity_limit_violations": violations,
        "collision_count": int(log.collision.sum()),
        "median_latency_ms": float(np.median(log.latency_ms)),
        "max_latency_ms": float(log.latency_ms.max()),
        "aborted": log.aborted,
    }
    if log.ee_rotations is not None and log.goal_rotations is not None:
        ori = np.array(
            [
                orientation_error_pct(log.goal_rotations[i], log.ee_rotations[i])
                for i in range(log.steps)
            ]
        )
        report["median_orientation_error_pct"] = float(np.median(ori))
        report["final_orientation_error_pct"] = float(ori[-1])
    return report


def _run_scenario(cfg: ExperimentConfig, steps: int, out_dir: Path) -> dict:
    controller = build_controller(cfg)
    goal_source = build_goal_source(cfg)
    x0 = initial_state(cfg, controller.chain)
    log = run_episode(
        controller,
        x0,
        goal_source,
        steps,
        noise_sigma=cfg.world.noise_sigma,
        sim_seed=cfg.seed,
    )
    report = metrics_report(log)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.to_csv(out_dir / "episode.csv")
    dump_config(cfg, out_dir / "config.toml")
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


FIG3_STRATEGIES = (
    ("halton_bspline", "halton", "bspline"),
    ("halton_comb", "halton", "comb"),
    ("pseudorandom_comb", "pseudorandom", "comb"),
)


def run_fig3_batch(cfg: ExperimentConfig, seeds: int = 10, steps: int = 100,
                   goal_tol: float = 0.05, start_jitter: float = 0.03) -> dict:
    """Run the corridor scenario under three sampler/smoother pairings.

    Each seed perturbs the start position a little (and reseeds the
    pseudorandom generator); a run succeeds when the end effector gets
    within goal_tol of the goal at any step and never touches an obstacle.
    """
    base_start = list(cfg.target.start)
    summary = {"seeds": seeds, "steps": steps, "goal_tolerance": goal_tol, "strategies": {}}
    for label, generator, smoothing_mode in FIG3_STRATEGIES:
        per_seed = []
        for seed in range(seeds):
            jitter = np.random.default_rng(seed).uniform(-start_jitter, start_jitter, size=2)
            cfg.sampling.generator = generator
            cfg.sampling.mode = smoothing_mode
            cfg.seed = seed
            cfg.target.start = [base_start[0] + jitter[0], base_start[1] + jitter[1]]
            controller = build_controller(cfg)
            goal_source = build_goal_source(cfg)
            x0 = initial_state(cfg, controller.chain)
            log = run_episode(controller, x0, goal_source, steps, sim_seed=seed)
            min_dist = float(np.linalg.norm(log.ee - log.goal, axis=-1).min())
            collisions = int(log.collision.sum())
            per_seed.append(
                {
                    "seed": seed,
                    "reached": min_dist < goal_tol,
                    "min_goal_distance": min_dist,
                    "collisions": collisions,
                    "success": min_dist < goal_tol and collisions == 0,
                }
            )
        summary["strategies"][label] = {
            "successes": sum(r["success"] for r in per_seed),
            "per_seed": per_seed,
        }
    cfg.target.start = base_start
    counts = [summary["strategies"][label]["successes"] for label, _, _ in FIG3_STRATEGIES]
    summary["ordering_holds"] = counts[0] >= counts[1] >= counts[2]
    return summary


def _split_overrides(extras: list) -> list:
    for item in extras:
        if not (item.startswith("--") and "=" in item):
            raise ConfigError(f"unrecognized argument {item!r} (expected --section.key=value)")
    return extras


def _load(args, extras) -> ExperimentConfig:
    cfg = resolve_config(args.config)
    return apply_overrides(cfg, _split_overrides(extras))


def cmd_reach(args, extras) -> int:
    cfg = _load(args, extras)
    report = _run_scenario(cfg, args.steps, Path(args.out))
    print(json.dumps(report, indent=2))
    return 0


def cmd_track(args, extras) -> int:
    cfg = _load(args, extras)
    if not cfg.target.waypoints:
        raise ConfigError("track needs target.waypoints in the config")
    report = _run_scenario(cfg, args.steps, Path(args.out))
    print(json.dumps(report, indent=2))
    return 0


def cmd_fig3(args, extras) -> int:
    cfg = _load(args, extras)
    t0 = time.perf_counter()
    summary = run_fig3_batch(cfg, seeds=args.seeds, steps=args.steps)
    summary["wall_time_s"] = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fig3_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    for label in summary["strategies"]:
        n = summary["strategies"][label]["successes"]
        print(f"{label}: {n}/{args.seeds} succeeded")
    print(f"ordering holds: {summary['ordering_holds']}")
    return 0


def cmd_bench(args, extras) -> int:
    from . import bench

    cfg = _load(args, extras)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = bench.throughput_sweep(
        particles=args.particles,
        horizons=args.horizon,
        workers=args.workers,
        chain_file=cfg.chain.file,
        repeats=args.repeats,
    )
    records += bench.backend_comparison(chain_file=cfg.chain.file, repeats=args.repeats)
    bench.write_records(records, out / "bench.jsonl", out / "bench.csv")
    print(bench.format_table(records))
    return 0


def cmd_train_collision(args, extras) -> int:
    cfg = _load(args, extras)
    chain = load_chain(cfg.chain.file)
    t0 = time.perf_counter()
    model = train_collision_surrogate(chain, args.samples, seed=cfg.seed, epochs=args.epochs)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "surrogate.npz"
    model.save(path)
    print(
        json.dumps(
            {
                "samples": args.samples,
                "train_time_s": elapsed,
                "holdout_mae": model.holdout_mae,
                "sign_agreement": model.sign_agreement,
                "path": str(path),
            },
            indent=2,
        )
    )
    return 0


def cmd_serve(args, extras) -> int:
    from . import bridge

    cfg = _load(args, extras)
    bridge.serve(cfg, host=args.host, port=args.port, snapshot_hz=args.snapshot_hz)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointmpc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(name, help_text, default_cfg, default_steps):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=default_cfg)
        p.add_argument("--steps", type=int, default=default_steps)
        p.add_argument("--out", default=f"runs/{name}")
        return p

    scenario("reach", "fixed-goal episode", "reach_arm7.toml", 200).set_defaults(fn=cmd_reach)
    scenario("track", "moving-target episode", "track_planar.toml", 300).set_defaults(fn=cmd_track)

    p = sub.add_parser("fig3", help="sampling-strategy comparison batch")
    p.add_argument("--config", default="fig3.toml")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", default="runs/fig3")
    p.set_defaults(fn=cmd_fig3)

    p = sub.add_parser("bench", help="throughput and backend sweep")
    p.add_argument("--config", default="reach_arm7.toml")
    p.add_argument("--particles", type=int, nargs="+", default=[512])
    p.add_argument("--horizon", type=int, nargs="+", default=[30])
    p.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default="runs/bench")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("train-collision", help="fit the self-collision surrogate")
    p.add_argument("--config", default="reach_arm7.toml")
    p.add_argument("--samples", type=int, default=50000)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--out", default="runs/surrogate")
    p.set_defaults(fn=cmd_train_collision)

    p = sub.add_parser("serve", help="websocket bridge for the browser UI")
    p.add_argument("--config", default="track_planar.toml")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--snapshot-hz", type=float, default=30.0)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args, extras = parser.parse_known_args(argv)
    try:
        return args.fn(args, extras)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
