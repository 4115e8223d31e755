"""Receding-horizon control loop.

Each control step shifts the policy, then runs K iterations of
sample -> rollout -> distribution update, and finally emits the next
command. A small state filter blends raw measurements with the model
prediction so noisy plants don't rattle the optimizer.

Sampling strategies differ in where their randomness lives: the Halton
generator draws its perturbation block once at construction and reuses it
every step (the sequence is deterministic anyway), while the pseudorandom
generator redraws from the seeded stream each step. Either way a fixed seed
gives a bit-identical episode.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass

import numpy as np

from .costs import CostStack, CostWeights, GoalSpec
from .errors import ContractError, PolicyStateError
from .kinematics import KinematicChain, fk_batch
from .policy import (
    UpdateConfig,
    make_policy,
    next_command,
    particle_weights,
    shift,
    update_covariance,
    update_mean,
)
from .rollout import DtSchedule, JointState, evaluate_rollouts, make_dt_schedule
from .sampling import (
    HALTON,
    PSEUDORANDOM,
    SmoothingSpec,
    build_control_batch,
    gaussianize,
    smooth_sequences,
    unit_samples,
)
from .simworld import TargetScript, sim_step, target_at

log = logging.getLogger(__name__)


@dataclass
class FilterState:
    lam: float
    last_command: np.ndarray
    last_estimate: JointState

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ContractError("filter blend must lie in [0, 1]")


def filter_state(raw: JointState, filt: FilterState, dt: float) -> JointState:
    """Blend the measurement with the model's prediction from the previous
    command. Updates filt.last_estimate as a side effect."""
    if dt <= 0.0:
        raise ContractError("dt must be positive")
    pred_vel = filt.last_estimate.theta_dot + dt * filt.last_command
    pred_pos = filt.last_estimate.theta + dt * pred_vel
    lam = filt.lam
    est = JointState(
        theta=(1.0 - lam) * pred_pos + lam * raw.theta,
        theta_dot=(1.0 - lam) * pred_vel + lam * raw.theta_dot,
        theta_ddot=filt.last_command.copy(),
        stamp=raw.stamp,
    )
    filt.last_estimate = est
    return est


@dataclass
class StepDiagnostics:
    latency_ms: float
    sample_ms: float
    rollout_ms: float
    update_ms: float
    best_cost: float
    mean_cost: float
    fallback: str = ""  # "", "reissue", "brake"
    bundle: object = None


class Controller:
    """Owns the policy, the sampled perturbation pipeline, and the cost
    stack. Single-threaded by contract; rollout fan-out happens inside
    evaluate_rollouts."""

    def __init__(
        self,
        chain: KinematicChain,
        goal: GoalSpec,
        *,
        horizon: int = 30,
        particles: int = 200,
        dt_base: float = 0.05,
        dt_ramp: str = "two_phase",
        gamma: float = 0.99,
        workers: int = 1,
        terminal_weight: float = 1.0,
        generator: str = HALTON,
        smoothing: SmoothingSpec | None = None,
        null_count: int = 2,
        weights: CostWeights | None = None,
        world=None,
        self_collision=None,
        beta: float = 0.5,
        alpha_mu: float = 0.9,
        alpha_sigma: float = 0.5,
        sigma0_sq: float = 1.0,
        sigma_sq_min: float = 1e-4,
        sigma_sq_max: float = 0.0,
        policy_mode: str = "per_joint_diagonal",
        command_mode: str = "mean",
        iterations: int = 1,
        control_period: float = 0.05,
        latency_budget: float = 0.05,
        filter_lambda: float = 0.3,
        seed: int = 0,
    ):
        if particles <= null_count + 1:
            raise ContractError("need more particles than reserved sequences")
        if generator not in (HALTON, PSEUDORANDOM):
            raise ContractError(f"unknown generator {generator!r}")
        if control_period <= 0.0:
            raise ContractError("control_period must be positive")
        self.chain = chain
        self.generator = generator
        self.smoothing = smoothing or SmoothingSpec()
        self.particles = particles
        self.null_count = null_count
        self.horizon = horizon
        self.workers = workers
        self.terminal_weight = terminal_weight
        self.command_mode = command_mode
        self.iterations = max(1, iterations)
        self.control_period = control_period
        self.latency_budget = latency_budget
        self.sched = make_dt_schedule(horizon, dt_base, dt_ramp)
        self.update_cfg = UpdateConfig(
            beta=beta,
            alpha_mu=alpha_mu,
            alpha_sigma=alpha_sigma,
            gamma=gamma,
            sigma_sq_min=sigma_sq_min,
            sigma_sq_max=sigma_sq_max if sigma_sq_max > 0.0 else sigma0_sq,
        )
        self.policy = make_policy(horizon, chain.dof, sigma0_sq, policy_mode)
        self.cost_stack = CostStack(
            chain=chain,
            weights=weights or CostWeights(),
            goal=goal,
            world=world,
            self_collision=self_collision,
        )
        self.rng = np.random.default_rng(seed)
        self._knots = self.smoothing.knot_count(horizon)
        if generator == HALTON:
            unit = unit_samples(particles, self._knots, chain.dof, HALTON)
            eps = smooth_sequences(gaussianize(unit), self.smoothing, horizon)
            # The set is drawn once and reused every step, so any nonzero
            # batch mean acts as a permanent drift on the policy update
            # (worst when the knot stride shares a factor with a Halton
            # base). Remove it; redrawn generators average out on their own.
            self._fixed_eps = eps - eps.mean(axis=0, keepdims=True)
        else:
            self._fixed_eps = None
        self._prev_command = np.zeros(chain.dof)
        self._fallback_armed = False
        self.filter = FilterState(
            lam=filter_lambda,
            last_command=np.zeros(chain.dof),
            last_estimate=JointState(
                theta=np.zeros(chain.dof),
                theta_dot=np.zeros(chain.dof),
                theta_ddot=np.zeros(chain.dof),
            ),
        )

    def set_goal(self, goal: GoalSpec):
        self.cost_stack.goal = goal

    def _perturbations(self) -> np.ndarray:
        if self.generator == HALTON:
            return self._fixed_eps
        unit = unit_samples(self.particles, self._knots, self.chain.dof, PSEUDORANDOM, self.rng)
        return smooth_sequences(gaussianize(unit), self.smoothing, self.horizon)

    def control_step(self, state: JointState) -> tuple[np.ndarray, StepDiagnostics]:
        t_start = time.perf_counter()
        self.policy = shift(self.policy, self.update_cfg.default_tail)
        sample_ms = rollout_ms = update_ms = 0.0
        bundle = None
        try:
            for _ in range(self.iterations):
                t0 = time.perf_counter()
                eps = self._perturbations()
                batch = build_control_batch(eps, self.policy, self.null_count)
                t1 = time.perf_counter()
                bundle = evaluate_rollouts(
                    state, batch, self.chain, self.cost_stack, self.sched,
                    gamma=self.update_cfg.gamma, workers=self.workers,
                    terminal_weight=self.terminal_weight,
                )
                t2 = time.perf_counter()
                w = particle_weights(bundle.total_per_particle, self.update_cfg.beta)
                self.policy = update_mean(self.policy, batch, w, self.update_cfg.alpha_mu)
                self.policy = update_covariance(
                    self.policy, batch, w, self.update_cfg.alpha_sigma, self.update_cfg
                )
                t3 = time.perf_counter()
                sample_ms += (t1 - t0) * 1e3
                rollout_ms += (t2 - t1) * 1e3
                update_ms += (t3 - t2) * 1e3
        except (PolicyStateError, ContractError) as exc:
            # degrade gracefully: previous command once, then brake
            if not self._fallback_armed:
                self._fallback_armed = True
                command = self._prev_command.copy()
                mode = "reissue"
            else:
                command = np.zeros(self.chain.dof)
                mode = "brake"
            log.warning("control step failed (%s); falling back to %s", exc, mode)
            latency = (time.perf_counter() - t_start) * 1e3
            diag = StepDiagnostics(
                latency_ms=latency, sample_ms=sample_ms, rollout_ms=rollout_ms,
                update_ms=update_ms, best_cost=float("nan"), mean_cost=float("nan"),
                fallback=mode,
            )
            self.filter.last_command = command.copy()
            return command, diag

        self._fallback_armed = False
        command = next_command(self.policy, self.command_mode, self.rng)
        self._prev_command = command.copy()
        self.filter.last_command = command.copy()
        latency = (time.perf_counter() - t_start) * 1e3
        if latency > self.latency_budget * 1e3:
            log.debug("control step overran budget: %.2f ms", latency)
        finite = bundle.total_per_particle[np.isfinite(bundle.total_per_particle)]
        diag = StepDiagnostics(
            latency_ms=latency,
            sample_ms=sample_ms,
            rollout_ms=rollout_ms,
            update_ms=update_ms,
            best_cost=float(finite.min()),
            mean_cost=float(finite.mean()),
            bundle=bundle,
        )
        return command, diag

    def instantaneous_costs(self, state: JointState):
        """Per-term costs of a single plant state, using the h=0 braking
        limit (total remaining horizon time) for the stop term."""
        one = DtSchedule(dts=np.array([self.sched.dts.sum()]))
        step, terms = self.cost_stack.evaluate(
            state.theta[None, None, :], state.theta_dot[None, None, :], one
        )
        return float(step[0, 0]), {k: float(v[0, 0]) for k, v in terms.items()}


@dataclass
class EpisodeLog:
    """Step-indexed record of one simulated episode. The CSV rendering is
    the external interface; the object also keeps the chain handle and the
    end-effector track so reports don't have to re-derive them."""

    chain: KinematicChain
    t: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    command: np.ndarray
    goal: np.ndarray  # (S, 3) positions
    ee: np.ndarray  # (S, 3)
    cost_total: np.ndarray
    cost_terms: dict  # name -> (S,)
    collision: np.ndarray
    latency_ms: np.ndarray
    aborted: bool = False
    goal_rotations: np.ndarray | None = None
    ee_rotations: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.t.shape[0]

    def header(self) -> list:
        d = self.chain.dof
        cols = ["t"]
        cols += [f"theta_{k}" for k in range(d)]
        cols += [f"thetadot_{k}" for k in range(d)]
        cols += [f"u_{k}" for k in range(d)]
        cols += [f"goal_{k}" for k in range(3)]
        cols += ["cost_total", "cost_pose", "cost_stop", "cost_joint",
                 "cost_manip", "cost_selfcoll", "cost_envcoll",
                 "collision", "latency_ms"]
        return cols

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for i in range(self.steps):
            row = [f"{self.t[i]:.17g}"]
            row += [f"{v:.17g}" for v in self.theta[i]]
            row += [f"{v:.17g}" for v in self.theta_dot[i]]
            row += [f"{v:.17g}" for v in self.command[i]]
            row += [f"{v:.17g}" for v in self.goal[i]]
            row += [f"{self.cost_total[i]:.17g}"]
            row += [f"{self.cost_terms[k][i]:.17g}" for k in
                    ("pose", "stop", "joint", "manip", "selfcoll", "envcoll")]
            row += [str(int(self.collision[i])), f"{self.latency_ms[i]:.17g}"]
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def run_episode(
    controller: Controller,
    x0: JointState,
    goal_source,
    steps: int,
    noise_sigma: float = 0.0,
    sim_seed: int = 0,
) -> EpisodeLog:
    """Alternate control and plant steps for a fixed number of iterations.

    goal_source is a GoalSpec (fixed goal) or a TargetScript. A non-finite
    plant state aborts the episode, keeping the log rows gathered so far.
    """
    chain = controller.chain
    dt = controller.control_period
    sim_rng = np.random.default_rng(sim_seed) if noise_sigma > 0.0 else None

    rows = {
        "t": [], "theta": [], "theta_dot": [], "command": [], "goal": [],
        "ee": [], "cost_total": [], "collision": [], "latency_ms": [],
        "goal_rot": [], "ee_rot": [],
    }
    term_rows = {k: [] for k in ("pose", "stop", "joint", "manip", "selfcoll", "envcoll")}

    controller.filter.last_estimate = x0
    controller.filter.last_command = np.zeros(chain.dof)
    state = x0
    aborted = False

    for i in range(steps):
        t_now = i * dt
        if isinstance(goal_source, TargetScript):
            goal = target_at(goal_source, t_now)
        else:
            goal = goal_source
        controller.set_goal(goal)

        est = filter_state(state, controller.filter, dt) if i > 0 else state
        command, diag = controller.control_step(est)

        total, terms = controller.instantaneous_costs(state)
        rot_links, trans_links = fk_batch(chain, state.theta[None, :])
        collided = bool(terms["envcoll"] > 0.0)

        rows["t"].append(t_now)
        rows["theta"].append(state.theta.copy())
        rows["theta_dot"].append(state.theta_dot.copy())
        rows["command"].append(command.copy())
        rows["goal"].append(goal.target_pose.translation.copy())
        rows["ee"].append(trans_links[0, -1].copy())
        rows["goal_rot"].append(goal.target_pose.rotation.copy())
        rows["ee_rot"].append(rot_links[0, -1].copy())
        rows["cost_total"].append(total)
        rows["collision"].append(collided)
        rows["latency_ms"].append(diag.latency_ms)
        for k in term_rows:
            term_rows[k].append(terms[k])

        try:
            state = sim_step(state, command, dt, noise_sigma=noise_sigma, rng=sim_rng)
        except ContractError:
            log.error("plant diverged at step %d; aborting episode", i)
            aborted = True
            break

    return EpisodeLog(
        chain=chain,
        t=np.array(rows["t"]),
        theta=np.array(rows["theta"]).reshape(-1, chain.dof),
        theta_dot=np.array(rows["theta_dot"]).reshape(-1, chain.dof),
        command=np.array(rows["command"]).reshape(-1, chain.dof),
        goal=np.array(rows["goal"]).reshape(-1, 3),
        ee=np.array(rows["ee"]).reshape(-1, 3),
        cost_total=np.array(rows["cost_total"]),
        cost_terms={k: np.array(v) for k, v in term_rows.items()},
        collision=np.array(rows["collision"], dtype=bool),
        latency_ms=np.array(rows["latency_ms"]),
        aborted=aborted,
        goal_rotations=np.array(rows["goal_rot"]).reshape(-1, 3, 3),
        ee_rotations=np.array(rows["ee_rot"]).reshape(-1, 3, 3),
    )
