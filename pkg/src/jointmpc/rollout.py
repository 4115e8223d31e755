"""Batched rollouts of control sequences through the double-integrator model.

Integration is the triangular-matrix form: velocities are cumulative sums of
acceleration*dt, positions cumulative sums of velocity*dt, with the diagonal
included (semi-implicit Euler, stable on double integrators). Costs are
evaluated along the horizon, discounted, and reduced per particle.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError

log = logging.getLogger(__name__)

UNIFORM = "uniform"
TWO_PHASE = "two_phase"
LINEAR = "linear"


@dataclass
class JointState:
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray
    stamp: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.theta_dot = np.asarray(self.theta_dot, dtype=np.float64)
        self.theta_ddot = np.asarray(self.theta_ddot, dtype=np.float64)
        for name in ("theta", "theta_dot", "theta_ddot"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ContractError(f"joint state field {name} is not finite")


def zero_state(dof: int, stamp: float = 0.0) -> JointState:
    z = np.zeros(dof)
    return JointState(theta=z.copy(), theta_dot=z.copy(), theta_ddot=z.copy(), stamp=stamp)


@dataclass(frozen=True)
class DtSchedule:
    """Per-step integration intervals. Non-decreasing, so the horizon spends
    its resolution near the current state."""

    dts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dts", np.asarray(self.dts, dtype=np.float64))
        if np.any(self.dts <= 0.0):
            raise ContractError("dt entries must be positive")
        if np.any(np.diff(self.dts) < 0.0):
            raise ContractError("dt schedule must be non-decreasing")

    @property
    def horizon(self) -> int:
        return self.dts.shape[0]


def make_dt_schedule(horizon: int, dt_base: float, ramp: str = UNIFORM) -> DtSchedule:
    if horizon < 2:
        raise ContractError("horizon must be >= 2")
    if dt_base <= 0.0:
        raise ContractError("dt_base must be positive")
    if ramp == UNIFORM:
        dts = np.full(horizon, dt_base)
    elif ramp == TWO_PHASE:
        near = -(-horizon // 2)  # ceil
        dts = np.concatenate([np.full(near, dt_base), np.full(horizon - near, 2.0 * dt_base)])
    elif ramp == LINEAR:
        dts = np.linspace(dt_base, 2.0 * dt_base, horizon)
    else:
        raise ContractError(f"unknown dt ramp {ramp!r}")
    return DtSchedule(dts=dts)


@dataclass
class RolloutBundle:
    positions: np.ndarray  # (N, H, d)
    velocities: np.ndarray
    accelerations: np.ndarray
    step_costs: np.ndarray  # (N, H)
    term_breakdown: dict  # name -> (N, H)
    total_per_particle: np.ndarray  # (N,)


def integrate(x_init: JointState, controls, sched: DtSchedule):
    """Roll the batch forward. Returns positions, velocities, accelerations,
    each (N, H, d)."""
    u = np.asarray(getattr(controls, "controls", controls), dtype=np.float64)
    if u.ndim != 3:
        raise ContractError("controls must be (N, H, d)")
    if u.shape[1] != sched.horizon:
        raise ContractError(
            f"controls horizon {u.shape[1]} does not match schedule {sched.horizon}"
        )
    bad = ~np.isfinite(u).all(axis=(1, 2))
    if bad.any():
        raise ContractError(f"non-finite control in particle {int(np.flatnonzero(bad)[0])}")
    pos, vel = kernels.integrate_batch(u, sched.dts, x_init.theta, x_init.theta_dot)
    return pos, vel, u


def discounted_totals(
    step_costs: np.ndarray, gamma: float, terminal_weight: float = 1.0
) -> np.ndarray:
    """Sum_h gamma^h * c_h with the last running cost replaced by the
    terminal estimate terminal_weight * c_{H-1}, keeping its gamma^{H-1}
    weight."""
    horizon = step_costs.shape[1]
    disc = gamma ** np.arange(horizon)
    totals = step_costs[:, :-1] @ disc[:-1]
    totals += disc[-1] * terminal_weight * step_costs[:, -1]
    return totals


def evaluate_rollouts(
    x_init: JointState,
    controls,
    chain,
    cost_stack,
    sched: DtSchedule,
    gamma: float = 0.99,
    workers: int = 1,
    terminal_weight: float = 1.0,
) -> RolloutBundle:
    """Integrate the batch and score it with the cost stack.

    Particles are partitioned across a thread pool; each worker writes a
    disjoint row slice, so assembly needs no locks. Any particle whose costs
    come back non-finite is quarantined with +inf total (weight zero in the
    policy update) instead of poisoning the batch.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ContractError("gamma must lie in [0, 1]")
    pos, vel, acc = integrate(x_init, controls, sched)
    n, horizon = pos.shape[0], pos.shape[1]

    step_costs = np.empty((n, horizon))
    breakdown = {name: np.empty((n, horizon)) for name in cost_stack.term_names}

    def score(lo: int, hi: int):
        step, terms = cost_stack.evaluate(pos[lo:hi], vel[lo:hi], sched)
        step_costs[lo:hi] = step
        for name in breakdown:
            breakdown[name][lo:hi] = terms[name]

    if workers <= 1 or n < 2 * workers:
        score(0, n)
    else:
        chunk = -(-n // workers)
        spans = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(score, lo, hi) for lo, hi in spans]:
                fut.result()

    finite = np.isfinite(step_costs).all(axis=1)
    if not finite.all():
        quarantined = np.flatnonzero(~finite)
        log.warning("quarantined %d particle(s) with non-finite costs: %s",
                    quarantined.size, quarantined[:8].tolist())
        step_costs[~finite] = 0.0
    totals = discounted_totals(step_costs, gamma, terminal_weight)
    totals[~finite] = np.inf

    return RolloutBundle(
        positions=pos,
        velocities=vel,
        accelerations=acc,
        step_costs=step_costs,
        term_breakdown=breakdown,
        total_per_particle=totals,
    )
