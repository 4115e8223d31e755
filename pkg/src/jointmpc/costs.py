"""Cost-term library.

Every term maps a batch of rollout states to a non-negative (N, H) array.
Pose error carries its own directional weights; the remaining terms are
scaled by scalar weights in the total. Terms with zero weight are skipped
entirely, so the stack doubles as a toggle board.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ContractError
from .kernels.shared import NO_CONTACT
from .kinematics import KinematicChain, Pose

FULL_POSE = "full_pose"
POSITION_ONLY = "position_only"
ORIENTATION_CONSTRAINED = "orientation_constrained"

TERM_NAMES = ("pose", "stop", "joint", "manip", "selfcoll", "envcoll")


@dataclass(frozen=True)
class CostWeights:
    """alpha_rot/alpha_trans weigh the pose residual per direction; the pose
    term then enters the total with weight one. k_jl shrinks the usable joint
    range; k_m is the manipulability threshold below which the cost kicks in."""

    alpha_rot: np.ndarray = field(default_factory=lambda: np.full(3, 150.0))
    alpha_trans: np.ndarray = field(default_factory=lambda: np.full(3, 20.0))
    alpha_stop: float = 50.0
    alpha_joint: float = 100.0
    alpha_manip: float = 30.0
    alpha_coll: float = 1000.0
    k_jl: float = 0.1
    k_m: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "alpha_rot", np.broadcast_to(
            np.asarray(self.alpha_rot, dtype=np.float64), (3,)).copy())
        object.__setattr__(self, "alpha_trans", np.broadcast_to(
            np.asarray(self.alpha_trans, dtype=np.float64), (3,)).copy())
        scalars = (self.alpha_stop, self.alpha_joint, self.alpha_manip, self.alpha_coll)
        if any(s < 0 for s in scalars) or np.any(self.alpha_rot < 0) or np.any(self.alpha_trans < 0):
            raise ContractError("cost weights must be non-negative")
        if not 0.0 <= self.k_jl < 0.5:
            raise ContractError("k_jl must lie in [0, 0.5)")
        if self.k_m <= 0.0:
            raise ContractError("k_m must be positive")


@dataclass
class GoalSpec:
    target_pose: Pose
    mode: str = POSITION_ONLY

    def __post_init__(self):
        if self.mode not in (FULL_POSE, POSITION_ONLY, ORIENTATION_CONSTRAINED):
            raise ContractError(f"unknown goal mode {self.mode!r}")
        R = self.target_pose.rotation
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0.0:
            raise ContractError("goal rotation is not a proper rotation matrix")


def goal_at_position(position, mode: str = POSITION_ONLY) -> GoalSpec:
    p = np.asarray(position, dtype=np.float64).ravel()
    if p.size == 2:
        p = np.array([p[0], p[1], 0.0])
    return GoalSpec(target_pose=Pose(rotation=np.eye(3), translation=p), mode=mode)


def pose_cost(rot_ee, trans_ee, goal: GoalSpec, alpha_rot, alpha_trans) -> np.ndarray:
    """Weighted pose distance for an (..., 3, 3)/(..., 3) end-effector batch.

    Rotation residual is the row-weighted Frobenius norm of I - R_g^T R_ee;
    translation residual the weighted Euclidean distance expressed in the
    goal frame. position_only goals skip the rotation part.
    """
    rot_ee = np.asarray(rot_ee)
    trans_ee = np.asarray(trans_ee)
    Rg = goal.target_pose.rotation
    dg = goal.target_pose.translation

    diff = np.einsum("ji,...j->...i", Rg, trans_ee - dg)
    out = np.sqrt(np.sum((np.asarray(alpha_trans) * diff) ** 2, axis=-1))

    if goal.mode != POSITION_ONLY:
        res = np.eye(3) - np.einsum("ji,...jk->...ik", Rg, rot_ee)
        res = np.asarray(alpha_rot)[:, None] * res
        out = out + np.sqrt(np.sum(res * res, axis=(-2, -1)))
    return out


def braking_limits(accel_max: np.ndarray, sched) -> np.ndarray:
    """(H, d) per-step speed limits: the speed still stoppable by constant
    maximum deceleration over the remaining horizon."""
    remaining = np.cumsum(sched.dts[::-1])[::-1]
    return remaining[:, None] * np.asarray(accel_max)[None, :]


def stop_cost(velocities: np.ndarray, accel_max: np.ndarray, sched) -> np.ndarray:
    limits = braking_limits(accel_max, sched)
    excess = np.maximum(np.abs(velocities) - limits[None, :, :], 0.0)
    return np.sqrt(np.sum(excess * excess, axis=-1))


def shrunken_limits(chain: KinematicChain, k_jl: float):
    lo = chain.joint_limits[:, 0]
    hi = chain.joint_limits[:, 1]
    span = hi - lo
    return lo + k_jl * span, hi - k_jl * span


def joint_limit_cost(positions: np.ndarray, chain: KinematicChain, k_jl: float) -> np.ndarray:
    lo, hi = shrunken_limits(chain, k_jl)
    below = np.maximum(lo - positions, 0.0)
    above = np.maximum(positions - hi, 0.0)
    depth = below + above  # at most one side is nonzero per joint
    return np.sqrt(np.sum(depth * depth, axis=-1))


def manipulability_cost_from_values(manip: np.ndarray, k_m: float) -> np.ndarray:
    return np.where(manip < k_m, 1.0 - manip, 0.0)


def manipulability_cost(chain: KinematicChain, q: np.ndarray, k_m: float) -> np.ndarray:
    from .kinematics import manipulability_batch

    return manipulability_cost_from_values(manipulability_batch(chain, q), k_m)


class OracleSelfCollision:
    """Exact capsule-pair penetration, the geometry the surrogate learns."""

    kind = "oracle"

    def __init__(self, chain: KinematicChain):
        self.chain = chain

    def distance(self, q: np.ndarray, poses=None) -> np.ndarray:
        ch = self.chain
        if poses is None:
            flat = q.reshape(-1, ch.dof)
            rot, trans = kernels.fk_batch(flat, ch.axes, ch.origin_rot, ch.origin_trans, ch.jtype)
        else:
            rot, trans = poses
            rot = rot.reshape(-1, ch.dof, 3, 3)
            trans = trans.reshape(-1, ch.dof, 3)
        dist = kernels.self_collision_batch(
            rot, trans, ch.cap_p0, ch.cap_p1, ch.cap_r, ch.cap_link, ch.pair_a, ch.pair_b
        )
        return dist.reshape(q.shape[:-1])


def self_collision_cost(q: np.ndarray, provider) -> np.ndarray:
    """max(0, predicted penetration); clean configurations cost nothing."""
    return np.maximum(provider.distance(q), 0.0)


def env_collision_cost(rot, trans, chain: KinematicChain, world) -> np.ndarray:
    """Binary per-state obstacle collision for (..., d, 3, 3)/(..., d, 3)
    link poses. Deliberately discrete."""
    lead = trans.shape[:-2]
    hit = kernels.env_collision_batch(
        rot.reshape(-1, chain.dof, 3, 3), trans.reshape(-1, chain.dof, 3),
        chain.cap_p0, chain.cap_p1, chain.cap_r, chain.cap_link,
        world.spheres, world.boxes,
    )
    return (hit >= 0).astype(np.float64).reshape(lead)


def total_cost(terms: dict, weights: CostWeights) -> np.ndarray:
    """Weighted sum of the term arrays (pose already carries its weights)."""
    shapes = {t.shape for t in terms.values()}
    if len(shapes) != 1:
        raise ContractError(f"cost term shapes differ: {sorted(shapes)}")
    return (
        terms["pose"]
        + weights.alpha_stop * terms["stop"]
        + weights.alpha_joint * terms["joint"]
        + weights.alpha_manip * terms["manip"]
        + weights.alpha_coll * (terms["selfcoll"] + terms["envcoll"])
    )


@dataclass
class CostStack:
    """Bound evaluation context: chain, weights, goal, world, and the
    self-collision provider. evaluate() runs one fused pass per batch slice
    (single FK, shared link poses) and is pure, so rollout workers may call
    it concurrently on disjoint slices."""

    chain: KinematicChain
    weights: CostWeights
    goal: GoalSpec
    world: object = None
    self_collision: object = None

    term_names = TERM_NAMES

    def __post_init__(self):
        if self.self_collision is None and self.chain.pair_a.size:
            self.self_collision = OracleSelfCollision(self.chain)

    def evaluate(self, positions: np.ndarray, velocities: np.ndarray, sched):
        """(step_costs, breakdown) for (n, H, d) position/velocity slices."""
        ch = self.chain
        w = self.weights
        n, horizon = positions.shape[0], positions.shape[1]
        flat = positions.reshape(-1, ch.dof)
        rot, trans = kernels.fk_batch(flat, ch.axes, ch.origin_rot, ch.origin_trans, ch.jtype)

        terms = {name: np.zeros((n, horizon)) for name in TERM_NAMES}
        ee_rot = rot[:, -1].reshape(n, horizon, 3, 3)
        ee_trans = trans[:, -1].reshape(n, horizon, 3)
        terms["pose"] = pose_cost(ee_rot, ee_trans, self.goal, w.alpha_rot, w.alpha_trans)

        if w.alpha_stop > 0.0:
            terms["stop"] = stop_cost(velocities, ch.accel_limits, sched)
        if w.alpha_joint > 0.0:
            terms["joint"] = joint_limit_cost(positions, ch, w.k_jl)
        if w.alpha_manip > 0.0:
            J = kernels.jacobian_batch(flat, rot, trans, ch.axes, ch.jtype)
            manip = kernels.manip_batch(J, ch.task_dim).reshape(n, horizon)
            terms["manip"] = manipulability_cost_from_values(manip, w.k_m)
        if w.alpha_coll > 0.0 and self.self_collision is not None:
            dist = self.self_collision.distance(
                positions, poses=(rot, trans) if self.self_collision.kind == "oracle" else None
            )
            terms["selfcoll"] = np.maximum(dist, 0.0)
        if w.alpha_coll > 0.0 and self.world is not None and self.world.obstacle_count:
            hit = kernels.env_collision_batch(
                rot, trans, ch.cap_p0, ch.cap_p1, ch.cap_r, ch.cap_link,
                self.world.spheres, self.world.boxes,
            )
            terms["envcoll"] = (hit >= 0).astype(np.float64).reshape(n, horizon)

        return total_cost(terms, w), terms

    def with_goal(self, goal: GoalSpec) -> "CostStack":
        return replace(self, goal=goal)
