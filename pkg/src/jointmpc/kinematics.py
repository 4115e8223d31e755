"""Serial-chain robot model.

A chain is an ordered list of revolute/prismatic joints. Frame k is obtained
from frame k-1 by applying the joint motion and then the fixed origin
transform, so each link frame sits at the distal end of its link and the
end-effector is the last link frame. Collision geometry is a set of capsules
expressed in link frames.

All heavy math lives in the kernels package; this module owns the chain
description, validation, and the single-configuration conveniences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ChainError, ContractError
from .kernels.shared import NO_CONTACT

FIXTURES = Path(__file__).parent / "fixtures"

REVOLUTE = 0
PRISMATIC = 1

_JOINT_TYPES = {"revolute": REVOLUTE, "prismatic": PRISMATIC}


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)


def _rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass(frozen=True)
class KinematicChain:
    """Validated, immutable chain description in packed-array form.

    axes: (d, 3) unit joint axes in the parent frame.
    origin_rot/origin_trans: (d, 3, 3) and (d, 3) fixed transforms applied
    after each joint motion.
    jtype: (d,) 0 = revolute, 1 = prismatic.
    joint_limits: (d, 2); velocity_limits/accel_limits: (d,).
    cap_*: capsule endpoints (C, 3), radii (C,), owning link index (C,).
    pair_a/pair_b: (P,) capsule-index pairs checked for self collision.
    task_dim: 2 for planar chains, 3 for spatial; selects the position rows
    that enter the manipulability measure.
    """

    axes: np.ndarray
    origin_rot: np.ndarray
    origin_trans: np.ndarray
    jtype: np.ndarray
    joint_limits: np.ndarray
    velocity_limits: np.ndarray
    accel_limits: np.ndarray
    cap_p0: np.ndarray
    cap_p1: np.ndarray
    cap_r: np.ndarray
    cap_link: np.ndarray
    pair_a: np.ndarray
    pair_b: np.ndarray
    task_dim: int
    name: str = field(default="chain")

    @property
    def dof(self) -> int:
        return self.axes.shape[0]

    def __post_init__(self):
        d = self.axes.shape[0]
        if d == 0:
            raise ChainError("chain has no joints")
        norms = np.linalg.norm(self.axes, axis=1)
        for i, n in enumerate(norms):
            if abs(n - 1.0) > 1e-9:
                raise ChainError(f"joint {i}: axis must be unit norm, got |axis|={n:.12g}")
        for i in range(d):
            lo, hi = self.joint_limits[i]
            if not lo < hi:
                raise ChainError(f"joint {i}: position limits inverted ({lo} >= {hi})")
            if self.velocity_limits[i] <= 0:
                raise ChainError(f"joint {i}: velocity limit must be positive")
            if self.accel_limits[i] <= 0:
                raise ChainError(f"joint {i}: acceleration limit must be positive")
        for ci in range(self.cap_r.shape[0]):
            if self.cap_r[ci] <= 0:
                raise ChainError(f"capsule {ci}: radius must be positive")
            if not 0 <= self.cap_link[ci] < d:
                raise ChainError(f"capsule {ci}: link index {self.cap_link[ci]} out of range")
        for pi in range(self.pair_a.shape[0]):
            a, b = self.pair_a[pi], self.pair_b[pi]
            if not (0 <= a < d and 0 <= b < d) or a == b:
                raise ChainError(f"self-collision pair {pi}: bad link indices ({a}, {b})")
        if self.task_dim not in (2, 3):
            raise ChainError(f"task_dim must be 2 or 3, got {self.task_dim}")


def chain_from_dict(data: dict, name: str = "chain") -> KinematicChain:
    joints = data.get("joints")
    if not joints:
        raise ChainError("chain description has no joints")
    d = len(joints)

    axes = np.zeros((d, 3))
    origin_rot = np.zeros((d, 3, 3))
    origin_trans = np.zeros((d, 3))
    jtype = np.zeros(d, dtype=np.int64)
    for i, j in enumerate(joints):
        try:
            jtype[i] = _JOINT_TYPES[j["type"]]
        except KeyError:
            raise ChainError(f"joint {i}: unknown or missing type {j.get('type')!r}") from None
        if "axis" not in j:
            raise ChainError(f"joint {i}: missing axis")
        axes[i] = np.asarray(j["axis"], dtype=np.float64)
        origin = j.get("origin", {})
        origin_trans[i] = np.asarray(origin.get("xyz", (0.0, 0.0, 0.0)), dtype=np.float64)
        origin_rot[i] = _rpy_matrix(*origin.get("rpy", (0.0, 0.0, 0.0)))

    limits = data.get("limits", {})
    try:
        joint_limits = np.asarray(limits["position"], dtype=np.float64).reshape(d, 2)
        velocity_limits = np.asarray(limits["velocity"], dtype=np.float64).reshape(d)
        accel_limits = np.asarray(limits["acceleration"], dtype=np.float64).reshape(d)
    except (KeyError, ValueError) as exc:
        raise ChainError(f"limits block malformed or missing: {exc}") from None

    caps = data.get("capsules", [])
    cap_p0 = np.zeros((len(caps), 3))
    cap_p1 = np.zeros((len(caps), 3))
    cap_r = np.zeros(len(caps))
    cap_link = np.zeros(len(caps), dtype=np.int64)
    for ci, c in enumerate(caps):
        cap_p0[ci] = np.asarray(c["p0"], dtype=np.float64)
        cap_p1[ci] = np.asarray(c["p1"], dtype=np.float64)
        cap_r[ci] = float(c["radius"])
        cap_link[ci] = int(c["link"])

    pairs = data.get("self_collision_pairs", [])
    pair_a = np.array([p[0] for p in pairs], dtype=np.int64)
    pair_b = np.array([p[1] for p in pairs], dtype=np.int64)
    if pairs and (pair_a.max() >= len(caps) or pair_b.max() >= len(caps) or pair_a.min() < 0 or pair_b.min() < 0):
        raise ChainError(f"{name}: self_collision_pairs index capsules 0..{len(caps) - 1}")

    return KinematicChain(
        axes=axes,
        origin_rot=origin_rot,
        origin_trans=origin_trans,
        jtype=jtype,
        joint_limits=joint_limits,
        velocity_limits=velocity_limits,
        accel_limits=accel_limits,
        cap_p0=cap_p0,
        cap_p1=cap_p1,
        cap_r=cap_r,
        cap_link=cap_link,
        pair_a=pair_a,
        pair_b=pair_b,
        task_dim=int(data.get("task_dim", 3)),
        name=data.get("name", name),
    )


def load_chain(path) -> KinematicChain:
    """Load and validate a chain description (JSON)."""
    p = Path(path)
    if not p.exists():
        candidate = FIXTURES / p.name
        if candidate.exists():
            p = candidate
        else:
            raise ChainError(f"chain file not found: {path}")
    with open(p) as fh:
        data = json.load(fh)
    return chain_from_dict(data, name=p.stem)


def _q2d(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != chain.dof:
        raise ContractError(f"expected {chain.dof} joint values, got shape {q.shape}")
    return q


def fk_batch(chain: KinematicChain, q) -> tuple[np.ndarray, np.ndarray]:
    """Per-link rotations (..., d, 3, 3) and translations (..., d, 3) for any
    leading batch shape of q (..., d)."""
    q = _q2d(chain, q)
    lead = q.shape[:-1]
    flat = q.reshape(-1, chain.dof)
    rot, trans = kernels.fk_batch(flat, chain.axes, chain.origin_rot, chain.origin_trans, chain.jtype)
    return rot.reshape(*lead, chain.dof, 3, 3), trans.reshape(*lead, chain.dof, 3)


def forward_kinematics(chain: KinematicChain, q) -> tuple[Pose, list[Pose]]:
    """End-effector pose plus every link pose for a single configuration."""
    rot, trans = fk_batch(chain, np.atleast_2d(_q2d(chain, q)))
    links = [Pose(rot[0, k], trans[0, k]) for k in range(chain.dof)]
    return links[-1], links


def jacobian_batch(chain: KinematicChain, q) -> np.ndarray:
    q = _q2d(chain, q)
    lead = q.shape[:-1]
    flat = q.reshape(-1, chain.dof)
    rot, trans = kernels.fk_batch(flat, chain.axes, chain.origin_rot, chain.origin_trans, chain.jtype)
    J = kernels.jacobian_batch(flat, rot, trans, chain.axes, chain.jtype)
    return J.reshape(*lead, 6, chain.dof)


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric end-effector Jacobian, linear rows stacked over angular."""
    return jacobian_batch(chain, np.atleast_2d(_q2d(chain, q)))[0]


def jacobian_dot_times_qdot(chain: KinematicChain, q, qd) -> np.ndarray:
    """dJ/dt * qdot via a central difference of J along the qdot direction."""
    q = _q2d(chain, q)
    qd = _q2d(chain, qd)
    if not np.any(qd):
        return np.zeros(6)
    delta = 1e-6
    pair = np.stack([q + delta * qd, q - delta * qd])
    J = jacobian_batch(chain, pair)
    jdot = (J[0] - J[1]) / (2.0 * delta)
    return jdot @ qd


def manipulability_batch(chain: KinematicChain, q) -> np.ndarray:
    q = _q2d(chain, q)
    lead = q.shape[:-1]
    flat = q.reshape(-1, chain.dof)
    rot, trans = kernels.fk_batch(flat, chain.axes, chain.origin_rot, chain.origin_trans, chain.jtype)
    J = kernels.jacobian_batch(flat, rot, trans, chain.axes, chain.jtype)
    return kernels.manip_batch(J, chain.task_dim).reshape(lead)


def manipulability(chain: KinematicChain, q) -> float:
    """Velocity-ellipsoid volume sqrt(det(Jp Jp^T)) over the task-relevant
    position rows; zero at singular configurations."""
    return float(manipulability_batch(chain, np.atleast_2d(_q2d(chain, q)))[0])


def self_collision_batch(chain: KinematicChain, q) -> np.ndarray:
    q = _q2d(chain, q)
    lead = q.shape[:-1]
    flat = q.reshape(-1, chain.dof)
    rot, trans = kernels.fk_batch(flat, chain.axes, chain.origin_rot, chain.origin_trans, chain.jtype)
    dist = kernels.self_collision_batch(
        rot, trans, chain.cap_p0, chain.cap_p1, chain.cap_r, chain.cap_link,
        chain.pair_a, chain.pair_b,
    )
    return dist.reshape(lead)


def self_collision_distance(chain: KinematicChain, q) -> float:
    """Worst-pair penetration depth in meters; positive means two link
    capsules overlap, NO_CONTACT sentinel when the pair list is empty."""
    return float(self_collision_batch(chain, np.atleast_2d(_q2d(chain, q)))[0])
