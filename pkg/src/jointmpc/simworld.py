"""Desk-scale worlds and plants.

Obstacles are promoted to 3-D primitives at load time (discs become z=0
spheres, planar boxes are extruded along z), so a single kernel serves both
planar and spatial chains. The plant is the same double integrator the
rollouts assume; with noise off, open-loop simulation of a control sequence
reproduces the rollout trajectory exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError
from .kinematics import FIXTURES, KinematicChain
from .rollout import JointState

# z half-extent used when extruding planar boxes
_SLAB = 1.0e18

HOLD = "hold"
LINEAR = "linear"


@dataclass(frozen=True)
class WorldModel:
    """Obstacles in packed form: spheres (ns, 4) rows [cx, cy, cz, r], boxes
    (nb, 6) rows [min, max]. Collision indices count spheres first."""

    spheres: np.ndarray
    boxes: np.ndarray
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    name: str = "world"

    def __post_init__(self):
        if self.spheres.size and np.any(self.spheres[:, 3] <= 0.0):
            raise ConfigError("sphere radii must be positive")
        if self.boxes.size and np.any(self.boxes[:, 3:] <= self.boxes[:, :3]):
            raise ConfigError("box min must be strictly below max componentwise")

    @property
    def obstacle_count(self) -> int:
        return self.spheres.shape[0] + self.boxes.shape[0]


def empty_world() -> WorldModel:
    return WorldModel(
        spheres=np.zeros((0, 4)),
        boxes=np.zeros((0, 6)),
        bounds_min=np.array([-1.0, -1.0, -1.0]),
        bounds_max=np.array([1.0, 1.0, 1.0]),
        name="empty",
    )


def world_from_dict(data: dict, name: str = "world") -> WorldModel:
    spheres = []
    boxes = []
    for i, ob in enumerate(data.get("obstacles", [])):
        kind = ob.get("type")
        if kind == "disc":
            cx, cy = ob["center"]
            spheres.append([cx, cy, 0.0, ob["radius"]])
        elif kind == "sphere":
            spheres.append([*ob["center"], ob["radius"]])
        elif kind == "box":
            lo = list(ob["min"])
            hi = list(ob["max"])
            if len(lo) == 2:
                lo = [*lo, -_SLAB]
                hi = [*hi, _SLAB]
            boxes.append(lo + hi)
        else:
            raise ConfigError(f"obstacle {i}: unknown type {kind!r}")
    bounds = data.get("bounds", {})
    lo = list(bounds.get("min", (-1.0, -1.0)))
    hi = list(bounds.get("max", (1.0, 1.0)))
    if len(lo) == 2:
        lo = [*lo, -1.0]
        hi = [*hi, 1.0]
    return WorldModel(
        spheres=np.asarray(spheres, dtype=np.float64).reshape(-1, 4),
        boxes=np.asarray(boxes, dtype=np.float64).reshape(-1, 6),
        bounds_min=np.asarray(lo, dtype=np.float64),
        bounds_max=np.asarray(hi, dtype=np.float64),
        name=data.get("name", name),
    )


def load_world(path) -> WorldModel:
    p = Path(path)
    if not p.exists():
        candidate = FIXTURES / p.name
        if candidate.exists():
            p = candidate
        else:
            raise ConfigError(f"world file not found: {path}")
    with open(p) as fh:
        return world_from_dict(json.load(fh), name=p.stem)


def sim_step(
    state: JointState,
    command: np.ndarray,
    dt: float,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> JointState:
    """One plant step: the same semi-implicit Euler as the rollouts, plus
    optional zero-mean Gaussian state noise to exercise the filter."""
    if dt <= 0.0:
        raise ContractError("dt must be positive")
    u = np.asarray(command, dtype=np.float64)
    vel = state.theta_dot + dt * u
    pos = state.theta + dt * vel
    if noise_sigma > 0.0:
        if rng is None:
            raise ContractError("state noise requires an rng")
        pos = pos + rng.normal(0.0, noise_sigma, size=pos.shape)
        vel = vel + rng.normal(0.0, noise_sigma, size=vel.shape)
    return JointState(theta=pos, theta_dot=vel, theta_ddot=u.copy(), stamp=state.stamp + dt)


@dataclass(frozen=True)
class TargetScript:
    """Timed goal positions. times strictly increasing; interpolation is
    hold (step) or linear between bracketing waypoints."""

    times: np.ndarray
    positions: np.ndarray  # (W, 3)
    interpolation: str = HOLD
    source: str = "scripted"
    mode: str = "position_only"

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "positions", np.atleast_2d(np.asarray(self.positions, dtype=np.float64)))
        if self.times.size == 0:
            raise ConfigError("target script needs at least one waypoint")
        if np.any(np.diff(self.times) <= 0.0):
            raise ConfigError("waypoint times must be strictly increasing")
        if self.interpolation not in (HOLD, LINEAR):
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")


def script_from_waypoints(waypoints, interpolation: str = HOLD, mode: str = "position_only") -> TargetScript:
    """Waypoints are (time, position) pairs or flat [time, x, y(, z)] rows."""
    times, positions = [], []
    for w in waypoints:
        if len(w) == 2 and np.ndim(w[1]) == 1:
            times.append(float(w[0]))
            positions.append(_pad3(w[1]))
        else:
            times.append(float(w[0]))
            positions.append(_pad3(w[1:]))
    return TargetScript(
        times=np.array(times), positions=np.array(positions),
        interpolation=interpolation, mode=mode,
    )


def _pad3(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 2:
        return np.array([p[0], p[1], 0.0])
    return p


def target_at(script: TargetScript, t: float):
    """GoalSpec at time t, in the script's goal mode (identity orientation)."""
    from .costs import goal_at_position

    return goal_at_position(target_position_at(script, t), mode=script.mode)


def target_position_at(script: TargetScript, t: float) -> np.ndarray:
    """Goal position at time t: held before the first waypoint and after the
    last, stepped or linearly interpolated in between."""
    if t < 0.0:
        raise ContractError("time must be non-negative")
    times, pts = script.times, script.positions
    if t <= times[0]:
        return pts[0].copy()
    if t >= times[-1]:
        return pts[-1].copy()
    hi = int(np.searchsorted(times, t, side="right"))
    lo = hi - 1
    if script.interpolation == HOLD:
        return pts[lo].copy()
    frac = (t - times[lo]) / (times[hi] - times[lo])
    return (1.0 - frac) * pts[lo] + frac * pts[hi]


def collision_query(world: WorldModel, chain: KinematicChain, rot, trans):
    """(collided, obstacle index) for one configuration's link poses.

    Same kernel as the environment-collision cost term, so the simulator and
    the controller can never disagree about what counts as a hit.
    """
    rot = np.asarray(rot, dtype=np.float64).reshape(1, chain.dof, 3, 3)
    trans = np.asarray(trans, dtype=np.float64).reshape(1, chain.dof, 3)
    hit = kernels.env_collision_batch(
        rot, trans, chain.cap_p0, chain.cap_p1, chain.cap_r, chain.cap_link,
        world.spheres, world.boxes,
    )[0]
    return bool(hit >= 0), int(hit)
