"""World loading, plant stepping, and scripted targets."""

import json

import numpy as np
import pytest

from jointmpc.errors import ConfigError, ContractError
from jointmpc.kinematics import fk_batch
from jointmpc.rollout import JointState, integrate, make_dt_schedule
from jointmpc.simworld import (
    HOLD,
    LINEAR,
    TargetScript,
    WorldModel,
    collision_query,
    empty_world,
    load_world,
    script_from_waypoints,
    sim_step,
    target_at,
    target_position_at,
    world_from_dict,
)


class TestWorldLoading:
    def test_disc_becomes_z0_sphere(self):
        w = world_from_dict({"obstacles": [
            {"type": "disc", "center": [0.3, -0.2], "radius": 0.1}]})
        np.testing.assert_allclose(w.spheres, [[0.3, -0.2, 0.0, 0.1]])

    def test_sphere_keeps_center(self):
        w = world_from_dict({"obstacles": [
            {"type": "sphere", "center": [1.0, 2.0, 3.0], "radius": 0.5}]})
        np.testing.assert_allclose(w.spheres, [[1.0, 2.0, 3.0, 0.5]])

    def test_planar_box_is_extruded(self):
        w = world_from_dict({"obstacles": [
            {"type": "box", "min": [0.0, 0.0], "max": [1.0, 1.0]}]})
        assert w.boxes.shape == (1, 6)
        assert w.boxes[0, 2] < -1e17 and w.boxes[0, 5] > 1e17

    def test_spatial_box_passthrough(self):
        w = world_from_dict({"obstacles": [
            {"type": "box", "min": [0, 0, 0], "max": [1, 2, 3]}]})
        np.testing.assert_allclose(w.boxes, [[0, 0, 0, 1, 2, 3]])

    def test_default_bounds_padded(self):
        w = world_from_dict({})
        np.testing.assert_allclose(w.bounds_min, [-1, -1, -1])
        np.testing.assert_allclose(w.bounds_max, [1, 1, 1])

    def test_unknown_type_rejected(self):
        with pytest.raises(ConfigError):
            world_from_dict({"obstacles": [{"type": "torus", "r": 1.0}]})

    def test_bad_geometry_rejected(self):
        with pytest.raises(ConfigError):
            world_from_dict({"obstacles": [
                {"type": "disc", "center": [0, 0], "radius": -1.0}]})
        with pytest.raises(ConfigError):
            world_from_dict({"obstacles": [
                {"type": "box", "min": [1, 1], "max": [0, 0]}]})

    def test_load_from_file_and_fixture_fallback(self, tmp_path):
        data = {"name": "probe", "obstacles": [
            {"type": "disc", "center": [0, 0], "radius": 0.2}]}
        p = tmp_path / "probe.world"
        p.write_text(json.dumps(data))
        w = load_world(p)
        assert w.name == "probe" and w.obstacle_count == 1
        # bare fixture names resolve against the shipped directory
        w2 = load_world("fig3_reacher.world")
        assert w2.boxes.shape[0] == 2
        with pytest.raises(ConfigError):
            load_world("no_such_place.world")

    def test_empty_world(self):
        w = empty_world()
        assert w.obstacle_count == 0


class TestSimStep:
    def test_matches_rollout_integrator(self, planar2, rng):
        # stepping the plant with a control sequence must land exactly on the
        # batched rollout trajectory
        h = 6
        u = rng.normal(size=(1, h, 2))
        sched = make_dt_schedule(h, 0.05, "uniform")
        x0 = JointState(theta=rng.normal(size=2), theta_dot=rng.normal(size=2),
                        theta_ddot=np.zeros(2))
        pos, vel, _ = integrate(x0, u, sched)
        state = x0
        for k in range(h):
            state = sim_step(state, u[0, k], sched.dts[k])
            np.testing.assert_allclose(state.theta, pos[0, k], atol=1e-13)
            np.testing.assert_allclose(state.theta_dot, vel[0, k], atol=1e-13)

    def test_noise_determinism(self):
        x0 = JointState(theta=np.zeros(3), theta_dot=np.zeros(3),
                        theta_ddot=np.zeros(3))
        u = np.ones(3)
        a = sim_step(x0, u, 0.1, noise_sigma=0.05, rng=np.random.default_rng(5))
        b = sim_step(x0, u, 0.1, noise_sigma=0.05, rng=np.random.default_rng(5))
        np.testing.assert_array_equal(a.theta, b.theta)
        np.testing.assert_array_equal(a.theta_dot, b.theta_dot)

    def test_noise_requires_rng(self):
        x0 = JointState(theta=np.zeros(1), theta_dot=np.zeros(1),
                        theta_ddot=np.zeros(1))
        with pytest.raises(ContractError):
            sim_step(x0, np.zeros(1), 0.1, noise_sigma=0.1)

    def test_stamp_advances(self):
        x0 = JointState(theta=np.zeros(1), theta_dot=np.zeros(1),
                        theta_ddot=np.zeros(1), stamp=2.0)
        out = sim_step(x0, np.zeros(1), 0.25)
        assert out.stamp == pytest.approx(2.25)

    def test_bad_dt(self):
        x0 = JointState(theta=np.zeros(1), theta_dot=np.zeros(1),
                        theta_ddot=np.zeros(1))
        with pytest.raises(ContractError):
            sim_step(x0, np.zeros(1), -0.1)


class TestTargetScript:
    def test_hold_steps_between_waypoints(self):
        s = script_from_waypoints([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]], HOLD)
        np.testing.assert_allclose(target_position_at(s, 0.5), [0.0, 0.0, 0.0])
        np.testing.assert_allclose(target_position_at(s, 1.0), [1.0, 0.0, 0.0])

    def test_linear_interpolates(self):
        s = script_from_waypoints([[0.0, 0.0, 0.0], [2.0, 4.0, 2.0]], LINEAR)
        np.testing.assert_allclose(target_position_at(s, 0.5), [1.0, 0.5, 0.0])
        np.testing.assert_allclose(target_position_at(s, 1.5), [3.0, 1.5, 0.0])

    def test_held_outside_range(self):
        s = script_from_waypoints([[1.0, 0.5, 0.5], [2.0, 1.5, 1.5]], LINEAR)
        np.testing.assert_allclose(target_position_at(s, 0.0), [0.5, 0.5, 0.0])
        np.testing.assert_allclose(target_position_at(s, 99.0), [1.5, 1.5, 0.0])

    def test_pair_waypoint_format(self):
        s = script_from_waypoints([(0.0, np.array([0.1, 0.2])),
                                   (1.0, np.array([0.3, 0.4]))], HOLD)
        np.testing.assert_allclose(s.positions[0], [0.1, 0.2, 0.0])

    def test_three_d_waypoints(self):
        s = script_from_waypoints([[0.0, 1.0, 2.0, 3.0]], HOLD)
        np.testing.assert_allclose(s.positions[0], [1.0, 2.0, 3.0])

    def test_target_at_carries_mode(self):
        s = script_from_waypoints([[0.0, 1.0, 0.0]], HOLD, mode="full_pose")
        g = target_at(s, 0.0)
        assert g.mode == "full_pose"
        np.testing.assert_allclose(g.target_pose.translation, [1.0, 0.0, 0.0])

    def test_validation(self):
        with pytest.raises(ConfigError):
            TargetScript(times=np.array([]), positions=np.zeros((0, 3)))
        with pytest.raises(ConfigError):
            script_from_waypoints([[1.0, 0, 0], [1.0, 1, 1]], HOLD)
        with pytest.raises(ConfigError):
            script_from_waypoints([[0.0, 0, 0]], "cubic")
        with pytest.raises(ContractError):
            target_position_at(script_from_waypoints([[0.0, 0, 0]], HOLD), -1.0)


class TestCollisionQuery:
    def test_agrees_with_cost_term(self, planar2):
        # straight-out arm, obstacle sitting on the elbow
        w = world_from_dict({"obstacles": [
            {"type": "disc", "center": [1.0, 0.0], "radius": 0.2}],
            "bounds": {"min": [-3, -3], "max": [3, 3]}})
        rot, trans = fk_batch(planar2, np.zeros((1, 2)))
        hit, idx = collision_query(w, planar2, rot[0], trans[0])
        assert hit and idx == 0
        # folded away from it
        rot2, trans2 = fk_batch(planar2, np.array([[np.pi / 2, 0.0]]))
        hit2, _ = collision_query(w, planar2, rot2[0], trans2[0])
        assert not hit2
