"""Episode metrics and the CLI surface."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from jointmpc.controller import EpisodeLog
from jointmpc.errors import ConfigError, ContractError
from jointmpc.harness import (
    FIG3_STRATEGIES,
    _quat_from_rotation,
    initial_state,
    main,
    make_parser,
    metrics_report,
    orientation_error_pct,
    resolve_config,
)
from jointmpc.config import config_from_dict


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class TestOrientationMetric:
    def test_identical_rotations_score_zero(self):
        for R in Rotation.random(20, random_state=0).as_matrix():
            assert orientation_error_pct(R, R) == pytest.approx(0.0, abs=1e-9)

    def test_half_turn_scores_hundred(self):
        assert orientation_error_pct(np.eye(3), _rot_z(np.pi)) == pytest.approx(100.0)

    def test_symmetric(self):
        A, B = Rotation.random(2, random_state=1).as_matrix()
        assert orientation_error_pct(A, B) == pytest.approx(
            orientation_error_pct(B, A), abs=1e-12
        )

    def test_small_angle_small_error(self):
        err = orientation_error_pct(np.eye(3), _rot_z(0.01))
        assert 0.0 < err < 1.0

    def test_quaternion_against_scipy(self):
        # scipy returns scalar-last; ours is scalar-first, either sign
        for R in Rotation.random(50, random_state=2).as_matrix():
            q = _quat_from_rotation(R)
            s = Rotation.from_matrix(R).as_quat()
            ref = np.array([s[3], s[0], s[1], s[2]])
            assert min(np.abs(q - ref).max(), np.abs(q + ref).max()) < 1e-9


def _synthetic_log(planar2, pos_err, vel=None, collision=None, with_rot=False):
    n = len(pos_err)
    goal = np.tile([1.0, 0.0, 0.0], (n, 1))
    ee = goal.copy()
    ee[:, 0] += np.asarray(pos_err)  # pure x offset gives exact error norms
    terms = {k: np.zeros(n) for k in ("pose", "stop", "joint", "manip",
                                      "selfcoll", "envcoll")}
    rots = np.tile(np.eye(3), (n, 1, 1)) if with_rot else None
    return EpisodeLog(
        chain=planar2,
        t=0.1 * np.arange(n),
        theta=np.zeros((n, 2)),
        theta_dot=np.zeros((n, 2)) if vel is None else vel,
        command=np.zeros((n, 2)),
        goal=goal,
        ee=ee,
        cost_total=np.zeros(n),
        cost_terms=terms,
        collision=np.zeros(n, dtype=bool) if collision is None else collision,
        latency_ms=np.ones(n),
        goal_rotations=rots,
        ee_rotations=rots,
    )


class TestMetricsReport:
    def test_empty_log_rejected(self, planar2):
        log = _synthetic_log(planar2, [])
        with pytest.raises(ContractError):
            metrics_report(log)

    def test_settle_time_is_first_step_of_final_stay(self, planar2):
        # dips inside tolerance at step 2, leaves, then settles at step 4
        log = _synthetic_log(planar2, [0.5, 0.3, 0.01, 0.3, 0.01, 0.005, 0.001])
        rep = metrics_report(log, settle_tol=0.02)
        assert rep["settle_time_s"] == pytest.approx(0.4)

    def test_never_settles_is_none(self, planar2):
        log = _synthetic_log(planar2, [0.5, 0.4, 0.3])
        assert metrics_report(log, settle_tol=0.02)["settle_time_s"] is None

    def test_error_stats(self, planar2):
        log = _synthetic_log(planar2, [0.4, 0.2, 0.1, 0.3])
        rep = metrics_report(log)
        assert rep["final_position_error"] == pytest.approx(0.3)
        assert rep["max_position_error"] == pytest.approx(0.4)
        assert rep["min_position_error"] == pytest.approx(0.1)
        assert rep["median_position_error"] == pytest.approx(0.25)

    def test_velocity_violations_count_steps(self, planar2):
        vel = np.zeros((4, 2))
        vel[1] = [0.0, 99.0]  # one joint over on one step
        vel[3] = [99.0, 99.0]  # both joints over counts once
        log = _synthetic_log(planar2, [0.1] * 4, vel=vel)
        assert metrics_report(log)["velocity_limit_violations"] == 2

    def test_collision_count(self, planar2):
        coll = np.array([False, True, True, False])
        log = _synthetic_log(planar2, [0.1] * 4, collision=coll)
        assert metrics_report(log)["collision_count"] == 2

    def test_orientation_stats_when_rotations_logged(self, planar2):
        log = _synthetic_log(planar2, [0.1] * 3, with_rot=True)
        rep = metrics_report(log)
        assert rep["final_orientation_error_pct"] == pytest.approx(0.0, abs=1e-9)
        log2 = _synthetic_log(planar2, [0.1] * 3)
        assert "final_orientation_error_pct" not in metrics_report(log2)


class TestCLI:
    def test_strategy_table(self):
        labels = [s[0] for s in FIG3_STRATEGIES]
        assert labels == ["halton_bspline", "halton_comb", "pseudorandom_comb"]
        assert FIG3_STRATEGIES[0][1:] == ("halton", "bspline")
        assert FIG3_STRATEGIES[2][1:] == ("pseudorandom", "comb")

    def test_parser_defaults(self):
        parser = make_parser()
        args, _ = parser.parse_known_args(["reach"])
        assert args.config == "reach_arm7.toml" and args.steps == 200
        args, _ = parser.parse_known_args(["fig3"])
        assert args.seeds == 10 and args.steps == 100
        args, _ = parser.parse_known_args(["bench"])
        assert args.workers == [1, 2, 4] and args.particles == [512]

    def test_overrides_pass_through(self):
        parser = make_parser()
        args, extras = parser.parse_known_args(
            ["reach", "--steps", "5", "--rollout.horizon=8"])
        assert args.steps == 5
        assert extras == ["--rollout.horizon=8"]

    def test_missing_config_exits_2(self, capsys):
        assert main(["reach", "--config", "no_such.toml"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_override_exits_2(self, capsys):
        assert main(["reach", "--config", "fig3.toml", "stray_positional"]) == 2
        capsys.readouterr()

    def test_resolve_config_accepts_fixture_names(self):
        cfg = resolve_config("fig3.toml")
        assert cfg.rollout.particles > 0


class TestInitialState:
    def test_start_vector_applied(self, planar2):
        cfg = config_from_dict({"target": {"start": [0.25, -0.5]}})
        st = initial_state(cfg, planar2)
        np.testing.assert_allclose(st.theta, [0.25, -0.5])
        np.testing.assert_allclose(st.theta_dot, 0.0)

    def test_wrong_length_rejected(self, planar2):
        cfg = config_from_dict({"target": {"start": [0.1, 0.2, 0.3]}})
        with pytest.raises(ConfigError):
            initial_state(cfg, planar2)
