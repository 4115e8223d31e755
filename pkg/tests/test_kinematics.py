"""Forward kinematics, Jacobians, manipulability, and chain loading."""

import json

import numpy as np
import pytest

from jointmpc.errors import ChainError
from jointmpc.kinematics import (
    FIXTURES,
    chain_from_dict,
    fk_batch,
    forward_kinematics,
    jacobian,
    jacobian_batch,
    load_chain,
    manipulability,
    manipulability_batch,
    self_collision_batch,
)
from conftest import random_q


def _fd_jacobian(chain, q, h=1e-7):
    """Central-difference position Jacobian, the analytic check's oracle."""
    d = chain.dof
    J = np.zeros((3, d))
    for k in range(d):
        dq = np.zeros(d)
        dq[k] = h
        hi, _ = forward_kinematics(chain, q + dq)
        lo, _ = forward_kinematics(chain, q - dq)
        J[:, k] = (hi.translation - lo.translation) / (2 * h)
    return J


class TestForwardKinematics:
    def test_planar2_stretched(self, planar2):
        pose, links = forward_kinematics(planar2, np.zeros(2))
        np.testing.assert_allclose(pose.translation, [2.0, 0.0, 0.0], atol=1e-12)
        assert len(links) == 2

    def test_planar2_right_angle(self, planar2):
        pose, _ = forward_kinematics(planar2, [0.0, np.pi / 2])
        np.testing.assert_allclose(pose.translation, [1.0, 1.0, 0.0], atol=1e-12)

    def test_planar2_folded(self, planar2):
        pose, _ = forward_kinematics(planar2, [0.0, np.pi])
        np.testing.assert_allclose(pose.translation, [0.0, 0.0, 0.0], atol=1e-12)

    def test_base_rotation_rotates_ee(self, planar2, rng):
        q = random_q(planar2, rng)
        pose0, _ = forward_kinematics(planar2, q)
        a = 0.3
        pose1, _ = forward_kinematics(planar2, q + np.array([a, 0.0]))
        c, s = np.cos(a), np.sin(a)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        np.testing.assert_allclose(pose1.translation, R @ pose0.translation, atol=1e-12)

    def test_rotation_matrices_orthonormal(self, arm7, rng):
        q = random_q(arm7, rng, n=8)
        rot, _ = fk_batch(arm7, q)
        eye = np.einsum("nlij,nlkj->nlik", rot, rot)
        np.testing.assert_allclose(eye, np.broadcast_to(np.eye(3), eye.shape), atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(rot), 1.0, atol=1e-12)

    def test_batch_matches_single(self, arm7, rng):
        q = random_q(arm7, rng, n=5)
        rot, trans = fk_batch(arm7, q)
        for i in range(5):
            pose, links = forward_kinematics(arm7, q[i])
            np.testing.assert_allclose(trans[i, -1], pose.translation, atol=1e-12)
            np.testing.assert_allclose(rot[i, -1], pose.rotation, atol=1e-12)
            for li, link in enumerate(links):
                np.testing.assert_allclose(trans[i, li], link.translation, atol=1e-12)

    def test_prismatic_translates(self, slider1):
        pose_a, _ = forward_kinematics(slider1, [0.2])
        pose_b, _ = forward_kinematics(slider1, [0.7])
        np.testing.assert_allclose(pose_b.translation - pose_a.translation,
                                   [0.5, 0.0, 0.0], atol=1e-12)


class TestJacobian:
    @pytest.mark.parametrize("fixture", ["planar2", "arm7"])
    def test_against_finite_differences(self, fixture, request, rng):
        chain = request.getfixturevalue(fixture)
        for q in random_q(chain, rng, n=50):
            J = jacobian(chain, q)[:3]
            Jfd = _fd_jacobian(chain, q)
            scale = max(1.0, np.abs(Jfd).max())
            assert np.abs(J - Jfd).max() / scale < 1e-5

    def test_batch_matches_single(self, arm7, rng):
        q = random_q(arm7, rng, n=6)
        Jb = jacobian_batch(arm7, q)
        for i in range(6):
            np.testing.assert_allclose(Jb[i], jacobian(arm7, q[i]), atol=1e-12)

    def test_planar2_closed_form(self, planar2):
        # l1 = l2 = 1: standard two-link position Jacobian
        q1, q2 = 0.4, 0.7
        J = jacobian(planar2, [q1, q2])[:2]
        s1, c1 = np.sin(q1), np.cos(q1)
        s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
        want = np.array([[-s1 - s12, -s12], [c1 + c12, c12]])
        np.testing.assert_allclose(J, want, atol=1e-12)


class TestManipulability:
    def test_planar2_closed_form_sweep(self, planar2):
        for q2 in np.linspace(-3.0, 3.0, 61):
            m = manipulability(planar2, [0.3, q2])
            assert m == pytest.approx(abs(np.sin(q2)), abs=1e-9)

    def test_zero_at_singularity(self, planar2):
        assert manipulability(planar2, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)

    def test_batch_matches_single(self, arm7, rng):
        q = random_q(arm7, rng, n=8)
        mb = manipulability_batch(arm7, q)
        for i in range(8):
            assert mb[i] == pytest.approx(manipulability(arm7, q[i]), rel=1e-9)

    def test_base_rotation_invariant(self, arm7, rng):
        # spinning the first joint leaves the ellipsoid volume unchanged
        q = random_q(arm7, rng)
        m0 = manipulability(arm7, q)
        q[0] += 0.9
        assert manipulability(arm7, q) == pytest.approx(m0, rel=1e-9)


class TestSelfCollision:
    def test_planar2_fold_penetrates(self, planar2):
        val_open = self_collision_batch(planar2, np.array([[0.0, 1.5]]))[0]
        val_fold = self_collision_batch(planar2, np.array([[0.0, 3.05]]))[0]
        assert val_open < 0.0  # clear
        assert val_fold > val_open  # folding brings the capsules together

    def test_no_pairs_reports_no_contact(self, slider1):
        val = self_collision_batch(slider1, np.array([[0.1]]))
        assert val[0] < -1e29


class TestChainLoading:
    def test_all_fixtures_load(self):
        for f in FIXTURES.glob("*.chain"):
            chain = load_chain(f)
            assert chain.dof >= 1

    def test_non_unit_axis_rejected(self):
        data = json.loads((FIXTURES / "slider1.chain").read_text())
        data["joints"][0]["axis"] = [0.0, 0.0, 2.0]
        with pytest.raises(ChainError):
            chain_from_dict(data)

    def test_pair_index_out_of_range_rejected(self):
        data = json.loads((FIXTURES / "planar2.chain").read_text())
        data["self_collision_pairs"] = [[0, 9]]
        with pytest.raises(ChainError):
            chain_from_dict(data)

    def test_missing_file_errors(self, tmp_path):
        with pytest.raises(ChainError):
            load_chain(tmp_path / "nope.chain")
