"""Learned self-collision provider: encoding, backprop, persistence."""

import numpy as np
import pytest

from jointmpc.costs import OracleSelfCollision
from jointmpc.errors import ContractError
from jointmpc.surrogate import (
    MLP,
    LearnedSelfCollision,
    positional_encoding,
    train_collision_surrogate,
)


class TestEncoding:
    def test_shape_doubles(self, rng):
        q = rng.normal(size=(7, 3))
        assert positional_encoding(q).shape == (7, 6)

    def test_periodic(self, rng):
        q = rng.normal(size=(5, 4))
        np.testing.assert_allclose(
            positional_encoding(q), positional_encoding(q + 2 * np.pi), atol=1e-12
        )

    def test_values(self):
        enc = positional_encoding(np.array([[0.0, np.pi / 2]]))
        np.testing.assert_allclose(enc, [[0.0, 1.0, 1.0, 0.0]], atol=1e-12)


class TestBackprop:
    def test_gradients_match_finite_differences(self, rng):
        net = MLP(4, rng)
        x = rng.normal(size=(8, 4))
        y = rng.normal(size=8)

        def loss():
            pred = net.forward(x)[:, 0]
            return float(np.mean((pred - y) ** 2))

        pred, acts = net.forward(x, keep=True)
        err = pred[:, 0] - y
        dout = (2.0 / x.shape[0]) * err[:, None]
        grads = net.gradients(acts, dout)

        h = 1e-6
        check = rng  # reuse the fixture stream for index picks
        for layer in range(len(net.weights)):
            W = net.weights[layer]
            for _ in range(4):
                i = int(check.integers(W.shape[0]))
                j = int(check.integers(W.shape[1]))
                old = W[i, j]
                W[i, j] = old + h
                lp = loss()
                W[i, j] = old - h
                lm = loss()
                W[i, j] = old
                fd = (lp - lm) / (2 * h)
                assert grads[layer][0][i, j] == pytest.approx(fd, abs=1e-4)
            b = net.biases[layer]
            j = int(check.integers(b.shape[0]))
            old = b[j]
            b[j] = old + h
            lp = loss()
            b[j] = old - h
            lm = loss()
            b[j] = old
            fd = (lp - lm) / (2 * h)
            assert grads[layer][1][j] == pytest.approx(fd, abs=1e-4)

    def test_from_state_rejects_empty(self):
        with pytest.raises(ContractError):
            MLP.from_state({})


@pytest.fixture(scope="module")
def trained(planar2):
    return train_collision_surrogate(planar2, samples=2000, seed=0, epochs=20)


class TestTraining:
    def test_beats_constant_predictor(self, trained, planar2):
        rng = np.random.default_rng(99)
        q = rng.uniform(planar2.joint_limits[:, 0], planar2.joint_limits[:, 1],
                        size=(500, planar2.dof))
        y = OracleSelfCollision(planar2).distance(q)
        pred = trained.distance(q)
        mae = np.mean(np.abs(pred - y))
        const = np.mean(np.abs(y.mean() - y))
        assert mae < const
        assert trained.sign_agreement > 0.7

    def test_distance_shape_routing(self, trained, rng):
        q2 = rng.normal(size=(6, 2))
        assert trained.distance(q2).shape == (6,)
        q3 = rng.normal(size=(3, 4, 2))
        assert trained.distance(q3).shape == (3, 4)
        with pytest.raises(ContractError):
            trained.distance(rng.normal(size=(5, 3)))

    def test_save_load_round_trip(self, trained, tmp_path, rng):
        path = tmp_path / "net.npz"
        trained.save(path)
        back = LearnedSelfCollision.load(path)
        q = rng.normal(size=(20, 2))
        np.testing.assert_array_equal(trained.distance(q), back.distance(q))
        assert back.dof == trained.dof
        assert back.holdout_mae == trained.holdout_mae
        assert back.sign_agreement == trained.sign_agreement

    def test_sample_floor(self, planar2):
        with pytest.raises(ContractError):
            train_collision_surrogate(planar2, samples=10, seed=0)

    def test_needs_pairs(self, slider1):
        with pytest.raises(ContractError):
            train_collision_surrogate(slider1, samples=2000, seed=0)
