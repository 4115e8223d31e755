"""Learned self-collision distance.

A small fully connected net regresses the capsule-oracle penetration
distance from a positional encoding of the joint vector. Keeping this in
plain numpy avoids a heavyweight dependency for what is a ~100k-parameter
model; training 50k samples takes a couple of minutes on one core.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, TrainingError
from .kinematics import KinematicChain

log = logging.getLogger(__name__)

HIDDEN = (256, 128, 64)


def positional_encoding(q: np.ndarray) -> np.ndarray:
    """[sin(q), cos(q)] along the last axis; wraps revolute angles onto the
    circle so the net never sees a discontinuity."""
    q = np.asarray(q, dtype=np.float64)
    return np.concatenate([np.sin(q), np.cos(q)], axis=-1)


class MLP:
    """ReLU net with linear output, weights He-initialized."""

    def __init__(self, in_dim: int, rng: np.random.Generator):
        dims = [in_dim, *HIDDEN, 1]
        self.weights = []
        self.biases = []
        for a, b in zip(dims[:-1], dims[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            self.biases.append(np.zeros(b))

    def forward(self, x: np.ndarray, keep: bool = False):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
            if keep:
                acts.append(h)
        return (h, acts) if keep else h

    def gradients(self, acts, dout):
        """Backprop of d(loss)/d(output) through the stored activations.
        Returns per-layer (dW, db) matching self.weights order."""
        grads = [None] * len(self.weights)
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = acts[i]
            grads[i] = (a_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return grads

    def state_dict(self) -> dict:
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        return out

    @classmethod
    def from_state(cls, state: dict) -> "MLP":
        net = cls.__new__(cls)
        net.weights = []
        net.biases = []
        i = 0
        while f"W{i}" in state:
            net.weights.append(np.asarray(state[f"W{i}"], dtype=np.float64))
            net.biases.append(np.asarray(state[f"b{i}"], dtype=np.float64))
            i += 1
        if not net.weights:
            raise ContractError("empty surrogate state")
        return net


class Adam:
    def __init__(self, params, lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class LearnedSelfCollision:
    """Provider wrapping the trained net. Immutable after training; shared
    freely across rollout workers."""

    net: MLP
    dof: int
    holdout_mae: float
    sign_agreement: float

    kind = "learned"

    def distance(self, q: np.ndarray, poses=None) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape[-1] != self.dof:
            raise ContractError(f"expected {self.dof} joints, got shape {q.shape}")
        x = positional_encoding(q.reshape(-1, self.dof))
        return self.net.forward(x)[:, 0].reshape(q.shape[:-1])

    def save(self, path):
        state = self.net.state_dict()
        state["dof"] = np.array(self.dof)
        state["holdout_mae"] = np.array(self.holdout_mae)
        state["sign_agreement"] = np.array(self.sign_agreement)
        np.savez(path, **state)

    @classmethod
    def load(cls, path) -> "LearnedSelfCollision":
        with np.load(path) as data:
            state = {k: data[k] for k in data.files}
        return cls(
            net=MLP.from_state(state),
            dof=int(state["dof"]),
            holdout_mae=float(state["holdout_mae"]),
            sign_agreement=float(state["sign_agreement"]),
        )


def train_collision_surrogate(
    chain: KinematicChain,
    samples: int,
    seed: int,
    epochs: int = 100,
    batch_size: int = 256,
    lr: float = 1e-3,
) -> LearnedSelfCollision:
    """Fit the net to oracle distances on uniform in-limit configurations.

    90/10 train/holdout split; Adam with the step size halved at epochs 50
    and 75. Non-finite loss aborts with the last finite value.
    """
    if samples < 1000:
        raise ContractError("need at least 1000 samples")
    if not chain.pair_a.size:
        raise ContractError(f"chain {chain.name!r} has no self-collision pairs")
    from .costs import OracleSelfCollision

    rng = np.random.default_rng(seed)
    q = rng.uniform(chain.joint_limits[:, 0], chain.joint_limits[:, 1], size=(samples, chain.dof))
    y = OracleSelfCollision(chain).distance(q)

    split = int(samples * 0.9)
    x_train = positional_encoding(q[:split])
    y_train = y[:split]
    x_hold = positional_encoding(q[split:])
    y_hold = y[split:]

    net = MLP(2 * chain.dof, rng)
    params = net.weights + net.biases
    opt = Adam(params, lr)
    last_loss = float("inf")

    for epoch in range(epochs):
        if epoch in (50, 75):
            opt.lr *= 0.5
        order = rng.permutation(split)
        for lo in range(0, split, batch_size):
            idx = order[lo : lo + batch_size]
            xb, yb = x_train[idx], y_train[idx]
            pred, acts = net.forward(xb, keep=True)
            err = pred[:, 0] - yb
            loss = float(np.mean(err * err))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch} (last finite {last_loss:.6g})",
                    last_loss=last_loss,
                )
            last_loss = loss
            dout = (2.0 / xb.shape[0]) * err[:, None]
            grads = net.gradients(acts, dout)
            # match the params layout: all weight grads, then all bias grads
            flat = [gw for gw, _ in grads] + [gb for _, gb in grads]
            opt.step(params, flat)

    resid = net.forward(x_hold)[:, 0] - y_hold
    mae = float(np.mean(np.abs(resid)))
    agree = float(np.mean((net.forward(x_hold)[:, 0] > 0.0) == (y_hold > 0.0)))
    log.info("surrogate trained: holdout MAE %.4f m, sign agreement %.3f", mae, agree)
    return LearnedSelfCollision(net=net, dof=chain.dof, holdout_mae=mae, sign_agreement=agree)
