"""Time-indexed Gaussian policy over open-loop joint accelerations.

The policy is a sequence of independent Gaussians, one per horizon step, with
diagonal (or isotropic) covariance. Updates follow the exponentiated-utility
weighting scheme: low-cost particles pull the mean, empirical spread drives
the covariance, and a shift operator hot-starts the next solve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, PolicyStateError

ISOTROPIC = "isotropic"
PER_JOINT = "per_joint_diagonal"


@dataclass
class PolicyParams:
    """Gaussian policy state.

    means: (H, d) accelerations in rad/s^2.
    variances: (H, d) for per-joint diagonal mode, (H,) for isotropic.
    tail_variance: value appended when the sequence is shifted (the initial
    variance from config, so exploration never dies at the horizon tail).
    """

    means: np.ndarray
    variances: np.ndarray
    mode: str
    tail_variance: float

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.mode not in (ISOTROPIC, PER_JOINT):
            raise ContractError(f"unknown policy mode {self.mode!r}")
        if self.means.ndim != 2:
            raise ContractError("policy means must be (H, d)")
        want = self.means.shape if self.mode == PER_JOINT else (self.means.shape[0],)
        if self.variances.shape != want:
            raise ContractError(
                f"variances shape {self.variances.shape} does not match mode "
                f"{self.mode!r} (want {want})"
            )
        if np.any(self.variances <= 0.0):
            raise PolicyStateError("policy variances must be positive")

    @property
    def horizon(self) -> int:
        return self.means.shape[0]

    @property
    def dof(self) -> int:
        return self.means.shape[1]

    def stddev(self) -> np.ndarray:
        """Per-step standard deviation, broadcast to (H, d)."""
        if self.mode == ISOTROPIC:
            return np.sqrt(self.variances)[:, None] * np.ones((1, self.dof))
        return np.sqrt(self.variances)


@dataclass(frozen=True)
class UpdateConfig:
    beta: float = 0.5
    alpha_mu: float = 0.9
    alpha_sigma: float = 0.5
    gamma: float = 0.99
    sigma_sq_min: float = 1e-4
    sigma_sq_max: float = float("inf")
    default_tail: float = 0.0

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ContractError("beta must be positive")
        if not (0.0 < self.alpha_mu <= 1.0 and 0.0 < self.alpha_sigma <= 1.0):
            raise ContractError("step sizes must lie in (0, 1]")
        if not (0.0 <= self.gamma <= 1.0):
            raise ContractError("gamma must lie in [0, 1]")
        if self.sigma_sq_min > self.sigma_sq_max:
            raise ContractError("sigma_sq_min exceeds sigma_sq_max")


def make_policy(horizon: int, dof: int, sigma0_sq: float, mode: str = PER_JOINT) -> PolicyParams:
    """Zero-mean policy with uniform initial variance sigma0_sq."""
    means = np.zeros((horizon, dof))
    if mode == ISOTROPIC:
        variances = np.full(horizon, sigma0_sq)
    else:
        variances = np.full((horizon, dof), sigma0_sq)
    return PolicyParams(means=means, variances=variances, mode=mode, tail_variance=sigma0_sq)


def _controls_array(controls) -> np.ndarray:
    # accepts a ControlBatch or a bare (N, H, d) array
    return np.asarray(getattr(controls, "controls", controls), dtype=np.float64)


def particle_weights(totals: np.ndarray, beta: float) -> np.ndarray:
    """Exponentiated-utility weights w_i = exp(-(total_i - min)/beta).

    The min-total baseline is subtracted for numerical stability; weights only
    ever enter as ratios, so the update equations are unchanged. Quarantined
    particles (+inf total) get weight exactly zero.
    """
    totals = np.asarray(totals, dtype=np.float64)
    finite = np.isfinite(totals)
    if not finite.any():
        raise PolicyStateError("all particles quarantined; no finite costs")
    w = np.zeros_like(totals)
    base = totals[finite].min()
    w[finite] = np.exp(-(totals[finite] - base) / beta)
    if w.sum() <= 0.0:
        raise PolicyStateError(
            "all particle weights underflowed to zero; increase beta"
        )
    return w


def update_mean(policy: PolicyParams, controls, weights: np.ndarray, alpha_mu: float) -> PolicyParams:
    u = _controls_array(controls)
    w = np.asarray(weights, dtype=np.float64)
    wsum = w.sum()
    if wsum <= 0.0:
        raise PolicyStateError("weight sum must be positive")
    avg = np.einsum("n,nhd->hd", w, u) / wsum
    means = (1.0 - alpha_mu) * policy.means + alpha_mu * avg
    return replace(policy, means=means)


def update_covariance(
    policy: PolicyParams, controls, weights: np.ndarray, alpha_sigma: float, cfg: UpdateConfig
) -> PolicyParams:
    """Blend previous variances with the weighted empirical spread.

    Deviations are taken around the policy's current mean, so call this with
    the freshly mean-updated policy. Result is clamped to the config floor and
    ceiling so exploration can neither collapse nor blow up.
    """
    u = _controls_array(controls)
    w = np.asarray(weights, dtype=np.float64)
    wsum = w.sum()
    if wsum <= 0.0:
        raise PolicyStateError("weight sum must be positive")
    dev = u - policy.means[None, :, :]
    emp = np.einsum("n,nhd->hd", w, dev * dev) / wsum
    if policy.mode == ISOTROPIC:
        emp = emp.mean(axis=1)
    variances = (1.0 - alpha_sigma) * policy.variances + alpha_sigma * emp
    variances = np.clip(variances, cfg.sigma_sq_min, cfg.sigma_sq_max)
    return replace(policy, variances=variances)


def shift(policy: PolicyParams, default_tail: float = 0.0) -> PolicyParams:
    """Advance the sequences one step; append default_tail acceleration and
    the initial variance at the horizon end."""
    means = np.empty_like(policy.means)
    means[:-1] = policy.means[1:]
    means[-1] = default_tail
    variances = np.empty_like(policy.variances)
    variances[:-1] = policy.variances[1:]
    variances[-1] = policy.tail_variance
    return replace(policy, means=means, variances=variances)


def next_command(policy: PolicyParams, mode: str = "mean", rng: np.random.Generator | None = None) -> np.ndarray:
    if mode == "mean":
        return policy.means[0].copy()
    if mode == "sample":
        if rng is None:
            raise ContractError("sample mode requires an rng")
        return rng.normal(policy.means[0], policy.stddev()[0])
    raise ContractError(f"unknown command mode {mode!r}")
