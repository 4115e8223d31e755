"""Control-perturbation sampling.

Pipeline: low-discrepancy (or pseudorandom) points in the unit cube, mapped
through the inverse normal CDF to standard-normal knot values, smoothed along
the horizon (B-spline subsampling or a causal comb filter), then shaped by the
current policy mean/covariance. Smoothing happens on the standard-normal knot
values, before the affine transform.

Null particles (all-zero acceleration) and one reserved unperturbed mean
sequence are injected so the batch always contains "hold still" and "keep
doing the incumbent plan" candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, PolicyStateError
from .policy import PolicyParams

HALTON = "halton"
PSEUDORANDOM = "pseudorandom"

# First 40 primes; one per sampled dimension.
PRIMES = np.array(
    [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29,
        31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
        73, 79, 83, 89, 97, 101, 103, 107, 109, 113,
        127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class UnitSampleSet:
    """Points in [0,1)^d, one knot vector per (particle, knot) slot."""

    values: np.ndarray  # (N, K, d)
    generator_tag: str


@dataclass(frozen=True)
class SmoothingSpec:
    mode: str = "bspline"  # bspline | comb | none
    spline_degree: int = 3
    comb_coeffs: tuple = (0.3, 0.4, 0.3)
    knots_per_horizon: int = 0  # 0 = derive from horizon

    def __post_init__(self):
        if self.mode not in ("bspline", "comb", "none"):
            raise ConfigError(f"unknown smoothing mode {self.mode!r}")
        if self.spline_degree < 1:
            raise ConfigError("spline degree must be >= 1")
        if len(self.comb_coeffs) != 3:
            raise ConfigError("comb filter takes exactly three coefficients")

    def knot_count(self, horizon: int) -> int:
        """Knot slots the generator must fill for a given horizon."""
        if self.mode == "bspline":
            k = self.knots_per_horizon or default_knot_count(horizon, self.spline_degree)
            if k < self.spline_degree + 1:
                raise ConfigError(
                    f"bspline needs at least degree+1={self.spline_degree + 1} knots, got {k}"
                )
            return k
        # comb and none operate on full-resolution sequences
        return horizon


@dataclass(frozen=True)
class ControlBatch:
    """Joint-acceleration sequences, (N, H, d). The first null_count rows are
    identically zero; row null_count is the unperturbed policy mean."""

    controls: np.ndarray
    null_count: int


def default_knot_count(horizon: int, degree: int = 3) -> int:
    # roughly one knot per six steps, never fewer than the degree allows
    return max(degree + 1, math.ceil(horizon / 6))


def _radical_inverse(index: int, base: int) -> float:
    # digit reversal in exact integer arithmetic, one correctly-rounded divide
    num = 0
    denom = 1
    while index > 0:
        num = num * base + index % base
        denom *= base
        index //= base
    return num / denom


def halton_points(count: int, dims: int) -> np.ndarray:
    """Rows 0..count-1 of the Halton sequence, skipping the all-zeros point.

    Row i, column j is the base-p_j radical inverse of i+1, with p_j the j-th
    prime. Deterministic: same arguments, bit-identical output.
    """
    if count < 1:
        raise ContractError("count must be >= 1")
    if dims > len(PRIMES):
        raise ConfigError(f"halton supports at most {len(PRIMES)} dims, got {dims}")
    out = np.empty((count, dims), dtype=np.float64)
    for j in range(dims):
        base = int(PRIMES[j])
        for i in range(count):
            out[i, j] = _radical_inverse(i + 1, base)
    return out


def unit_samples(
    particles: int,
    knots: int,
    dims: int,
    generator: str,
    rng: np.random.Generator | None = None,
) -> UnitSampleSet:
    """A (particles, knots, dims) block of unit-cube points.

    Halton indices run particle-major: each particle owns a contiguous run of
    the sequence, so its knot values sweep the cube instead of freezing into
    one radical-inverse digit band (a stride-s slice of a base-b van der
    Corput sequence pins the low digits whenever b divides s, and the batch
    size is usually even). The leftover cost is a deterministic offset per
    across-particle slice when the knot count shares a factor with a base;
    the controller subtracts that offset from its once-drawn set.
    """
    if generator == HALTON:
        values = halton_points(particles * knots, dims).reshape(particles, knots, dims)
    elif generator == PSEUDORANDOM:
        if rng is None:
            raise ContractError("pseudorandom generator requires an rng")
        values = rng.random((particles, knots, dims))
    else:
        raise ConfigError(f"unknown sample generator {generator!r}")
    return UnitSampleSet(values=values, generator_tag=generator)


# Rational approximation of the inverse standard-normal CDF (Acklam),
# absolute error < 1.5e-7 over (0, 1).
_ICDF_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ICDF_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ICDF_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ICDF_D = (
    7.784695709041462e-03, 3.224671290700398e-01,
    2.445134137142996e00, 3.754408661907416e00,
)
_ICDF_PLOW = 0.02425


def gaussianize(unit) -> np.ndarray:
    """Map unit-cube samples to standard-normal deviates elementwise.

    Inverse-CDF rather than Box-Muller so the low-discrepancy structure of the
    input survives the transform. Zeros are nudged to the smallest positive
    double before inversion.
    """
    p = np.asarray(getattr(unit, "values", unit), dtype=np.float64)
    if np.any(p < 0.0) or np.any(p >= 1.0):
        raise ContractError("unit samples must lie in [0, 1)")
    p = np.where(p == 0.0, np.nextafter(0.0, 1.0), p)

    a, b, c, d = _ICDF_A, _ICDF_B, _ICDF_C, _ICDF_D
    out = np.empty_like(p)

    low = p < _ICDF_PLOW
    high = p > 1.0 - _ICDF_PLOW
    mid = ~(low | high)

    q = np.sqrt(-2.0 * np.log(p[low]))
    out[low] = (
        ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
    ) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)

    q = p[mid] - 0.5
    r = q * q
    out[mid] = (
        ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
    ) * q / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)

    q = np.sqrt(-2.0 * np.log(1.0 - p[high]))
    out[high] = -(
        ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
    ) / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)

    return out


def bspline_basis(horizon: int, knot_count: int, degree: int) -> np.ndarray:
    """(horizon, knot_count) design matrix of a clamped uniform B-spline
    evaluated at horizon equally spaced parameters in [0, 1]."""
    if knot_count < degree + 1:
        raise ConfigError(
            f"bspline of degree {degree} needs at least {degree + 1} control points"
        )
    interior = np.linspace(0.0, 1.0, knot_count - degree + 1)[1:-1]
    kv = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    ts = np.linspace(0.0, 1.0, horizon)

    basis = np.zeros((horizon, knot_count))
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    for hi, t in enumerate(ts):
        if t >= 1.0:
            span = knot_count - 1
        else:
            span = int(np.searchsorted(kv, t, side="right")) - 1
        # Cox-de Boor triangular recurrence over the degree+1 active functions
        vals = np.zeros(degree + 1)
        vals[0] = 1.0
        for j in range(1, degree + 1):
            left[j] = t - kv[span + 1 - j]
            right[j] = kv[span + j] - t
            saved = 0.0
            for r in range(j):
                tmp = vals[r] / (right[r + 1] + left[j - r])
                vals[r] = saved + right[r + 1] * tmp
                saved = left[j - r] * tmp
            vals[j] = saved
        basis[hi, span - degree : span + 1] = vals
    return basis


def smooth_sequences(knot_values: np.ndarray, spec: SmoothingSpec, horizon: int) -> np.ndarray:
    """Turn (N, K, d) knot values into (N, horizon, d) perturbation sequences."""
    x = np.asarray(knot_values, dtype=np.float64)
    if x.ndim != 3:
        raise ContractError("knot values must be (N, K, d)")
    k = x.shape[1]

    if spec.mode == "none":
        if k != horizon:
            raise ContractError(f"identity smoothing expects K == H, got K={k} H={horizon}")
        return x

    if spec.mode == "comb":
        if k != horizon:
            raise ContractError(f"comb filter expects K == H, got K={k} H={horizon}")
        c1, c2, c3 = spec.comb_coeffs
        out = c1 * x
        out[:, 1:] += c2 * x[:, :-1]
        out[:, 2:] += c3 * x[:, :-2]
        return out

    expected = spec.knot_count(horizon)
    if k != expected:
        raise ContractError(f"bspline smoothing expects K={expected}, got {k}")
    basis = bspline_basis(horizon, k, spec.spline_degree)
    return np.einsum("hk,nkd->nhd", basis, x)


def build_control_batch(
    perturbations: np.ndarray, policy: PolicyParams, null_count: int
) -> ControlBatch:
    """Shape standard-normal perturbations by the policy and inject the fixed
    rows: [0, null_count) all-zero, row null_count = the exact mean."""
    eps = np.asarray(perturbations, dtype=np.float64)
    n = eps.shape[0]
    if eps.ndim != 3 or eps.shape[1] != policy.horizon or eps.shape[2] != policy.dof:
        raise ContractError(
            f"perturbations shape {eps.shape} does not match policy "
            f"(H={policy.horizon}, d={policy.dof})"
        )
    if not (0 <= null_count < n):
        raise ContractError(f"null_count {null_count} out of range for N={n}")
    if np.any(policy.variances <= 0.0):
        raise PolicyStateError("covariance entries must be positive")

    controls = policy.means[None, :, :] + policy.stddev()[None, :, :] * eps
    controls[:null_count] = 0.0
    controls[null_count] = policy.means
    if not np.all(np.isfinite(controls)):
        raise ContractError("control batch contains non-finite entries")
    return ControlBatch(controls=controls, null_count=null_count)
