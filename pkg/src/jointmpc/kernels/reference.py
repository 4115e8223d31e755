"""Pure-numpy kernel backend.

Vectorized over the flattened batch of joint configurations. This is the
fallback path used when numba is unavailable or disabled via
``JOINTMPC_NUMBA=0``; it is also the ground truth the jit backend is
tested against.

Conventions:
  * A chain of d joints yields d link frames. Link k's transform is
    T_k = T_{k-1} * Motion_k(q_k) * Origin_k, i.e. the fixed origin
    transform follows the joint motion and places the next frame at the
    distal end of link k. The end-effector frame is the last link frame.
  * Jacobians are geometric, linear rows stacked above angular rows.
"""

from __future__ import annotations

import numpy as np

from .shared import NO_CONTACT, POLAR_ITERS, REORTHO_EVERY, SEG_EPS, TERNARY_ITERS

BACKEND_NAME = "numpy"


def _skew(a):
    return np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )


def _inv33_batch(R):
    """Closed-form inverse of a (M,3,3) stack via the adjugate."""
    a, b, c = R[:, 0, 0], R[:, 0, 1], R[:, 0, 2]
    d, e, f = R[:, 1, 0], R[:, 1, 1], R[:, 1, 2]
    g, h, i = R[:, 2, 0], R[:, 2, 1], R[:, 2, 2]
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    out = np.empty_like(R)
    out[:, 0, 0] = (e * i - f * h) / det
    out[:, 0, 1] = (c * h - b * i) / det
    out[:, 0, 2] = (b * f - c * e) / det
    out[:, 1, 0] = (f * g - d * i) / det
    out[:, 1, 1] = (a * i - c * g) / det
    out[:, 1, 2] = (c * d - a * f) / det
    out[:, 2, 0] = (d * h - e * g) / det
    out[:, 2, 1] = (b * g - a * h) / det
    out[:, 2, 2] = (a * e - b * d) / det
    return out


def orthonormalize_batch(R):
    """Project a stack of near-rotations back onto SO(3).

    Newton iteration for the polar factor: R <- (R + R^-T) / 2. Converges
    quadratically for matrices already close to orthonormal, which is the
    only regime composition drift produces.
    """
    out = R
    for _ in range(POLAR_ITERS):
        out = 0.5 * (out + np.swapaxes(_inv33_batch(out), 1, 2))
    return out


def _axis_rotation(axis, angles):
    """Rodrigues rotation about a fixed unit axis for a vector of angles."""
    K = _skew(axis)
    K2 = K @ K
    s = np.sin(angles)[:, None, None]
    c = (1.0 - np.cos(angles))[:, None, None]
    return np.eye(3) + s * K + c * K2


def fk_batch(q, axes, origin_rot, origin_trans, jtype):
    """Forward kinematics over a (M,d) configuration batch.

    Returns (rot, trans) with shapes (M,d,3,3) and (M,d,3): the world pose
    of every link frame.
    """
    M, d = q.shape
    rot = np.empty((M, d, 3, 3))
    trans = np.empty((M, d, 3))
    Rw = np.repeat(np.eye(3)[None, :, :], M, axis=0)
    tw = np.zeros((M, 3))
    for k in range(d):
        if jtype[k] == 0:
            Rm = _axis_rotation(axes[k], q[:, k])
            Rmo = np.einsum("mij,jk->mik", Rm, origin_rot[k])
            tmo = np.einsum("mij,j->mi", Rm, origin_trans[k])
        else:
            Rmo = np.repeat(origin_rot[k][None, :, :], M, axis=0)
            tmo = q[:, k, None] * axes[k] + origin_trans[k]
        tw = tw + np.einsum("mij,mj->mi", Rw, tmo)
        Rw = np.einsum("mij,mjk->mik", Rw, Rmo)
        if (k + 1) % REORTHO_EVERY == 0:
            Rw = orthonormalize_batch(Rw)
        rot[:, k] = Rw
        trans[:, k] = tw
    return rot, trans


def jacobian_batch(q, rot, trans, axes, jtype):
    """Geometric Jacobian at the end-effector for each configuration.

    ``rot``/``trans`` are the link poses produced by :func:`fk_batch` for
    the same ``q``. Output shape (M,6,d), linear rows first.
    """
    M, d = q.shape
    J = np.zeros((M, 6, d))
    p_ee = trans[:, -1]
    for k in range(d):
        if k == 0:
            a = np.broadcast_to(axes[0], (M, 3))
            p = np.zeros((M, 3))
        else:
            a = np.einsum("mij,j->mi", rot[:, k - 1], axes[k])
            p = trans[:, k - 1]
        if jtype[k] == 0:
            J[:, 0:3, k] = np.cross(a, p_ee - p)
            J[:, 3:6, k] = a
        else:
            J[:, 0:3, k] = a
    return J


def manip_batch(J, task_dim):
    """Yoshikawa manipulability sqrt(det(Jp Jp^T)) over the position rows.

    Square Jp (task_dim degrees of freedom) reduces to |det(Jp)|, which is
    far better conditioned near singularities than the Gram determinant.
    """
    Jp = J[:, :task_dim, :]
    if Jp.shape[2] == task_dim:
        if task_dim == 2:
            det = Jp[:, 0, 0] * Jp[:, 1, 1] - Jp[:, 0, 1] * Jp[:, 1, 0]
        else:
            det = (
                Jp[:, 0, 0] * (Jp[:, 1, 1] * Jp[:, 2, 2] - Jp[:, 1, 2] * Jp[:, 2, 1])
                - Jp[:, 0, 1] * (Jp[:, 1, 0] * Jp[:, 2, 2] - Jp[:, 1, 2] * Jp[:, 2, 0])
                + Jp[:, 0, 2] * (Jp[:, 1, 0] * Jp[:, 2, 1] - Jp[:, 1, 1] * Jp[:, 2, 0])
            )
        return np.abs(det)
    G = np.einsum("mik,mjk->mij", Jp, Jp)
    if task_dim == 2:
        det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    else:
        det = (
            G[:, 0, 0] * (G[:, 1, 1] * G[:, 2, 2] - G[:, 1, 2] * G[:, 2, 1])
            - G[:, 0, 1] * (G[:, 1, 0] * G[:, 2, 2] - G[:, 1, 2] * G[:, 2, 0])
            + G[:, 0, 2] * (G[:, 1, 0] * G[:, 2, 1] - G[:, 1, 1] * G[:, 2, 0])
        )
    return np.sqrt(np.clip(det, 0.0, None))


def _segseg_dist(p0, p1, q0, q1):
    """Minimum distance between segment stacks of identical leading shape."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)

    a_pt = a <= SEG_EPS
    e_pt = e <= SEG_EPS
    safe_a = np.where(a_pt, 1.0, a)
    safe_e = np.where(e_pt, 1.0, e)

    denom = a * e - b * b
    s_gen = np.where(
        np.abs(denom) > SEG_EPS,
        (b * f - c * e) / np.where(np.abs(denom) > SEG_EPS, denom, 1.0),
        0.0,
    )
    s_gen = np.clip(s_gen, 0.0, 1.0)
    t_gen = (b * s_gen + f) / safe_e
    s_gen = np.where(
        t_gen < 0.0,
        np.clip(-c / safe_a, 0.0, 1.0),
        np.where(t_gen > 1.0, np.clip((b - c) / safe_a, 0.0, 1.0), s_gen),
    )
    t_gen = np.clip(t_gen, 0.0, 1.0)

    s = np.where(a_pt, 0.0, np.where(e_pt, np.clip(-c / safe_a, 0.0, 1.0), s_gen))
    t = np.where(a_pt, np.clip(f / safe_e, 0.0, 1.0), np.where(e_pt, 0.0, t_gen))
    s = np.where(a_pt & e_pt, 0.0, s)
    t = np.where(a_pt & e_pt, 0.0, t)

    cp = p0 + s[..., None] * d1
    cq = q0 + t[..., None] * d2
    return np.sqrt(np.sum((cp - cq) ** 2, axis=-1))


def _world_capsules(rot, trans, cap_p0, cap_p1, cap_link):
    Rl = rot[:, cap_link]
    tl = trans[:, cap_link]
    P0 = np.einsum("mcij,cj->mci", Rl, cap_p0) + tl
    P1 = np.einsum("mcij,cj->mci", Rl, cap_p1) + tl
    return P0, P1


def self_collision_batch(rot, trans, cap_p0, cap_p1, cap_r, cap_link, pair_a, pair_b):
    """Worst self-collision value per configuration.

    Value is r_i + r_j - dist(segment_i, segment_j), maximized over the
    capsule pairs; positive means penetration.
    """
    M = rot.shape[0]
    if len(pair_a) == 0:
        return np.full(M, NO_CONTACT)
    P0, P1 = _world_capsules(rot, trans, cap_p0, cap_p1, cap_link)
    dist = _segseg_dist(P0[:, pair_a], P1[:, pair_a], P0[:, pair_b], P1[:, pair_b])
    val = (cap_r[pair_a] + cap_r[pair_b])[None, :] - dist
    return val.max(axis=1)


def _point_box_dist(p, bmin, bmax):
    lo = np.maximum(bmin - p, 0.0)
    hi = np.maximum(p - bmax, 0.0)
    d = lo + hi
    return np.sqrt(np.sum(d * d, axis=-1))


def _seg_box_dist(p0, p1, bmin, bmax):
    """Segment/AABB distance via ternary search on the convex gap function."""
    lo = np.zeros(p0.shape[:-1])
    hi = np.ones(p0.shape[:-1])
    d = p1 - p0
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _point_box_dist(p0 + m1[..., None] * d, bmin, bmax)
        f2 = _point_box_dist(p0 + m2[..., None] * d, bmin, bmax)
        left = f1 <= f2
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    mid = 0.5 * (lo + hi)
    return _point_box_dist(p0 + mid[..., None] * d, bmin, bmax)


def env_collision_batch(rot, trans, cap_p0, cap_p1, cap_r, cap_link, spheres, boxes):
    """First colliding obstacle index per configuration, -1 when clear.

    Obstacles are indexed spheres first, then boxes. Contact is strict
    penetration: a tangent capsule does not collide.
    """
    M = rot.shape[0]
    hit = np.full(M, -1, dtype=np.int64)
    if len(cap_r) == 0 or (len(spheres) == 0 and len(boxes) == 0):
        return hit
    P0, P1 = _world_capsules(rot, trans, cap_p0, cap_p1, cap_link)
    d = P1 - P0
    dd = np.sum(d * d, axis=-1)
    safe_dd = np.where(dd <= SEG_EPS, 1.0, dd)
    for o in range(len(spheres)):
        ctr = spheres[o, :3]
        rad = spheres[o, 3]
        t = np.clip(np.sum((ctr - P0) * d, axis=-1) / safe_dd, 0.0, 1.0)
        t = np.where(dd <= SEG_EPS, 0.0, t)
        closest = P0 + t[..., None] * d
        dist = np.sqrt(np.sum((closest - ctr) ** 2, axis=-1))
        collide = np.any(dist < cap_r[None, :] + rad, axis=1)
        hit = np.where((hit < 0) & collide, o, hit)
    for ob in range(len(boxes)):
        bmin = boxes[ob, :3]
        bmax = boxes[ob, 3:]
        dist = _seg_box_dist(P0, P1, bmin, bmax)
        collide = np.any(dist < cap_r[None, :], axis=1)
        hit = np.where((hit < 0) & collide, len(spheres) + ob, hit)
    return hit


def integrate_batch(u, dts, th0, thd0):
    """Semi-implicit Euler rollout of a control batch.

    Implements the batched triangular-weight form: velocities and positions
    are cumulative dt-weighted sums that include the current step.
    """
    H = dts.shape[0]
    W = np.tril(np.ones((H, H))) * dts[None, :]
    vel = thd0[None, None, :] + np.einsum("hj,njd->nhd", W, u)
    pos = th0[None, None, :] + np.einsum("hj,njd->nhd", W, vel)
    return pos, vel
