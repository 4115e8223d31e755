"""Numba kernel backend.

Loop formulations of the reference kernels, compiled with ``@njit`` and
``nogil=True`` so rollout workers scale across threads. Numerics follow
reference.py operation for operation; the equivalence suite holds the two
backends together.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .shared import NO_CONTACT, POLAR_ITERS, REORTHO_EVERY, SEG_EPS, TERNARY_ITERS

BACKEND_NAME = "numba"

_JIT = dict(nogil=True, cache=True)


@njit(**_JIT)
def _mat33_mul(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@njit(**_JIT)
def _mat33_vec(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@njit(**_JIT)
def _inv33(R):
    a, b, c = R[0, 0], R[0, 1], R[0, 2]
    d, e, f = R[1, 0], R[1, 1], R[1, 2]
    g, h, i = R[2, 0], R[2, 1], R[2, 2]
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    out = np.empty((3, 3))
    out[0, 0] = (e * i - f * h) / det
    out[0, 1] = (c * h - b * i) / det
    out[0, 2] = (b * f - c * e) / det
    out[1, 0] = (f * g - d * i) / det
    out[1, 1] = (a * i - c * g) / det
    out[1, 2] = (c * d - a * f) / det
    out[2, 0] = (d * h - e * g) / det
    out[2, 1] = (b * g - a * h) / det
    out[2, 2] = (a * e - b * d) / det
    return out


@njit(**_JIT)
def _orthonormalize(R):
    out = R.copy()
    for _ in range(POLAR_ITERS):
        inv = _inv33(out)
        nxt = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                nxt[i, j] = 0.5 * (out[i, j] + inv[j, i])
        out = nxt
    return out


@njit(**_JIT)
def _axis_rotation(axis, angle):
    ax, ay, az = axis[0], axis[1], axis[2]
    s = np.sin(angle)
    c = 1.0 - np.cos(angle)
    # I + s*K + c*K^2 with K the skew matrix of the axis
    out = np.empty((3, 3))
    out[0, 0] = 1.0 + c * (-az * az - ay * ay)
    out[0, 1] = -s * az + c * (ax * ay)
    out[0, 2] = s * ay + c * (ax * az)
    out[1, 0] = s * az + c * (ax * ay)
    out[1, 1] = 1.0 + c * (-az * az - ax * ax)
    out[1, 2] = -s * ax + c * (ay * az)
    out[2, 0] = -s * ay + c * (ax * az)
    out[2, 1] = s * ax + c * (ay * az)
    out[2, 2] = 1.0 + c * (-ay * ay - ax * ax)
    return out


@njit(**_JIT)
def fk_batch(q, axes, origin_rot, origin_trans, jtype):
    M, d = q.shape
    rot = np.empty((M, d, 3, 3))
    trans = np.empty((M, d, 3))
    for m in range(M):
        Rw = np.eye(3)
        tw = np.zeros(3)
        for k in range(d):
            if jtype[k] == 0:
                Rm = _axis_rotation(axes[k], q[m, k])
                Rmo = _mat33_mul(Rm, origin_rot[k])
                tmo = _mat33_vec(Rm, origin_trans[k])
            else:
                Rmo = origin_rot[k].copy()
                tmo = q[m, k] * axes[k] + origin_trans[k]
            tw = tw + _mat33_vec(Rw, tmo)
            Rw = _mat33_mul(Rw, Rmo)
            if (k + 1) % REORTHO_EVERY == 0:
                Rw = _orthonormalize(Rw)
            rot[m, k] = Rw
            trans[m, k] = tw
    return rot, trans


@njit(**_JIT)
def jacobian_batch(q, rot, trans, axes, jtype):
    M, d = q.shape
    J = np.zeros((M, 6, d))
    for m in range(M):
        ex = trans[m, d - 1, 0]
        ey = trans[m, d - 1, 1]
        ez = trans[m, d - 1, 2]
        for k in range(d):
            if k == 0:
                ax, ay, az = axes[0, 0], axes[0, 1], axes[0, 2]
                px = 0.0
                py = 0.0
                pz = 0.0
            else:
                a = _mat33_vec(rot[m, k - 1], axes[k])
                ax, ay, az = a[0], a[1], a[2]
                px = trans[m, k - 1, 0]
                py = trans[m, k - 1, 1]
                pz = trans[m, k - 1, 2]
            if jtype[k] == 0:
                rx = ex - px
                ry = ey - py
                rz = ez - pz
                J[m, 0, k] = ay * rz - az * ry
                J[m, 1, k] = az * rx - ax * rz
                J[m, 2, k] = ax * ry - ay * rx
                J[m, 3, k] = ax
                J[m, 4, k] = ay
                J[m, 5, k] = az
            else:
                J[m, 0, k] = ax
                J[m, 1, k] = ay
                J[m, 2, k] = az
    return J


@njit(**_JIT)
def manip_batch(J, task_dim):
    M = J.shape[0]
    d = J.shape[2]
    out = np.empty(M)
    for m in range(M):
        if d == task_dim:
            # square position Jacobian: |det| directly, well conditioned
            if task_dim == 2:
                det = J[m, 0, 0] * J[m, 1, 1] - J[m, 0, 1] * J[m, 1, 0]
            else:
                det = (
                    J[m, 0, 0] * (J[m, 1, 1] * J[m, 2, 2] - J[m, 1, 2] * J[m, 2, 1])
                    - J[m, 0, 1] * (J[m, 1, 0] * J[m, 2, 2] - J[m, 1, 2] * J[m, 2, 0])
                    + J[m, 0, 2] * (J[m, 1, 0] * J[m, 2, 1] - J[m, 1, 1] * J[m, 2, 0])
                )
            out[m] = abs(det)
            continue
        G = np.zeros((task_dim, task_dim))
        for i in range(task_dim):
            for j in range(task_dim):
                acc = 0.0
                for k in range(d):
                    acc += J[m, i, k] * J[m, j, k]
                G[i, j] = acc
        if task_dim == 2:
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        else:
            det = (
                G[0, 0] * (G[1, 1] * G[2, 2] - G[1, 2] * G[2, 1])
                - G[0, 1] * (G[1, 0] * G[2, 2] - G[1, 2] * G[2, 0])
                + G[0, 2] * (G[1, 0] * G[2, 1] - G[1, 1] * G[2, 0])
            )
        out[m] = np.sqrt(max(det, 0.0))
    return out


@njit(**_JIT)
def _segseg_dist(p0, p1, q0, q1):
    d1x, d1y, d1z = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    d2x, d2y, d2z = q1[0] - q0[0], q1[1] - q0[1], q1[2] - q0[2]
    rx, ry, rz = p0[0] - q0[0], p0[1] - q0[1], p0[2] - q0[2]
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    c = d1x * rx + d1y * ry + d1z * rz
    b = d1x * d2x + d1y * d2y + d1z * d2z

    if a <= SEG_EPS and e <= SEG_EPS:
        s = 0.0
        t = 0.0
    elif a <= SEG_EPS:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    elif e <= SEG_EPS:
        t = 0.0
        s = min(max(-c / a, 0.0), 1.0)
    else:
        denom = a * e - b * b
        if abs(denom) > SEG_EPS:
            s = min(max((b * f - c * e) / denom, 0.0), 1.0)
        else:
            s = 0.0
        t = (b * s + f) / e
        if t < 0.0:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        elif t > 1.0:
            t = 1.0
            s = min(max((b - c) / a, 0.0), 1.0)
        t = min(max(t, 0.0), 1.0)

    cx = p0[0] + s * d1x - (q0[0] + t * d2x)
    cy = p0[1] + s * d1y - (q0[1] + t * d2y)
    cz = p0[2] + s * d1z - (q0[2] + t * d2z)
    return np.sqrt(cx * cx + cy * cy + cz * cz)


@njit(**_JIT)
def _capsule_world(rot, trans, cap_p0, cap_p1, cap_link, m):
    C = cap_link.shape[0]
    P0 = np.empty((C, 3))
    P1 = np.empty((C, 3))
    for ci in range(C):
        lk = cap_link[ci]
        P0[ci] = _mat33_vec(rot[m, lk], cap_p0[ci]) + trans[m, lk]
        P1[ci] = _mat33_vec(rot[m, lk], cap_p1[ci]) + trans[m, lk]
    return P0, P1


@njit(**_JIT)
def self_collision_batch(rot, trans, cap_p0, cap_p1, cap_r, cap_link, pair_a, pair_b):
    M = rot.shape[0]
    out = np.empty(M)
    if pair_a.shape[0] == 0:
        for m in range(M):
            out[m] = NO_CONTACT
        return out
    for m in range(M):
        P0, P1 = _capsule_world(rot, trans, cap_p0, cap_p1, cap_link, m)
        best = NO_CONTACT
        for p in range(pair_a.shape[0]):
            i = pair_a[p]
            j = pair_b[p]
            dist = _segseg_dist(P0[i], P1[i], P0[j], P1[j])
            val = cap_r[i] + cap_r[j] - dist
            if val > best:
                best = val
        out[m] = best
    return out


@njit(**_JIT)
def _point_box_dist(px, py, pz, bmin, bmax):
    dx = max(bmin[0] - px, 0.0) + max(px - bmax[0], 0.0)
    dy = max(bmin[1] - py, 0.0) + max(py - bmax[1], 0.0)
    dz = max(bmin[2] - pz, 0.0) + max(pz - bmax[2], 0.0)
    return np.sqrt(dx * dx + dy * dy + dz * dz)


@njit(**_JIT)
def _seg_box_dist(p0, p1, bmin, bmax):
    dx, dy, dz = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    lo = 0.0
    hi = 1.0
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _point_box_dist(p0[0] + m1 * dx, p0[1] + m1 * dy, p0[2] + m1 * dz, bmin, bmax)
        f2 = _point_box_dist(p0[0] + m2 * dx, p0[1] + m2 * dy, p0[2] + m2 * dz, bmin, bmax)
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    return _point_box_dist(p0[0] + mid * dx, p0[1] + mid * dy, p0[2] + mid * dz, bmin, bmax)


@njit(**_JIT)
def env_collision_batch(rot, trans, cap_p0, cap_p1, cap_r, cap_link, spheres, boxes):
    M = rot.shape[0]
    hit = np.full(M, -1, dtype=np.int64)
    C = cap_r.shape[0]
    ns = spheres.shape[0]
    nb = boxes.shape[0]
    if C == 0 or (ns == 0 and nb == 0):
        return hit
    for m in range(M):
        P0, P1 = _capsule_world(rot, trans, cap_p0, cap_p1, cap_link, m)
        found = -1
        for o in range(ns):
            cx, cy, cz, rad = spheres[o, 0], spheres[o, 1], spheres[o, 2], spheres[o, 3]
            for ci in range(C):
                dx = P1[ci, 0] - P0[ci, 0]
                dy = P1[ci, 1] - P0[ci, 1]
                dz = P1[ci, 2] - P0[ci, 2]
                dd = dx * dx + dy * dy + dz * dz
                if dd <= SEG_EPS:
                    t = 0.0
                else:
                    t = ((cx - P0[ci, 0]) * dx + (cy - P0[ci, 1]) * dy + (cz - P0[ci, 2]) * dz) / dd
                    t = min(max(t, 0.0), 1.0)
                ex = P0[ci, 0] + t * dx - cx
                ey = P0[ci, 1] + t * dy - cy
                ez = P0[ci, 2] + t * dz - cz
                if np.sqrt(ex * ex + ey * ey + ez * ez) < cap_r[ci] + rad:
                    found = o
                    break
            if found >= 0:
                break
        if found < 0:
            for ob in range(nb):
                bmin = boxes[ob, :3]
                bmax = boxes[ob, 3:]
                for ci in range(C):
                    if _seg_box_dist(P0[ci], P1[ci], bmin, bmax) < cap_r[ci]:
                        found = ns + ob
                        break
                if found >= 0:
                    break
        hit[m] = found
    return hit


@njit(**_JIT)
def integrate_batch(u, dts, th0, thd0):
    N, H, d = u.shape
    pos = np.empty((N, H, d))
    vel = np.empty((N, H, d))
    for n in range(N):
        for j in range(d):
            v = thd0[j]
            p = th0[j]
            for h in range(H):
                v = v + dts[h] * u[n, h, j]
                p = p + dts[h] * v
                vel[n, h, j] = v
                pos[n, h, j] = p
    return pos, vel
