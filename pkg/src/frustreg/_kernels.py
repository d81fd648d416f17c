"""numba kernels for the residual hot loops.

Arithmetic order mirrors ``camera.transform_points``/``cost.residual_core`` so
both paths round identically (no fastmath, no FMA contraction).
"""

import numpy as np
from numba import njit

MIN_DEPTH = 1e-9


@njit(cache=True, inline="always")
def _point_residual(X, Y, Z, lab1, fx, fy, cx, cy, W, H, alpha, zfloor):
    if lab1:
        az = abs(Z)
        zdiv = az if az > zfloor else zfloor
    else:
        zdiv = Z if Z >= MIN_DEPTH else 1.0
    px = fx * X / zdiv + cx
    py = fy * Y / zdiv + cy
    if lab1:
        r = (max(-px, 0.0) + max(px - W, 0.0)) + (max(-py, 0.0) + max(py - H, 0.0))
        r = r + alpha * max(-Z, 0.0)
    else:
        if Z >= MIN_DEPTH and px >= 0.0 and px <= W - 1.0 and py >= 0.0 and py <= H - 1.0:
            r = (W / 2.0 - abs(px - W / 2.0)) + (H / 2.0 - abs(py - H / 2.0))
        else:
            r = 0.0
    return r, px, py


@njit(cache=True, nogil=True)
def evaluate(R, t, P, label1, fx, fy, cx, cy, W, H, alpha, zfloor, pc, px, py, r):
    for i in range(P.shape[0]):
        x, y, z = P[i, 0], P[i, 1], P[i, 2]
        X = (R[0, 0] * x + R[0, 1] * y) + (R[0, 2] * z + t[0])
        Y = (R[1, 0] * x + R[1, 1] * y) + (R[1, 2] * z + t[1])
        Z = (R[2, 0] * x + R[2, 1] * y) + (R[2, 2] * z + t[2])
        pc[i, 0] = X
        pc[i, 1] = Y
        pc[i, 2] = Z
        r[i], px[i], py[i] = _point_residual(X, Y, Z, label1[i], fx, fy, cx, cy, W, H, alpha, zfloor)


@njit(cache=True, nogil=True)
def rows_needed(pc, px, py, r, label1, a, b, h, fx, fy, W, H, zfloor, out):
    for i in range(pc.shape[0]):
        if r[i] != 0.0:
            out[i] = True
            continue
        X, Y, Z = pc[i, 0], pc[i, 1], pc[i, 2]
        nrm = np.sqrt(X * X + Y * Y + Z * Z)
        m = 1.5 * h * (a + b * nrm) + 1e-12 * (1.0 + nrm)
        if label1[i]:
            if Z - m <= zfloor:
                out[i] = True
                continue
        else:
            if Z + m < MIN_DEPTH:
                out[i] = False
                continue
            if Z - m < MIN_DEPTH:
                out[i] = True
                continue
        zlo = Z - m
        pmx = 2.0 * fx * m * (Z + abs(X) + m) / (abs(Z) * zlo) + 1e-9
        pmy = 2.0 * fy * m * (Z + abs(Y) + m) / (abs(Z) * zlo) + 1e-9
        x, y = px[i], py[i]
        if label1[i]:
            out[i] = (x - pmx <= 0.0) or (x + pmx >= W) or (y - pmy <= 0.0) or (y + pmy >= H)
        else:
            out[i] = (x >= -pmx) and (x <= W - 1.0 + pmx) and (y >= -pmy) and (y <= H - 1.0 + pmy)


@njit(cache=True, nogil=True)
def fd_rows(pc, idx, label1, Rs, ts, h, fx, fy, cx, cy, W, H, alpha, zfloor, out):
    k = Rs.shape[0] // 2
    for n in range(idx.shape[0]):
        i = idx[n]
        x, y, z = pc[i, 0], pc[i, 1], pc[i, 2]
        lab = label1[i]
        for j in range(k):
            Rp, tp = Rs[j], ts[j]
            X = (Rp[0, 0] * x + Rp[0, 1] * y) + (Rp[0, 2] * z + tp[0])
            Y = (Rp[1, 0] * x + Rp[1, 1] * y) + (Rp[1, 2] * z + tp[1])
            Z = (Rp[2, 0] * x + Rp[2, 1] * y) + (Rp[2, 2] * z + tp[2])
            r_plus, _, _ = _point_residual(X, Y, Z, lab, fx, fy, cx, cy, W, H, alpha, zfloor)
            Rm, tm = Rs[k + j], ts[k + j]
            X = (Rm[0, 0] * x + Rm[0, 1] * y) + (Rm[0, 2] * z + tm[0])
            Y = (Rm[1, 0] * x + Rm[1, 1] * y) + (Rm[1, 2] * z + tm[1])
            Z = (Rm[2, 0] * x + Rm[2, 1] * y) + (Rm[2, 2] * z + tm[2])
            r_minus, _, _ = _point_residual(X, Y, Z, lab, fx, fy, cx, cy, W, H, alpha, zfloor)
            out[n, j] = (r_plus - r_minus) / (2.0 * h)
