"""Numba @njit twins of the numpy kernels.

Same signatures and semantics as ``numpy_backend``; plain loops the
compiler turns into tight scalar code. fastmath stays off so both
backends agree to rounding and runs stay deterministic.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

NAME = "numba"
COMPILED = True

_jit = njit(cache=True, fastmath=False)


@_jit
def csr_spmv(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc
    return out


@_jit
def block_forward(dof_idx, vals, u, out_rows):
    n, r, k = vals.shape
    for e in range(n):
        for i in range(r):
            acc = 0.0
            for j in range(k):
                acc += vals[e, i, j] * u[dof_idx[e, j]]
            out_rows[e, i] = acc
    return out_rows


@_jit
def block_transpose(dof_idx, vals, x_rows, y):
    n, r, k = vals.shape
    for e in range(n):
        for j in range(k):
            acc = 0.0
            for i in range(r):
                acc += vals[e, i, j] * x_rows[e, i]
            y[dof_idx[e, j]] += acc
    return y


@_jit
def block_rowdiag(dof_idx, vals, minv_diag, out_rows):
    n, r, k = vals.shape
    for e in range(n):
        for i in range(r):
            acc = 0.0
            for j in range(k):
                v = vals[e, i, j]
                acc += v * v * minv_diag[dof_idx[e, j]]
            out_rows[e, i] = acc
    return out_rows


@_jit
def minv_apply(minv_diag, ang_inv, body_dof0, u, out):
    nd = u.shape[0]
    for i in range(nd):
        out[i] = minv_diag[i] * u[i]
    nb = ang_inv.shape[0]
    for b in range(nb):
        o = body_dof0 + 6 * b + 3
        w0 = u[o]
        w1 = u[o + 1]
        w2 = u[o + 2]
        out[o] = ang_inv[b, 0, 0] * w0 + ang_inv[b, 0, 1] * w1 + ang_inv[b, 0, 2] * w2
        out[o + 1] = ang_inv[b, 1, 0] * w0 + ang_inv[b, 1, 1] * w1 + ang_inv[b, 1, 2] * w2
        out[o + 2] = ang_inv[b, 2, 0] * w0 + ang_inv[b, 2, 1] * w1 + ang_inv[b, 2, 2] * w2
    return out


@_jit
def ereg_apply(vals6, x_rows, out_rows):
    n = vals6.shape[0]
    for e in range(n):
        for i in range(6):
            acc = 0.0
            for j in range(6):
                acc += vals6[e, i, j] * x_rows[e, j]
            out_rows[e, i] = acc
    return out_rows


@_jit
def dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@_jit
def eval_distance(pos, pairs, rest, scale, dirs, out_res):
    n = pairs.shape[0]
    for e in range(n):
        i = pairs[e, 0]
        j = pairs[e, 1]
        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        dz = pos[i, 2] - pos[j, 2]
        ln = math.sqrt(dx * dx + dy * dy + dz * dz)
        if ln > 1e-12:
            dirs[e, 0] = dx / ln
            dirs[e, 1] = dy / ln
            dirs[e, 2] = dz / ln
        out_res[e] = ln - rest[e] * scale[e]
    return out_res


@_jit
def _quat_to_mat3(q, R):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)


@_jit
def eval_tetra(pos, tets, rest_inv, quats, tol, maxiter, out_res, out_vals):
    n = tets.shape[0]
    n_inverted = 0
    Ds = np.empty((3, 3))
    F = np.empty((3, 3))
    R = np.empty((3, 3))
    S = np.empty((3, 3))
    K = np.empty((3, 3))
    Kinv = np.empty((3, 3))
    G = np.empty((3, 3))
    wv = np.empty((4, 3))
    for e in range(n):
        p0 = tets[e, 0]
        p1 = tets[e, 1]
        p2 = tets[e, 2]
        p3 = tets[e, 3]
        for a in range(3):
            Ds[a, 0] = pos[p1, a] - pos[p0, a]
            Ds[a, 1] = pos[p2, a] - pos[p0, a]
            Ds[a, 2] = pos[p3, a] - pos[p0, a]
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += Ds[i, k] * rest_inv[e, k, j]
                F[i, j] = acc
        detF = (F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
                - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
                + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]))
        if detF <= 0.0:
            n_inverted += 1

        # polar rotation by quaternion refinement, warm-started
        qw = quats[e, 0]
        qx = quats[e, 1]
        qy = quats[e, 2]
        qz = quats[e, 3]
        for _ in range(maxiter):
            ww, xx, yy, zz = qw, qx, qy, qz
            r00 = 1.0 - 2.0 * (yy * yy + zz * zz)
            r01 = 2.0 * (xx * yy - ww * zz)
            r02 = 2.0 * (xx * zz + ww * yy)
            r10 = 2.0 * (xx * yy + ww * zz)
            r11 = 1.0 - 2.0 * (xx * xx + zz * zz)
            r12 = 2.0 * (yy * zz - ww * xx)
            r20 = 2.0 * (xx * zz - ww * yy)
            r21 = 2.0 * (yy * zz + ww * xx)
            r22 = 1.0 - 2.0 * (xx * xx + yy * yy)
            # omega = sum_j Rcol_j x Fcol_j, tr = sum_j Rcol_j . Fcol_j
            o0 = 0.0
            o1 = 0.0
            o2 = 0.0
            tr = 0.0
            for j in range(3):
                rc0 = r00 if j == 0 else (r01 if j == 1 else r02)
                rc1 = r10 if j == 0 else (r11 if j == 1 else r12)
                rc2 = r20 if j == 0 else (r21 if j == 1 else r22)
                f0 = F[0, j]
                f1 = F[1, j]
                f2 = F[2, j]
                o0 += rc1 * f2 - rc2 * f1
                o1 += rc2 * f0 - rc0 * f2
                o2 += rc0 * f1 - rc1 * f0
                tr += rc0 * f0 + rc1 * f1 + rc2 * f2
            s = 1.0 / (abs(tr) + 1e-9)
            o0 *= s
            o1 *= s
            o2 *= s
            wn = math.sqrt(o0 * o0 + o1 * o1 + o2 * o2)
            if wn < tol:
                break
            half = 0.5 * wn
            cw = math.cos(half)
            sw = math.sin(half) / wn
            dw, dx_, dy_, dz_ = cw, sw * o0, sw * o1, sw * o2
            nw = dw * qw - dx_ * qx - dy_ * qy - dz_ * qz
            nx = dw * qx + dx_ * qw + dy_ * qz - dz_ * qy
            ny = dw * qy - dx_ * qz + dy_ * qw + dz_ * qx
            nz = dw * qz + dx_ * qy - dy_ * qx + dz_ * qw
            qn = math.sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
            qw = nw / qn
            qx = nx / qn
            qy = ny / qn
            qz = nz / qn
        quats[e, 0] = qw
        quats[e, 1] = qx
        quats[e, 2] = qy
        quats[e, 3] = qz
        q4 = quats[e]
        _quat_to_mat3(q4, R)

        # S = sym(R^T F)
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += R[k, i] * F[k, j]
                S[i, j] = acc
        for i in range(3):
            for j in range(i + 1, 3):
                m = 0.5 * (S[i, j] + S[j, i])
                S[i, j] = m
                S[j, i] = m
        out_res[e, 0] = S[0, 0] - 1.0
        out_res[e, 1] = S[1, 1] - 1.0
        out_res[e, 2] = S[2, 2] - 1.0
        out_res[e, 3] = S[1, 2]
        out_res[e, 4] = S[0, 2]
        out_res[e, 5] = S[0, 1]

        # Kinv for the rotation differential
        trS = S[0, 0] + S[1, 1] + S[2, 2]
        for i in range(3):
            for j in range(3):
                K[i, j] = -S[i, j]
            K[i, i] += trS + 1e-14
        detK = (K[0, 0] * (K[1, 1] * K[2, 2] - K[1, 2] * K[2, 1])
                - K[0, 1] * (K[1, 0] * K[2, 2] - K[1, 2] * K[2, 0])
                + K[0, 2] * (K[1, 0] * K[2, 1] - K[1, 1] * K[2, 0]))
        if abs(detK) < 1e-30:
            detK = 1e-30 if detK >= 0 else -1e-30
        inv_det = 1.0 / detK
        Kinv[0, 0] = (K[1, 1] * K[2, 2] - K[1, 2] * K[2, 1]) * inv_det
        Kinv[0, 1] = (K[0, 2] * K[2, 1] - K[0, 1] * K[2, 2]) * inv_det
        Kinv[0, 2] = (K[0, 1] * K[1, 2] - K[0, 2] * K[1, 1]) * inv_det
        Kinv[1, 0] = (K[1, 2] * K[2, 0] - K[1, 0] * K[2, 2]) * inv_det
        Kinv[1, 1] = (K[0, 0] * K[2, 2] - K[0, 2] * K[2, 0]) * inv_det
        Kinv[1, 2] = (K[0, 2] * K[1, 0] - K[0, 0] * K[1, 2]) * inv_det
        Kinv[2, 0] = (K[1, 0] * K[2, 1] - K[1, 1] * K[2, 0]) * inv_det
        Kinv[2, 1] = (K[0, 1] * K[2, 0] - K[0, 0] * K[2, 1]) * inv_det
        Kinv[2, 2] = (K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]) * inv_det

        wv[1, 0] = rest_inv[e, 0, 0]
        wv[1, 1] = rest_inv[e, 0, 1]
        wv[1, 2] = rest_inv[e, 0, 2]
        wv[2, 0] = rest_inv[e, 1, 0]
        wv[2, 1] = rest_inv[e, 1, 1]
        wv[2, 2] = rest_inv[e, 1, 2]
        wv[3, 0] = rest_inv[e, 2, 0]
        wv[3, 1] = rest_inv[e, 2, 1]
        wv[3, 2] = rest_inv[e, 2, 2]
        wv[0, 0] = -(wv[1, 0] + wv[2, 0] + wv[3, 0])
        wv[0, 1] = -(wv[1, 1] + wv[2, 1] + wv[3, 1])
        wv[0, 2] = -(wv[1, 2] + wv[2, 2] + wv[3, 2])

        for v in range(4):
            for a in range(3):
                # G = r_a (x) w_v with r_a = row a of R
                for i in range(3):
                    for j in range(3):
                        G[i, j] = R[a, i] * wv[v, j]
                g0 = G[2, 1] - G[1, 2]
                g1 = G[0, 2] - G[2, 0]
                g2 = G[1, 0] - G[0, 1]
                w0 = Kinv[0, 0] * g0 + Kinv[0, 1] * g1 + Kinv[0, 2] * g2
                w1 = Kinv[1, 0] * g0 + Kinv[1, 1] * g1 + Kinv[1, 2] * g2
                w2 = Kinv[2, 0] * g0 + Kinv[2, 1] * g1 + Kinv[2, 2] * g2
                col = 3 * v + a
                # dc = sym(G) - sym(W S), W = skew(w)
                ws00 = -w2 * S[1, 0] + w1 * S[2, 0]
                ws01 = -w2 * S[1, 1] + w1 * S[2, 1]
                ws02 = -w2 * S[1, 2] + w1 * S[2, 2]
                ws10 = w2 * S[0, 0] - w0 * S[2, 0]
                ws11 = w2 * S[0, 1] - w0 * S[2, 1]
                ws12 = w2 * S[0, 2] - w0 * S[2, 2]
                ws20 = -w1 * S[0, 0] + w0 * S[1, 0]
                ws21 = -w1 * S[0, 1] + w0 * S[1, 1]
                ws22 = -w1 * S[0, 2] + w0 * S[1, 2]
                out_vals[e, 0, col] = G[0, 0] - ws00
                out_vals[e, 1, col] = G[1, 1] - ws11
                out_vals[e, 2, col] = G[2, 2] - ws22
                out_vals[e, 3, col] = 0.5 * (G[1, 2] + G[2, 1]) - 0.5 * (ws12 + ws21)
                out_vals[e, 4, col] = 0.5 * (G[0, 2] + G[2, 0]) - 0.5 * (ws02 + ws20)
                out_vals[e, 5, col] = 0.5 * (G[0, 1] + G[1, 0]) - 0.5 * (ws01 + ws10)
    return n_inverted
