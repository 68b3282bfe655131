"""Pure-numpy implementations of the hot kernels.

Reference/fallback path: every function here has a numba twin in
``numba_backend`` with the identical signature. Arrays are float64 /
int32 and C-contiguous; outputs are written into caller-provided
buffers so the two backends can be swapped without allocation-pattern
changes.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"
COMPILED = False


def csr_spmv(indptr, indices, data, x, out):
    """out = A @ x for CSR A. Handles empty rows."""
    prod = data * x[indices]
    cs = np.concatenate(([0.0], np.cumsum(prod)))
    np.subtract(cs[indptr[1:]], cs[indptr[:-1]], out=out)
    return out


def block_forward(dof_idx, vals, u, out_rows):
    """out_rows[n, r] = vals[n, r, :] @ u[dof_idx[n, :]].

    One element block per row group: dof_idx (n, k) lists the global
    velocity DOFs the block touches, vals (n, r, k) holds the dense
    Jacobian block.
    """
    ug = u[dof_idx]                      # (n, k)
    np.einsum("nrk,nk->nr", vals, ug, out=out_rows)
    return out_rows


def block_transpose(dof_idx, vals, x_rows, y):
    """y[dof_idx[n, :]] += vals[n, :, :]^T @ x_rows[n, :] (accumulates)."""
    contrib = np.einsum("nrk,nr->nk", vals, x_rows)
    np.add.at(y, dof_idx.ravel(), contrib.ravel())
    return y


def block_rowdiag(dof_idx, vals, minv_diag, out_rows):
    """out_rows[n, r] = sum_k vals[n,r,k]^2 * minv_diag[dof_idx[n,k]].

    Diagonal of J M^-1 J^T under a diagonal M^-1 approximation (exact
    for particles; body angular blocks use diag(I_w^-1) only, which
    affects preconditioning quality, never the solution).
    """
    mg = minv_diag[dof_idx]              # (n, k)
    np.einsum("nrk,nk->nr", vals * vals, mg, out=out_rows)
    return out_rows


def minv_apply(minv_diag, ang_inv, body_dof0, u, out):
    """out = M^-1 u with exact 3x3 body angular blocks."""
    np.multiply(minv_diag, u, out=out)
    nb = ang_inv.shape[0]
    if nb:
        w = u[body_dof0:].reshape(nb, 2, 3)[:, 1, :]
        ang = np.einsum("nij,nj->ni", ang_inv, w)
        out[body_dof0:].reshape(nb, 2, 3)[:, 1, :] = ang
    return out


def ereg_apply(vals6, x_rows, out_rows):
    """out_rows[n, :] = vals6[n, :, :] @ x_rows[n, :] (6x6 blocks)."""
    np.einsum("nij,nj->ni", vals6, x_rows, out=out_rows)
    return out_rows


def dot(a, b):
    return float(np.dot(a, b))


def eval_distance(pos, pairs, rest, scale, dirs, out_res):
    """Distance constraint residuals c = |xi - xj| - rest*scale.

    dirs is persistent storage for the unit direction (the Jacobian
    row); coincident endpoints keep the previous direction.
    """
    d = pos[pairs[:, 0]] - pos[pairs[:, 1]]
    ln = np.linalg.norm(d, axis=1)
    ok = ln > 1e-12
    dirs[ok] = d[ok] / ln[ok, None]
    np.subtract(ln, rest * scale, out=out_res)
    return out_res


def _quat_to_mat(q):
    """Batched unit quaternion [w,x,y,z] -> rotation matrix (n,3,3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty(q.shape[:1] + (3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _quat_mul(a, b):
    out = np.empty_like(a)
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    out[:, 0] = aw * bw - ax * bx - ay * by - az * bz
    out[:, 1] = aw * bx + ax * bw + ay * bz - az * by
    out[:, 2] = aw * by - ax * bz + ay * bw + az * bx
    out[:, 3] = aw * bz + ax * by - ay * bx + az * bw
    return out


def _polar_rotations(F, quats, tol, maxiter):
    """Iterated quaternion refinement toward the rotational factor of F.

    Warm-started from quats (updated in place). The update direction is
    sum_j r_j x f_j over matrix columns, scaled by the inverse trace
    term; converges to the nearest proper rotation, inverted elements
    included.
    """
    n = F.shape[0]
    active = np.ones(n, dtype=bool)
    R = _quat_to_mat(quats)
    for _ in range(maxiter):
        Ra = R[active]
        Fa = F[active]
        omega = np.cross(Ra[:, :, 0], Fa[:, :, 0], axis=1)
        omega += np.cross(Ra[:, :, 1], Fa[:, :, 1], axis=1)
        omega += np.cross(Ra[:, :, 2], Fa[:, :, 2], axis=1)
        tr = np.einsum("nij,nij->n", Ra, Fa)
        omega *= (1.0 / (np.abs(tr) + 1e-9))[:, None]
        wn = np.linalg.norm(omega, axis=1)
        conv = wn < tol
        if conv.all():
            break
        upd = ~conv
        wn_u = wn[upd]
        axis = omega[upd] / wn_u[:, None]
        half = 0.5 * wn_u
        dq = np.concatenate([np.cos(half)[:, None], np.sin(half)[:, None] * axis], axis=1)
        idx = np.flatnonzero(active)[upd]
        quats[idx] = _quat_mul(dq, quats[idx])
        quats[idx] /= np.linalg.norm(quats[idx], axis=1)[:, None]
        sub = np.zeros(n, dtype=bool)
        sub[idx] = True
        active = sub
        R[idx] = _quat_to_mat(quats[idx])
    return _quat_to_mat(quats)


_VOIGT_I = np.array([0, 1, 2, 1, 0, 0])
_VOIGT_J = np.array([0, 1, 2, 2, 2, 1])


def eval_tetra(pos, tets, rest_inv, quats, tol, maxiter, out_res, out_vals):
    """Corotational tetra strain residuals and exact position Jacobians.

    Strain c = voigt(sym(R^T F) - I) in [xx, yy, zz, yz, xz, xy] order.
    The Jacobian includes the rotation differential: with S = sym(R^T F)
    and G = R^T dF, the axial part of G - G^T solved against
    (tr(S) I - S) gives the spin w, and dc = sym(G) - sym(skew(w) S).
    Returns the number of inverted elements (det F <= 0).
    """
    x0 = pos[tets[:, 0]]
    Ds = np.stack([pos[tets[:, 1]] - x0,
                   pos[tets[:, 2]] - x0,
                   pos[tets[:, 3]] - x0], axis=2)      # (n,3,3) columns
    F = Ds @ rest_inv
    n_inverted = int(np.count_nonzero(np.linalg.det(F) <= 0.0))
    R = _polar_rotations(F, quats, tol, maxiter)
    RtF = np.einsum("nji,njk->nik", R, F)
    S = 0.5 * (RtF + RtF.transpose(0, 2, 1))
    out_res[:] = S[:, _VOIGT_I, _VOIGT_J]
    out_res[:, :3] -= 1.0

    # K = tr(S) I - S, inverted once per element
    K = -S.copy()
    trS = np.trace(S, axis1=1, axis2=2)
    K[:, 0, 0] += trS
    K[:, 1, 1] += trS
    K[:, 2, 2] += trS
    Kinv = np.linalg.inv(K + 1e-14 * np.eye(3))

    # direction vectors w_v (n,4,3): dF for vertex v, axis a is e_a (x) w_v
    wv = np.empty(F.shape[:1] + (4, 3))
    wv[:, 1, :] = rest_inv[:, 0, :]
    wv[:, 2, :] = rest_inv[:, 1, :]
    wv[:, 3, :] = rest_inv[:, 2, :]
    wv[:, 0, :] = -(wv[:, 1] + wv[:, 2] + wv[:, 3])

    # G[n,v,a,i,j] = R[n,a,i] * wv[n,v,j]
    G = np.einsum("nai,nvj->nvaij", R, wv)
    gs = np.stack([G[..., 2, 1] - G[..., 1, 2],
                   G[..., 0, 2] - G[..., 2, 0],
                   G[..., 1, 0] - G[..., 0, 1]], axis=-1)   # (n,4,3,3)
    w = np.einsum("nxy,nvay->nvax", Kinv, gs)
    W = np.zeros(G.shape)
    W[..., 0, 1] = -w[..., 2]
    W[..., 0, 2] = w[..., 1]
    W[..., 1, 0] = w[..., 2]
    W[..., 1, 2] = -w[..., 0]
    W[..., 2, 0] = -w[..., 1]
    W[..., 2, 1] = w[..., 0]
    WS = np.einsum("nvaij,njk->nvaik", W, S)
    dC = 0.5 * (G + G.transpose(0, 1, 2, 4, 3)) - 0.5 * (WS + WS.transpose(0, 1, 2, 4, 3))
    # pack (v,a) -> column 3v+a, voigt row order
    dC_v = dC[:, :, :, _VOIGT_I, _VOIGT_J]        # (n,4,3,6)
    out_vals[:] = dC_v.transpose(0, 3, 1, 2).reshape(out_vals.shape)
    return n_inverted
