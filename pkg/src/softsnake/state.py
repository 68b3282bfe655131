"""System state: particle arrays, rigid bodies, mass operators.

Velocity DOF layout is particles first (3 each) then bodies (6 each:
linear, then angular). Angular velocity is expressed in the world
frame throughout, so quaternion kinematics are dq/dt = 0.5 * (0, w) * q
and attachment Jacobian blocks take the [I, -skew(R r)] form.
Quaternions are [w, x, y, z].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def quat_normalize(q):
    q = np.asarray(q, np.float64)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return q / n


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, np.float64)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def rotation_matrix(q) -> np.ndarray:
    """Unit quaternion to rotation matrix (renormalizes drifted input)."""
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass
class ParticleSet:
    """Lumped-mass particles; inv_mass 0 pins a particle."""

    positions: np.ndarray
    velocities: np.ndarray
    inv_mass: np.ndarray

    @classmethod
    def create(cls, positions, masses) -> "ParticleSet":
        positions = np.array(positions, np.float64).reshape(-1, 3)
        masses = np.asarray(masses, np.float64)
        inv = np.where(masses > 0, 1.0 / np.where(masses > 0, masses, 1.0), 0.0)
        return cls(positions, np.zeros_like(positions), inv)

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass
class RigidBody:
    """Maximal-coordinate rigid body; inertia is body-frame 3x3."""

    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    mass: float
    inertia: np.ndarray

    @classmethod
    def create(cls, position, mass, inertia, orientation=(1, 0, 0, 0)) -> "RigidBody":
        return cls(np.array(position, np.float64),
                   quat_normalize(np.array(orientation, np.float64)),
                   np.zeros(3), np.zeros(3), float(mass),
                   np.array(inertia, np.float64).reshape(3, 3))


@dataclass
class SystemState:
    """Particles plus rigid bodies packed in arrays."""

    particles: ParticleSet
    body_pos: np.ndarray        # (nb, 3)
    body_quat: np.ndarray       # (nb, 4)
    body_lin_vel: np.ndarray    # (nb, 3)
    body_ang_vel: np.ndarray    # (nb, 3) world frame
    body_mass: np.ndarray       # (nb,)
    body_inertia: np.ndarray    # (nb, 3, 3) body frame
    time: float = 0.0

    @classmethod
    def create(cls, particles: ParticleSet, bodies: list[RigidBody]) -> "SystemState":
        nb = len(bodies)
        bp = np.zeros((nb, 3))
        bq = np.zeros((nb, 4))
        bv = np.zeros((nb, 3))
        bw = np.zeros((nb, 3))
        bm = np.zeros(nb)
        bi = np.zeros((nb, 3, 3))
        for i, b in enumerate(bodies):
            bp[i] = b.position
            bq[i] = quat_normalize(b.orientation)
            bv[i] = b.linear_velocity
            bw[i] = b.angular_velocity
            bm[i] = b.mass
            bi[i] = b.inertia
        return cls(particles, bp, bq, bv, bw, bm, bi)

    @property
    def num_particles(self) -> int:
        return self.particles.count

    @property
    def num_bodies(self) -> int:
        return self.body_pos.shape[0]

    @property
    def num_dof(self) -> int:
        return 3 * self.num_particles + 6 * self.num_bodies

    def body(self, i: int) -> RigidBody:
        return RigidBody(self.body_pos[i].copy(), self.body_quat[i].copy(),
                         self.body_lin_vel[i].copy(), self.body_ang_vel[i].copy(),
                         float(self.body_mass[i]), self.body_inertia[i].copy())

    def get_velocities(self) -> np.ndarray:
        u = np.empty(self.num_dof)
        npart = 3 * self.num_particles
        u[:npart] = self.particles.velocities.ravel()
        tail = u[npart:].reshape(-1, 6)
        tail[:, :3] = self.body_lin_vel
        tail[:, 3:] = self.body_ang_vel
        return u

    def set_velocities(self, u: np.ndarray) -> None:
        npart = 3 * self.num_particles
        self.particles.velocities[:] = u[:npart].reshape(-1, 3)
        tail = u[npart:].reshape(-1, 6)
        self.body_lin_vel[:] = tail[:, :3]
        self.body_ang_vel[:] = tail[:, 3:]

    def copy(self) -> "SystemState":
        p = ParticleSet(self.particles.positions.copy(),
                        self.particles.velocities.copy(),
                        self.particles.inv_mass.copy())
        return SystemState(p, self.body_pos.copy(), self.body_quat.copy(),
                           self.body_lin_vel.copy(), self.body_ang_vel.copy(),
                           self.body_mass.copy(), self.body_inertia.copy(), self.time)


def quat_step(q: np.ndarray, w: np.ndarray, h: float, out: np.ndarray | None = None) -> np.ndarray:
    """Batched q + h * 0.5 (0,w)*q with renormalization (world-frame w)."""
    if out is None:
        out = np.empty_like(q)
    r0 = q[:, 0] - 0.5 * h * (w[:, 0] * q[:, 1] + w[:, 1] * q[:, 2] + w[:, 2] * q[:, 3])
    r1 = q[:, 1] + 0.5 * h * (w[:, 0] * q[:, 0] + w[:, 1] * q[:, 3] - w[:, 2] * q[:, 2])
    r2 = q[:, 2] + 0.5 * h * (-w[:, 0] * q[:, 3] + w[:, 1] * q[:, 0] + w[:, 2] * q[:, 1])
    r3 = q[:, 3] + 0.5 * h * (w[:, 0] * q[:, 2] - w[:, 1] * q[:, 1] + w[:, 2] * q[:, 0])
    out[:, 0] = r0
    out[:, 1] = r1
    out[:, 2] = r2
    out[:, 3] = r3
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out


def integrate_pose(state: SystemState, h: float) -> None:
    """First-order pose update: x += h v, q += h * 0.5 (0,w)*q, renormalize."""
    state.particles.positions += h * state.particles.velocities
    state.body_pos += h * state.body_lin_vel
    quat_step(state.body_quat, state.body_ang_vel, h, out=state.body_quat)
    state.time += h


@dataclass
class MassInverse:
    """Block-diagonal M^-1 snapshot (world-frame body inertia at build time)."""

    diag: np.ndarray            # (nd,) diagonal entries (angular: diag of I_w^-1)
    ang_inv: np.ndarray         # (nb, 3, 3) world-frame inverse inertia
    ang: np.ndarray             # (nb, 3, 3) world-frame inertia
    mass_diag: np.ndarray       # (nd,) diagonal of M (angular: diag of I_w)
    body_dof0: int

    def apply(self, f: np.ndarray) -> np.ndarray:
        out = self.diag * f
        nb = self.ang_inv.shape[0]
        if nb:
            blk = f[self.body_dof0:].reshape(nb, 2, 3)
            out[self.body_dof0:].reshape(nb, 2, 3)[:, 1, :] = \
                np.einsum("nij,nj->ni", self.ang_inv, blk[:, 1, :])
        return out

    def multiply_mass(self, v: np.ndarray) -> np.ndarray:
        out = self.mass_diag * v
        nb = self.ang.shape[0]
        if nb:
            blk = v[self.body_dof0:].reshape(nb, 2, 3)
            out[self.body_dof0:].reshape(nb, 2, 3)[:, 1, :] = \
                np.einsum("nij,nj->ni", self.ang, blk[:, 1, :])
        return out

    def matrix(self):
        from .sparse import CsrMatrix
        nd = self.diag.shape[0]
        rows, cols, vals = [], [], []
        for i in range(self.body_dof0):
            rows.append(i)
            cols.append(i)
            vals.append(self.diag[i])
        nb = self.ang_inv.shape[0]
        for b in range(nb):
            o = self.body_dof0 + 6 * b
            for i in range(3):
                rows.append(o + i)
                cols.append(o + i)
                vals.append(self.diag[o + i])
            for i in range(3):
                for j in range(3):
                    rows.append(o + 3 + i)
                    cols.append(o + 3 + j)
                    vals.append(self.ang_inv[b, i, j])
        return CsrMatrix.from_coo(rows, cols, vals, (nd, nd))


def build_mass_inverse(state: SystemState) -> MassInverse:
    nd = state.num_dof
    npart = 3 * state.num_particles
    diag = np.empty(nd)
    mass_diag = np.empty(nd)
    diag[:npart] = np.repeat(state.particles.inv_mass, 3)
    pm = np.where(state.particles.inv_mass > 0, 1.0 / np.where(
        state.particles.inv_mass > 0, state.particles.inv_mass, 1.0), 0.0)
    mass_diag[:npart] = np.repeat(pm, 3)
    nb = state.num_bodies
    ang_inv = np.zeros((nb, 3, 3))
    ang = np.zeros((nb, 3, 3))
    for b in range(nb):
        R = rotation_matrix(state.body_quat[b])
        iw = R @ state.body_inertia[b] @ R.T
        ang[b] = iw
        ang_inv[b] = np.linalg.inv(iw)
        o = npart + 6 * b
        diag[o:o + 3] = 1.0 / state.body_mass[b]
        mass_diag[o:o + 3] = state.body_mass[b]
        diag[o + 3:o + 6] = np.diag(ang_inv[b])
        mass_diag[o + 3:o + 6] = np.diag(iw)
    return MassInverse(diag, ang_inv, ang, mass_diag, npart)


def kinetic_energy(state: SystemState) -> float:
    p = state.particles
    live = p.inv_mass > 0
    ke = 0.5 * float(np.sum((1.0 / p.inv_mass[live]) *
                            np.einsum("ij,ij->i", p.velocities[live], p.velocities[live])))
    for b in range(state.num_bodies):
        R = rotation_matrix(state.body_quat[b])
        iw = R @ state.body_inertia[b] @ R.T
        v = state.body_lin_vel[b]
        w = state.body_ang_vel[b]
        ke += 0.5 * state.body_mass[b] * float(v @ v) + 0.5 * float(w @ iw @ w)
    return ke


def center_of_mass(state: SystemState) -> np.ndarray:
    p = state.particles
    live = p.inv_mass > 0
    m = 1.0 / p.inv_mass[live]
    tot = float(np.sum(m)) + float(np.sum(state.body_mass))
    com = (m[:, None] * p.positions[live]).sum(axis=0)
    com += (state.body_mass[:, None] * state.body_pos).sum(axis=0)
    return com / tot
