"""Shared fixtures and finite-difference helpers for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from softsnake.state import (ParticleSet, RigidBody, SystemState,
                             quat_from_axis_angle, quat_mul, quat_normalize)


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)


def random_state(rng, n_particles=6, n_bodies=2, spread=0.1) -> SystemState:
    """A generic random configuration for Jacobian checks."""
    pos = rng.normal(scale=spread, size=(n_particles, 3))
    masses = rng.uniform(0.5, 2.0, size=n_particles) * 1e-3
    bodies = []
    for _ in range(n_bodies):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        q = quat_from_axis_angle(axis, rng.uniform(-np.pi, np.pi))
        inertia = np.diag(rng.uniform(0.5, 2.0, size=3) * 1e-5)
        bodies.append(RigidBody.create(rng.normal(scale=spread, size=3),
                                       rng.uniform(0.01, 0.1), inertia,
                                       orientation=q))
    return SystemState.create(ParticleSet.create(pos, masses), bodies)


def fd_particle_jacobian(fn, state: SystemState, particle: int,
                         eps: float = 1e-7) -> np.ndarray:
    """Central differences of fn(state) wrt one particle position.

    fn returns a residual vector; the result has shape (len(res), 3).
    """
    base = state.particles.positions
    out = None
    for a in range(3):
        saved = base[particle, a]
        base[particle, a] = saved + eps
        rp = np.atleast_1d(np.asarray(fn(state), float)).copy()
        base[particle, a] = saved - eps
        rm = np.atleast_1d(np.asarray(fn(state), float)).copy()
        base[particle, a] = saved
        col = (rp - rm) / (2 * eps)
        if out is None:
            out = np.empty((col.shape[0], 3))
        out[:, a] = col
    return out


def fd_body_jacobian(fn, state: SystemState, body: int,
                     eps: float = 1e-7) -> np.ndarray:
    """Central differences wrt body pose: 3 translation + 3 rotation cols.

    Rotation columns perturb by a small world-frame axis rotation,
    matching the angular velocity convention of the analytic rows.
    """
    cols = []
    pos = state.body_pos
    for a in range(3):
        saved = pos[body, a]
        pos[body, a] = saved + eps
        rp = np.atleast_1d(np.asarray(fn(state), float)).copy()
        pos[body, a] = saved - eps
        rm = np.atleast_1d(np.asarray(fn(state), float)).copy()
        pos[body, a] = saved
        cols.append((rp - rm) / (2 * eps))
    quat = state.body_quat
    for a in range(3):
        axis = np.zeros(3)
        axis[a] = 1.0
        saved = quat[body].copy()
        dq = quat_from_axis_angle(axis, eps)
        quat[body] = quat_normalize(quat_mul(dq, saved))
        rp = np.atleast_1d(np.asarray(fn(state), float)).copy()
        dq = quat_from_axis_angle(axis, -eps)
        quat[body] = quat_normalize(quat_mul(dq, saved))
        rm = np.atleast_1d(np.asarray(fn(state), float)).copy()
        quat[body] = saved
        cols.append((rp - rm) / (2 * eps))
    return np.stack(cols, axis=1)
