"""Ground-plane contact: detection, friction bases, contact rows.

The ground is the plane z = ground_height with normal (0,0,1). Wheels
collide through the lowest point of their rim circle, computed
analytically from center, axis and radius; soft-body particles below
plane + margin emit point contacts. Contacts are regenerated every
step; multipliers are warm-started by a stable key (wheel body index
or particle index).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse import CsrMatrix
from .state import SystemState, rotation_matrix


def friction_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two tangents with (t1, t2, n) orthonormal right-handed.

    (0,0,1) maps to exactly ((1,0,0), (0,1,0)). The reference axis
    switches only at |n_z| = 0.9, so the basis is continuous in a wide
    neighborhood of any ground-like normal and of (1,0,0).
    """
    n = np.asarray(normal, np.float64)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[2]) > 0.9 else np.array([0.0, 0.0, 1.0])
    t1 = ref - (ref @ n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


@dataclass
class WheelCollider:
    """Thin wheel: a circle of given radius about axis_local at the body origin."""

    body: int
    radius: float
    axis_local: np.ndarray


@dataclass
class ContactPoint:
    """One candidate contact against the ground plane."""

    kind: str                  # "wheel" | "particle"
    index: int                 # body index or particle index
    point: np.ndarray          # world position on the colliding feature
    normal: np.ndarray
    gap: float                 # signed distance along the normal
    mu: float
    t1: np.ndarray
    t2: np.ndarray

    @property
    def key(self) -> tuple:
        return (self.kind, self.index)


def detect_ground_contacts(state: SystemState, wheels: list[WheelCollider],
                           ground_height: float = 0.0, margin: float = 0.005,
                           mu: float = 1.0,
                           particle_ids: np.ndarray | None = None) -> list[ContactPoint]:
    """Candidate contacts within margin of the ground, deterministic order."""
    n = np.array([0.0, 0.0, 1.0])
    out: list[ContactPoint] = []
    for w in wheels:
        c = state.body_pos[w.body]
        R = rotation_matrix(state.body_quat[w.body])
        axis = R @ w.axis_local
        d = n - (n @ axis) * axis
        dn = np.linalg.norm(d)
        if dn < 1e-9:
            # wheel lying flat; any radial direction is lowest
            d = np.array([1.0, 0.0, 0.0]) - axis[0] * axis
            dn = np.linalg.norm(d)
        d = d / dn
        p = c - w.radius * d
        gap = float(p[2] - ground_height)
        if gap < margin:
            t1, t2 = friction_basis(n)
            out.append(ContactPoint("wheel", w.body, p, n.copy(), gap, mu, t1, t2))
    pos = state.particles.positions
    ids = particle_ids if particle_ids is not None else np.arange(pos.shape[0])
    below = ids[pos[ids, 2] - ground_height < margin]
    for i in below:
        p = pos[i].copy()
        gap = float(p[2] - ground_height)
        t1, t2 = friction_basis(n)
        out.append(ContactPoint("particle", int(i), p, n.copy(), gap, mu, t1, t2))
    return out


def update_contact_geometry(contacts: list[ContactPoint], state: SystemState,
                            wheels: list[WheelCollider],
                            ground_height: float = 0.0) -> np.ndarray:
    """Recompute points and gaps at the given poses; returns gaps (nc,).

    The contact set itself is frozen for the step; only the geometry
    follows the candidate pose. Normals and tangents stay pinned to the
    ground plane.
    """
    n = np.array([0.0, 0.0, 1.0])
    by_body = {w.body: w for w in wheels}
    gaps = np.empty(len(contacts))
    for k, c in enumerate(contacts):
        if c.kind == "wheel":
            w = by_body[c.index]
            ctr = state.body_pos[w.body]
            R = rotation_matrix(state.body_quat[w.body])
            axis = R @ w.axis_local
            d = n - (n @ axis) * axis
            dn = np.linalg.norm(d)
            if dn < 1e-9:
                d = np.array([1.0, 0.0, 0.0]) - axis[0] * axis
                dn = np.linalg.norm(d)
            c.point = ctr - w.radius * (d / dn)
        else:
            c.point = state.particles.positions[c.index].copy()
        c.gap = float(c.point[2] - ground_height)
        gaps[k] = c.gap
    return gaps


@dataclass
class FrictionState:
    """Multipliers and the active set for the current contact list."""

    lambda_n: np.ndarray       # (nc,)
    lambda_f: np.ndarray       # (nc, 2)
    mu: np.ndarray             # (nc,)

    @classmethod
    def for_contacts(cls, contacts: list[ContactPoint],
                     warm: dict | None = None) -> "FrictionState":
        nc = len(contacts)
        ln = np.zeros(nc)
        lf = np.zeros((nc, 2))
        mu = np.array([c.mu for c in contacts]) if nc else np.zeros(0)
        if warm:
            for k, c in enumerate(contacts):
                got = warm.get(c.key)
                if got is not None:
                    ln[k] = got[0]
                    lf[k, 0] = got[1]
                    lf[k, 1] = got[2]
        return cls(ln, lf, mu.reshape(nc))

    def cone_radii(self) -> np.ndarray:
        return self.mu * np.maximum(self.lambda_n, 0.0)

    def active_set(self) -> np.ndarray:
        return self.cone_radii() > 0.0

    def project(self) -> None:
        """Clamp normal impulses nonnegative, friction into the cone."""
        np.maximum(self.lambda_n, 0.0, out=self.lambda_n)
        rad = self.cone_radii()
        norm = np.linalg.norm(self.lambda_f, axis=1)
        over = norm > rad
        if np.any(over):
            scale = np.where(norm > 0.0, rad / np.where(norm > 0.0, norm, 1.0), 0.0)
            self.lambda_f[over] *= scale[over, None]

    def store_warm(self, contacts: list[ContactPoint]) -> dict:
        """Multipliers to carry into the next substep, keyed by contact.

        Only wheel contacts persist. A wheel touches the plane at one
        point whose multiplier is near-stationary while rolling, so the
        carried value anchors the next solve close to its solution.
        Particle contacts churn through the detection margin; a stored
        impact impulse re-applied after the transient has passed injects
        momentum the fixed iteration budget cannot take back out, so
        they always restart from zero.
        """
        return {c.key: (float(self.lambda_n[k]), float(self.lambda_f[k, 0]),
                        float(self.lambda_f[k, 1]))
                for k, c in enumerate(contacts) if c.kind == "wheel"}


def contact_row_blocks(contacts: list[ContactPoint], state: SystemState,
                       body_dof0: int):
    """Per-contact dof indices and Jacobian blocks (normal row + 2 friction).

    Wheel contacts act on the body's 6 DOFs at the rim point r = p - x:
    normal row [n, r x n], friction rows [t_k, r x t_k]. Particle
    contacts act on the particle's 3 DOFs. Returns (dof_idx (nc, 6),
    normal_vals (nc, 1, 6), friction_vals (nc, 2, 6)); particle contacts
    pad the body half with zero columns pointing at dof 0.
    """
    nc = len(contacts)
    dof_idx = np.zeros((nc, 6), np.int32)
    nvals = np.zeros((nc, 1, 6))
    fvals = np.zeros((nc, 2, 6))
    for k, c in enumerate(contacts):
        if c.kind == "wheel":
            b = c.index
            o = body_dof0 + 6 * b
            dof_idx[k] = [o, o + 1, o + 2, o + 3, o + 4, o + 5]
            r = c.point - state.body_pos[b]
            nvals[k, 0, 0:3] = c.normal
            nvals[k, 0, 3:6] = np.cross(r, c.normal)
            for t, tv in enumerate((c.t1, c.t2)):
                fvals[k, t, 0:3] = tv
                fvals[k, t, 3:6] = np.cross(r, tv)
        else:
            i = c.index
            dof_idx[k, 0:3] = [3 * i, 3 * i + 1, 3 * i + 2]
            # trailing columns repeat dof 0 with zero values (inert)
            nvals[k, 0, 0:3] = c.normal
            fvals[k, 0, 0:3] = c.t1
            fvals[k, 1, 0:3] = c.t2
    return dof_idx, nvals, fvals


def assemble_friction_rows(contacts: list[ContactPoint], state: SystemState,
                           friction: FrictionState | None = None):
    """Friction Jacobian (2 rows per contact, CSR) plus cone radii."""
    if not contacts:
        raise ValueError("assemble_friction_rows needs a non-empty contact list")
    body_dof0 = 3 * state.num_particles
    dof_idx, _, fvals = contact_row_blocks(contacts, state, body_dof0)
    nc = len(contacts)
    rows, cols, vals = [], [], []
    for k in range(nc):
        width = 6 if contacts[k].kind == "wheel" else 3
        for t in range(2):
            for j in range(width):
                rows.append(2 * k + t)
                cols.append(dof_idx[k, j])
                vals.append(fvals[k, t, j])
    J = CsrMatrix.from_coo(rows, cols, vals, (2 * nc, state.num_dof))
    fs = friction if friction is not None else FrictionState.for_contacts(contacts)
    return J, fs.cone_radii()
