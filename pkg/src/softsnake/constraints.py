"""Constraint types and evaluators.

Four families: distance (structural wiring and pneumatic actuation),
corotational tetrahedra (the elastic volume), attachments (soft body
particle to rigid body), and hinge joints (wheels to carriage frames).

Every family exists in two layers: a single-constraint dataclass with
an eval function (the reference surface the finite-difference tests
pin), and a packed Set container the solver iterates with the kernel
backends. The single evaluators run through the batched path with n = 1,
so there is exactly one implementation of the math per backend.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .state import SystemState, rotation_matrix, skew

POLAR_TOL = 1e-12
POLAR_MAXITER = 500


def tetra_compliance(rest_volume: float, youngs_modulus: float, poisson: float) -> np.ndarray:
    """Isotropic compliance block in Voigt order [xx yy zz yz xz xy].

    Upper 3x3 couples the normal strains with -poisson off-diagonals;
    the shear rows carry (1 + poisson) each (tensor shear components,
    not engineering shear - this scales shear stiffness by a constant
    factor versus the engineering convention and is the convention used
    throughout this package).
    """
    c = 1.0 / (rest_volume * youngs_modulus)
    nu = poisson
    E = np.zeros((6, 6))
    E[:3, :3] = c * np.array([[1.0, -nu, -nu], [-nu, 1.0, -nu], [-nu, -nu, 1.0]])
    E[3, 3] = E[4, 4] = E[5, 5] = c * (1.0 + nu)
    return E


# ---------------------------------------------------------------- distance

KIND_STRUCTURAL = 0
KIND_ACTUATION = 1
KIND_INEXTENSIBLE = 2


@dataclass
class DistanceConstraint:
    """c = |x_i - x_j| - rest_length * scale; scale is the actuation stretch."""

    i: int
    j: int
    rest_length: float
    compliance: float
    kind: int = KIND_STRUCTURAL
    channel: int = -1


@dataclass
class DistanceSet:
    pairs: np.ndarray          # (n, 2) int32
    rest: np.ndarray           # (n,)
    compliance: np.ndarray     # (n,)
    kind: np.ndarray           # (n,) int32
    channel: np.ndarray        # (n,) int32, -1 = not actuated
    scale: np.ndarray          # (n,) actuation stretch factor, 1 otherwise
    dirs: np.ndarray           # (n, 3) persistent unit directions (J rows)

    @classmethod
    def from_constraints(cls, cs: list[DistanceConstraint]) -> "DistanceSet":
        n = len(cs)
        pairs = np.array([[c.i, c.j] for c in cs], np.int32).reshape(n, 2)
        rest = np.array([c.rest_length for c in cs])
        comp = np.array([c.compliance for c in cs])
        kind = np.array([c.kind for c in cs], np.int32)
        chan = np.array([c.channel for c in cs], np.int32)
        dirs = np.zeros((n, 3))
        dirs[:, 0] = 1.0
        return cls(pairs, rest, comp, kind, chan, np.ones(n), dirs)

    @property
    def count(self) -> int:
        return self.pairs.shape[0]

    def eval(self, pos: np.ndarray, out_res: np.ndarray, out_vals: np.ndarray,
             backend=None) -> None:
        be = backend if backend is not None else kernels.active
        be.eval_distance(pos, self.pairs, self.rest, self.scale, self.dirs, out_res)
        out_vals[:, 0, 0:3] = self.dirs
        out_vals[:, 0, 3:6] = -self.dirs

    def dof_indices(self) -> np.ndarray:
        idx = np.empty((self.count, 6), np.int32)
        for a in range(3):
            idx[:, a] = 3 * self.pairs[:, 0] + a
            idx[:, 3 + a] = 3 * self.pairs[:, 1] + a
        return idx


def eval_distance(c: DistanceConstraint, state: SystemState,
                  scale: float = 1.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Residual and the two Jacobian blocks (d/dx_i, d/dx_j)."""
    ds = DistanceSet(np.array([[c.i, c.j]], np.int32), np.array([c.rest_length]),
                     np.array([c.compliance]), np.array([c.kind], np.int32),
                     np.array([c.channel], np.int32), np.array([scale]),
                     np.array([[1.0, 0.0, 0.0]]))
    res = np.empty(1)
    vals = np.empty((1, 1, 6))
    ds.eval(state.particles.positions, res, vals)
    return float(res[0]), vals[0, 0, 0:3].copy(), vals[0, 0, 3:6].copy()


# ---------------------------------------------------------------- tetrahedra

@dataclass
class TetraElement:
    """Corotational tetra; strain c = voigt(sym(R^T F) - I)."""

    particles: np.ndarray      # (4,) int
    rest_inv: np.ndarray       # (3, 3) inverse rest shape matrix
    rest_volume: float
    compliance: np.ndarray     # (6, 6)

    @classmethod
    def from_positions(cls, ids, rest_positions, youngs_modulus, poisson) -> "TetraElement":
        ids = np.asarray(ids, np.int64)
        x = np.asarray(rest_positions, np.float64)
        D = np.stack([x[1] - x[0], x[2] - x[0], x[3] - x[0]], axis=1)
        det = float(np.linalg.det(D))
        if abs(det) < 1e-18:
            raise ValueError("degenerate rest tetrahedron")
        vol = abs(det) / 6.0
        return cls(ids, np.linalg.inv(D), vol,
                   tetra_compliance(vol, youngs_modulus, poisson))


@dataclass
class TetraSet:
    tets: np.ndarray           # (n, 4) int32
    rest_inv: np.ndarray       # (n, 3, 3)
    rest_volume: np.ndarray    # (n,)
    compliance: np.ndarray     # (n, 6, 6)
    quats: np.ndarray          # (n, 4) rotation warm starts
    inverted_count: int = 0

    @classmethod
    def from_elements(cls, els: list[TetraElement]) -> "TetraSet":
        n = len(els)
        tets = np.array([e.particles for e in els], np.int32).reshape(n, 4)
        rinv = np.array([e.rest_inv for e in els]).reshape(n, 3, 3)
        vol = np.array([e.rest_volume for e in els])
        comp = np.array([e.compliance for e in els]).reshape(n, 6, 6)
        quats = np.zeros((n, 4))
        quats[:, 0] = 1.0
        return cls(tets, rinv, vol, comp, quats)

    @property
    def count(self) -> int:
        return self.tets.shape[0]

    def eval(self, pos: np.ndarray, out_res: np.ndarray, out_vals: np.ndarray,
             backend=None, tol: float = POLAR_TOL, maxiter: int = POLAR_MAXITER) -> int:
        be = backend if backend is not None else kernels.active
        self.inverted_count = int(be.eval_tetra(pos, self.tets, self.rest_inv,
                                                self.quats, tol, maxiter,
                                                out_res, out_vals))
        return self.inverted_count

    def dof_indices(self) -> np.ndarray:
        idx = np.empty((self.count, 12), np.int32)
        for v in range(4):
            for a in range(3):
                idx[:, 3 * v + a] = 3 * self.tets[:, v] + a
        return idx


def eval_tetra(elem: TetraElement, state: SystemState) -> tuple[np.ndarray, np.ndarray]:
    """Residual (6,) and Jacobian (6, 12); fresh rotation extraction."""
    ts = TetraSet.from_elements([elem])
    res = np.empty((1, 6))
    vals = np.empty((1, 6, 12))
    ts.eval(state.particles.positions, res, vals)
    return res[0].copy(), vals[0].copy()


# ---------------------------------------------------------------- attachment

@dataclass
class AttachmentConstraint:
    """c = x_body + R r - x_particle (3 rows)."""

    particle: int
    body: int
    local_anchor: np.ndarray
    compliance: float


@dataclass
class AttachmentSet:
    particle: np.ndarray       # (n,) int32
    body: np.ndarray           # (n,) int32
    local_anchor: np.ndarray   # (n, 3)
    compliance: np.ndarray     # (n,)

    @classmethod
    def from_constraints(cls, cs: list[AttachmentConstraint]) -> "AttachmentSet":
        n = len(cs)
        return cls(np.array([c.particle for c in cs], np.int32).reshape(n),
                   np.array([c.body for c in cs], np.int32).reshape(n),
                   np.array([c.local_anchor for c in cs]).reshape(n, 3),
                   np.array([c.compliance for c in cs]).reshape(n))

    @property
    def count(self) -> int:
        return self.particle.shape[0]

    def eval(self, state: SystemState, out_res: np.ndarray, out_vals: np.ndarray) -> None:
        from .kernels.numpy_backend import _quat_to_mat
        q = state.body_quat[self.body]
        R = _quat_to_mat(q)
        rw = np.einsum("nij,nj->ni", R, self.local_anchor)
        out_res.reshape(-1, 3)[:] = (state.body_pos[self.body] + rw
                                     - state.particles.positions[self.particle])
        out_vals[:] = 0.0
        for a in range(3):
            out_vals[:, a, a] = -1.0
            out_vals[:, a, 3 + a] = 1.0
        # -skew(rw) block on the angular dofs
        out_vals[:, 0, 7] = rw[:, 2]
        out_vals[:, 0, 8] = -rw[:, 1]
        out_vals[:, 1, 6] = -rw[:, 2]
        out_vals[:, 1, 8] = rw[:, 0]
        out_vals[:, 2, 6] = rw[:, 1]
        out_vals[:, 2, 7] = -rw[:, 0]

    def dof_indices(self, body_dof0: int) -> np.ndarray:
        idx = np.empty((self.count, 9), np.int32)
        for a in range(3):
            idx[:, a] = 3 * self.particle + a
        for a in range(6):
            idx[:, 3 + a] = body_dof0 + 6 * self.body + a
        return idx


def eval_attachment(c: AttachmentConstraint, state: SystemState):
    """Residual (3,), particle block (3,3), body block (3,6)."""
    s = AttachmentSet.from_constraints([c])
    res = np.empty(3)
    vals = np.empty((1, 3, 9))
    s.eval(state, res, vals)
    return res, vals[0, :, 0:3].copy(), vals[0, :, 3:9].copy()


# ---------------------------------------------------------------- hinge

@dataclass
class HingeJoint:
    """Coincident anchors (3 rows) plus axis alignment (2 rows).

    The alignment rows dot body A's world axis with two tangents rigid
    in body B, so rotation about the shared axis stays free.
    """

    body_a: int
    body_b: int
    anchor_a: np.ndarray
    anchor_b: np.ndarray
    axis_a: np.ndarray
    axis_b: np.ndarray
    compliance: float


def _perp_unit(v: np.ndarray) -> np.ndarray:
    ref = np.array([0.0, 0.0, 1.0]) if abs(v[2]) <= 0.9 else np.array([1.0, 0.0, 0.0])
    t = ref - (ref @ v) * v
    return t / np.linalg.norm(t)


@dataclass
class HingeSet:
    body_a: np.ndarray         # (n,) int32
    body_b: np.ndarray
    anchor_a: np.ndarray       # (n, 3)
    anchor_b: np.ndarray
    axis_a: np.ndarray         # (n, 3) unit, body frames
    axis_b: np.ndarray
    tan1_b: np.ndarray         # (n, 3) tangents to axis_b, body B frame
    tan2_b: np.ndarray
    compliance: np.ndarray     # (n,)

    @classmethod
    def from_joints(cls, js: list[HingeJoint]) -> "HingeSet":
        n = len(js)
        axis_b = np.array([j.axis_b / np.linalg.norm(j.axis_b) for j in js]).reshape(n, 3)
        t1 = np.array([_perp_unit(a) for a in axis_b]).reshape(n, 3)
        t2 = np.cross(axis_b, t1)
        return cls(np.array([j.body_a for j in js], np.int32).reshape(n),
                   np.array([j.body_b for j in js], np.int32).reshape(n),
                   np.array([j.anchor_a for j in js]).reshape(n, 3),
                   np.array([j.anchor_b for j in js]).reshape(n, 3),
                   np.array([j.axis_a / np.linalg.norm(j.axis_a) for j in js]).reshape(n, 3),
                   axis_b, t1, t2,
                   np.array([j.compliance for j in js]).reshape(n))

    @property
    def count(self) -> int:
        return self.body_a.shape[0]

    def eval(self, state: SystemState, out_res: np.ndarray, out_vals: np.ndarray) -> None:
        from .kernels.numpy_backend import _quat_to_mat
        Ra = _quat_to_mat(state.body_quat[self.body_a])
        Rb = _quat_to_mat(state.body_quat[self.body_b])
        ra = np.einsum("nij,nj->ni", Ra, self.anchor_a)
        rb = np.einsum("nij,nj->ni", Rb, self.anchor_b)
        na = np.einsum("nij,nj->ni", Ra, self.axis_a)
        t1 = np.einsum("nij,nj->ni", Rb, self.tan1_b)
        t2 = np.einsum("nij,nj->ni", Rb, self.tan2_b)
        res = out_res.reshape(-1, 5)
        res[:, 0:3] = (state.body_pos[self.body_a] + ra
                       - state.body_pos[self.body_b] - rb)
        res[:, 3] = np.einsum("ni,ni->n", t1, na)
        res[:, 4] = np.einsum("ni,ni->n", t2, na)
        out_vals[:] = 0.0
        for a in range(3):
            out_vals[:, a, a] = 1.0
            out_vals[:, a, 6 + a] = -1.0
        # anchor rows: -skew(ra) on A's angular dofs, +skew(rb) on B's
        out_vals[:, 0, 4] = ra[:, 2]
        out_vals[:, 0, 5] = -ra[:, 1]
        out_vals[:, 1, 3] = -ra[:, 2]
        out_vals[:, 1, 5] = ra[:, 0]
        out_vals[:, 2, 3] = ra[:, 1]
        out_vals[:, 2, 4] = -ra[:, 0]
        out_vals[:, 0, 10] = -rb[:, 2]
        out_vals[:, 0, 11] = rb[:, 1]
        out_vals[:, 1, 9] = rb[:, 2]
        out_vals[:, 1, 11] = -rb[:, 0]
        out_vals[:, 2, 9] = -rb[:, 1]
        out_vals[:, 2, 10] = rb[:, 0]
        # alignment rows: +(na x tk) on A's angular dofs, the negative on B's
        c1 = np.cross(na, t1)
        c2 = np.cross(na, t2)
        out_vals[:, 3, 3:6] = c1
        out_vals[:, 3, 9:12] = -c1
        out_vals[:, 4, 3:6] = c2
        out_vals[:, 4, 9:12] = -c2

    def dof_indices(self, body_dof0: int) -> np.ndarray:
        idx = np.empty((self.count, 12), np.int32)
        for a in range(6):
            idx[:, a] = body_dof0 + 6 * self.body_a + a
            idx[:, 6 + a] = body_dof0 + 6 * self.body_b + a
        return idx


def eval_hinge(j: HingeJoint, state: SystemState):
    """Residual (5,) and the two body Jacobian blocks (5,6) each."""
    s = HingeSet.from_joints([j])
    res = np.empty(5)
    vals = np.empty((1, 5, 12))
    s.eval(state, res, vals)
    return res, vals[0, :, 0:6].copy(), vals[0, :, 6:12].copy()
