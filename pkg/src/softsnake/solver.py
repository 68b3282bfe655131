"""Implicit velocity-level constraint solver.

Each frame advances by fixed substeps. A substep predicts velocities
with external forces, freezes the contact set, then runs a fixed
number of Newton iterations. Every iteration evaluates constraints at
the pose the current velocities would reach, solves the compliant
Schur complement

    (J M^-1 J^T + E / h^2 + D_fb) dL = rhs

with a matrix-free preconditioned conjugate residual method, updates
the multipliers, projects contact multipliers, and recomputes
velocities from the total impulse. No early exits: the iteration
budget is the accuracy knob, so runtime per step is constant.

Contact normals use a Fischer-Burmeister complementarity row. The row
is divided by the clamped slope d(phi)/da, which keeps the system
symmetric while the remaining slope ratio lands on the diagonal.
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .constraints import AttachmentSet, DistanceSet, HingeSet, TetraSet
from .contact import (ContactPoint, FrictionState, WheelCollider,
                      contact_row_blocks, detect_ground_contacts)
from .pneumatics import ChannelBank, StrainLaw
from .sparse import CsrMatrix, mmwrite, mmwrite_dense
from .state import SystemState, build_mass_inverse, integrate_pose


def fischer_burmeister(a, b, delta: float = 1e-10):
    """phi(a, b) = a + b - sqrt(a^2 + b^2 + delta) and its two slopes.

    phi = 0 iff (up to the delta smoothing) a >= 0, b >= 0 and a*b = 0.
    The returned slopes are d(phi)/da and d(phi)/db, both in (0, 2).
    """
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    root = np.sqrt(a * a + b * b + delta)
    phi = a + b - root
    da = 1.0 - a / root
    db = 1.0 - b / root
    return phi, da, db


def pcr_solve(apply_a, rhs: np.ndarray, precond_diag: np.ndarray, iters: int,
              x0: np.ndarray | None = None):
    """Preconditioned conjugate residual on a symmetric PSD operator.

    apply_a maps x to A x. precond_diag is the Jacobi diagonal of A.
    Runs exactly `iters` iterations unless the operator breaks down
    (denominator underflow means the residual is at machine noise).
    Returns (x, history) where history[k] is the preconditioned
    residual norm sqrt(r^T D^-1 r) after k iterations; it is
    monotonically nonincreasing.
    """
    d = np.where(precond_diag > 1e-300, precond_diag, 1.0)
    if x0 is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
    else:
        x = np.asarray(x0, np.float64).copy()
        r = rhs - apply_a(x)
    z = r / d
    az = apply_a(z)
    p = z.copy()
    ap = az.copy()
    rho = float(z @ az)
    hist = [float(np.sqrt(max(r @ z, 0.0)))]
    for _ in range(iters):
        map_ = ap / d
        den = float(ap @ map_)
        if den <= 1e-300 or not np.isfinite(den):
            hist.append(hist[-1])
            continue
        alpha = rho / den
        x += alpha * p
        r -= alpha * ap
        z = r / d
        hist.append(float(np.sqrt(max(r @ z, 0.0))))
        az = apply_a(z)
        rho_new = float(z @ az)
        beta = rho_new / rho if rho > 1e-300 else 0.0
        rho = rho_new
        p = z + beta * p
        ap = az + beta * ap
    return x, np.array(hist)


@dataclass
class SolverConfig:
    dt: float = 1.0 / 60.0
    substeps: int = 2
    newton_iters: int = 4
    pcr_iters: int = 20
    gravity: tuple = (0.0, 0.0, -9.81)
    ground_height: float = 0.0
    ground_enabled: bool = True
    contact_margin: float = 0.005
    mu: float = 1.0
    friction_compliance: float = 1e-8
    fb_delta: float = 1e-10
    fb_slope_min: float = 1e-6
    fb_slope_max: float = 2.0
    max_strain_rate: float = 6.0
    constraint_damping: float = 1.0
    backend: str | None = None
    keep_matrix: bool = False

    @property
    def h(self) -> float:
        return self.dt / self.substeps


@dataclass
class SchurSystem:
    """Assembled reduced system, for inspection, dumps and small solves."""

    matrix: CsrMatrix
    rhs: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        return self.matrix.diagonal()

    def solve_dense(self) -> np.ndarray:
        return np.linalg.solve(self.matrix.to_dense(), self.rhs)


def assemble_schur(J: CsrMatrix, minv: CsrMatrix, reg: CsrMatrix,
                   rhs: np.ndarray) -> SchurSystem:
    """A = J M^-1 J^T + reg as explicit CSR."""
    A = (J @ minv @ J.transpose()).add(reg)
    return SchurSystem(A, np.asarray(rhs, np.float64))


@dataclass
class StepStats:
    newton_iterations: int = 0
    pcr_iterations: int = 0
    contact_count: int = 0
    inverted_tets: int = 0
    residual: float = 0.0
    wall_time: float = 0.0
    assembly_time: float = 0.0   # constraint evals, rhs, preconditioner
    solve_time: float = 0.0      # Krylov iterations


class Simulator:
    """Owns the state, the constraint sets and the stepping loop."""

    def __init__(self, state: SystemState, config: SolverConfig | None = None,
                 distances: DistanceSet | None = None,
                 tetras: TetraSet | None = None,
                 attachments: AttachmentSet | None = None,
                 hinges: HingeSet | None = None,
                 wheels: list[WheelCollider] | None = None,
                 channels: ChannelBank | None = None,
                 strain: StrainLaw | None = None,
                 contact_particles: np.ndarray | None = None):
        self.state = state
        self.config = config if config is not None else SolverConfig()
        self.distances = distances
        self.tetras = tetras
        self.attachments = attachments
        self.hinges = hinges
        self.wheels = wheels if wheels is not None else []
        self.channels = channels
        self.strain = strain
        self.contact_particles = contact_particles
        self.kern = (kernels.get_backend(self.config.backend)
                     if self.config.backend else kernels.active)

        self._bd0 = 3 * state.num_particles
        self._ndof = state.num_dof
        nd = distances.count if distances else 0
        nt = tetras.count if tetras else 0
        na = attachments.count if attachments else 0
        nh = hinges.count if hinges else 0
        self._nd, self._nt, self._na, self._nh = nd, nt, na, nh

        # static row layout: distance, tetra, attachment, hinge; contact
        # rows are appended per substep
        self._od = 0
        self._ot = nd
        self._oa = nd + 6 * nt
        self._oh = self._oa + 3 * na
        self._m_static = self._oh + 5 * nh

        h = self.config.h
        # constraint-space damping: the position feedback and compliance
        # terms are scaled by gamma = 1/(1 + d), which slows how fast a row
        # chases its rest state without moving the v = 0 equilibrium
        gamma = 1.0 / (1.0 + max(self.config.constraint_damping, 0.0))
        self._gamma = gamma

        if distances:
            self._idx_d = distances.dof_indices()
            self._res_d = np.empty(nd)
            self._vals_d = np.zeros((nd, 1, 6))
        if tetras:
            self._idx_t = tetras.dof_indices()
            self._res_t = np.empty((nt, 6))
            self._vals_t = np.zeros((nt, 6, 12))
            self._eh2 = gamma * tetras.compliance / (h * h)
            self._eh2_diag = np.ascontiguousarray(
                self._eh2[:, np.arange(6), np.arange(6)])
            self._ereg_tmp = np.empty((nt, 6))
        if attachments:
            self._idx_a = attachments.dof_indices(self._bd0)
            self._res_a = np.empty(3 * na)
            self._vals_a = np.zeros((na, 3, 9))
        if hinges:
            self._idx_h = hinges.dof_indices(self._bd0)
            self._res_h = np.empty(5 * nh)
            self._vals_h = np.zeros((nh, 5, 12))

        dyn = np.zeros(self._m_static)
        if distances:
            dyn[self._od:self._od + nd] = gamma * distances.compliance / (h * h)
        if attachments:
            dyn[self._oa:self._oa + 3 * na] = np.repeat(
                gamma * attachments.compliance / (h * h), 3)
        if hinges:
            dyn[self._oh:self._oh + 5 * nh] = np.repeat(
                gamma * hinges.compliance / (h * h), 5)
        self._dyn_static = dyn

        # actuated rows and their channels; the live strain trails the
        # pressure-derived target at a bounded rate so a command step does
        # not ask the mesh for its full extension within one substep
        self._act_rows = None
        self._act_channels = None
        self._strain_live = None
        self._strain_target = None
        if distances is not None and channels is not None and strain is not None:
            rows = np.nonzero(distances.channel >= 0)[0]
            if rows.size:
                self._act_rows = rows
                self._act_channels = distances.channel[rows]
                nchan = channels.pressures.shape[0]
                self._strain_live = np.ones(nchan)
                self._strain_target = np.ones(nchan)

        # persistent multipliers, warm started across substeps
        self.lam_dist = np.zeros(nd)
        self.lam_tetra = np.zeros((nt, 6))
        self.lam_attach = np.zeros((na, 3))
        self.lam_hinge = np.zeros((nh, 5))
        self._warm: dict = {}

        self._w = np.empty(self._ndof)
        self._u = np.empty(self._ndof)
        self._grav = np.asarray(self.config.gravity, np.float64)

        self.stats = StepStats()
        self.totals = {"steps": 0, "newton_iterations": 0, "pcr_iterations": 0,
                       "contact_count": 0, "inverted_tets": 0,
                       "assembly_time": 0.0, "solve_time": 0.0, "wall_time": 0.0}
        self._last_snapshot = None

    @property
    def static_rows(self) -> int:
        """Constraint rows excluding the per-substep contact rows."""
        return self._m_static

    # ------------------------------------------------------------ actuation

    def set_channel_targets(self, commands: np.ndarray, latency: bool = True) -> None:
        """Advance the pneumatic channels one tick toward the commands."""
        if self.channels is not None:
            self.channels.tick(np.asarray(commands, np.float64), latency=latency)

    def _update_actuation(self) -> None:
        if self._act_rows is None:
            return
        self._strain_target[:] = self.strain.strain(self.channels.pressures)

    def _slew_actuation(self) -> None:
        """Move the live strain toward the target, rate limited per substep."""
        if self._act_rows is None:
            return
        dmax = self.config.max_strain_rate * self.config.h
        d = np.clip(self._strain_target - self._strain_live, -dmax, dmax)
        self._strain_live += d
        self.distances.scale[self._act_rows] = \
            self._strain_live[self._act_channels]

    # ------------------------------------------------------------- stepping

    def step(self, commands: np.ndarray | None = None, latency: bool = True) -> StepStats:
        """Advance one frame of config.dt seconds."""
        t0 = _time.perf_counter()
        if commands is not None:
            self.set_channel_targets(commands, latency=latency)
        self._update_actuation()
        self.stats = StepStats()
        for _ in range(self.config.substeps):
            self._substep()
        self.stats.wall_time = _time.perf_counter() - t0
        self.totals["steps"] += 1
        self.totals["newton_iterations"] += self.stats.newton_iterations
        self.totals["pcr_iterations"] += self.stats.pcr_iterations
        self.totals["contact_count"] += self.stats.contact_count
        self.totals["inverted_tets"] += self.stats.inverted_tets
        self.totals["assembly_time"] += self.stats.assembly_time
        self.totals["solve_time"] += self.stats.solve_time
        self.totals["wall_time"] += self.stats.wall_time
        return self.stats

    def _predict_velocities(self, minv) -> np.ndarray:
        st = self.state
        h = self.config.h
        vt = st.get_velocities()
        npart = st.num_particles
        if npart:
            live = st.particles.inv_mass > 0.0
            vt[:self._bd0].reshape(-1, 3)[live] += h * self._grav
        nb = st.num_bodies
        if nb:
            tail = vt[self._bd0:].reshape(nb, 6)
            tail[:, :3] += h * self._grav
            w = st.body_ang_vel
            iww = np.einsum("nij,nj->ni", minv.ang, w)
            tau = -np.cross(w, iww)
            tail[:, 3:] += h * np.einsum("nij,nj->ni", minv.ang_inv, tau)
        return vt

    def _substep(self) -> None:
        cfg = self.config
        st = self.state
        be = self.kern
        h = cfg.h
        self._slew_actuation()
        minv = build_mass_inverse(st)
        vt = self._predict_velocities(minv)

        contacts: list[ContactPoint] = []
        if cfg.ground_enabled:
            contacts = detect_ground_contacts(
                st, self.wheels, cfg.ground_height, cfg.contact_margin,
                cfg.mu, self.contact_particles)
        nc = len(contacts)
        fs = FrictionState.for_contacts(contacts, self._warm)
        oc = self._m_static
        of = oc + nc
        m = of + 2 * nc

        fams = []
        if self._nd:
            fams.append((self._idx_d, self._vals_d, self._od, self._nd, 1))
        if self._nt:
            fams.append((self._idx_t, self._vals_t, self._ot, self._nt, 6))
        if self._na:
            fams.append((self._idx_a, self._vals_a, self._oa, self._na, 3))
        if self._nh:
            fams.append((self._idx_h, self._vals_h, self._oh, self._nh, 5))
        cdof = nvals = fvals = None
        if nc:
            cdof, nvals, fvals = contact_row_blocks(contacts, st, self._bd0)
            fams.append((cdof, nvals, oc, nc, 1))
            fams.append((cdof, fvals, of, nc, 2))

        dyn = np.zeros(m)
        dyn[:self._m_static] = self._dyn_static
        if nc:
            dyn[of:of + 2 * nc] = cfg.friction_compliance / (h * h)

        # Friction rows whose cone radius is zero are swapped for identity
        # rows (mask 0) so the Krylov solve cannot spend impulse on them;
        # otherwise the projection discards friction the other increments
        # were computed against, leaving unbalanced momentum in v.
        act = np.ones(m) if nc else None

        def apply_a(x):
            xa = x if act is None else x * act
            w = self._w
            w[:] = 0.0
            for idx, vals, off, n, r in fams:
                be.block_transpose(idx, vals, xa[off:off + n * r].reshape(n, r), w)
            u = self._u
            be.minv_apply(minv.diag, minv.ang_inv, self._bd0, w, u)
            y = np.empty(m)
            for idx, vals, off, n, r in fams:
                be.block_forward(idx, vals, u, y[off:off + n * r].reshape(n, r))
            y += dyn * xa
            if self._nt:
                xv = xa[self._ot:self._ot + 6 * self._nt].reshape(self._nt, 6)
                be.ereg_apply(self._eh2, xv, self._ereg_tmp)
                y[self._ot:self._ot + 6 * self._nt] += self._ereg_tmp.ravel()
            if act is not None:
                y *= act
                y += (1.0 - act) * x
            return y

        # constraint residuals and Jacobians anchored at the substep start
        # pose; the iterations below keep this linearization fixed and only
        # re-resolve the multiplier-dependent terms (compliance feedback,
        # Fischer-Burmeister slopes, friction) against the evolving velocity
        t_asm = _time.perf_counter()
        if self._nd:
            self.distances.eval(st.particles.positions, self._res_d,
                                self._vals_d, backend=be)
        if self._nt:
            self.stats.inverted_tets += self.tetras.eval(
                st.particles.positions, self._res_t, self._vals_t, backend=be)
        if self._na:
            self.attachments.eval(st, self._res_a.reshape(self._na, 3),
                                  self._vals_a)
        if self._nh:
            self.hinges.eval(st, self._res_h, self._vals_h)
        gaps = None
        if nc:
            gaps = np.array([c.gap for c in contacts])

        base_diag = np.empty(m)
        for idx, vals, off, n, r in fams:
            be.block_rowdiag(idx, vals, minv.diag,
                             base_diag[off:off + n * r].reshape(n, r))
        if self._nt:
            base_diag[self._ot:self._ot + 6 * self._nt] += self._eh2_diag.ravel()

        rhs = np.empty(m)
        jv = np.empty(m)
        lam = np.zeros(m)
        lam[:self._m_static] = self._pack_static_lambda()
        if nc:
            lam[oc:oc + nc] = fs.lambda_n
            lam[of:of + 2 * nc] = fs.lambda_f.ravel()
        v = vt.copy()
        self._apply_impulse(v, fams, lam, minv, be)
        self.stats.assembly_time += _time.perf_counter() - t_asm

        for _ in range(cfg.newton_iters):
            t_asm = _time.perf_counter()
            for idx, vals, off, n, r in fams:
                be.block_forward(idx, vals, v, jv[off:off + n * r].reshape(n, r))

            # velocity-level residual -> right hand side
            g = self._gamma
            if self._nd:
                seg = slice(self._od, self._od + self._nd)
                rhs[seg] = -(g * self._res_d / h + jv[seg]
                             + dyn[seg] * self.lam_dist)
            if self._nt:
                be.ereg_apply(self._eh2, self.lam_tetra, self._ereg_tmp)
                seg = slice(self._ot, self._ot + 6 * self._nt)
                rhs[seg] = -(g * self._res_t.ravel() / h + jv[seg]
                             + self._ereg_tmp.ravel())
            if self._na:
                seg = slice(self._oa, self._oa + 3 * self._na)
                rhs[seg] = -(g * self._res_a / h + jv[seg]
                             + dyn[seg] * self.lam_attach.ravel())
            if self._nh:
                seg = slice(self._oh, self._oh + 5 * self._nh)
                rhs[seg] = -(g * self._res_h / h + jv[seg]
                             + dyn[seg] * self.lam_hinge.ravel())
            if nc:
                phi, dpa, dpb = fischer_burmeister(
                    gaps / h + jv[oc:oc + nc], fs.lambda_n, cfg.fb_delta)
                dpa = np.clip(dpa, cfg.fb_slope_min, cfg.fb_slope_max)
                rhs[oc:oc + nc] = -phi / dpa
                dyn[oc:oc + nc] = dpb / dpa
                segf = slice(of, of + 2 * nc)
                a2 = np.repeat(fs.active_set(), 2).astype(float)
                act[segf] = a2
                rhs[segf] = -a2 * (jv[segf] + dyn[segf] * fs.lambda_f.ravel())

            diag = base_diag + dyn
            np.maximum(diag, 1e-30, out=diag)
            if nc:
                seg = diag[of:of + 2 * nc]
                diag[of:of + 2 * nc] = np.where(a2 > 0.0, seg, 1.0)
            t_slv = _time.perf_counter()
            self.stats.assembly_time += t_slv - t_asm

            dl, hist = pcr_solve(apply_a, rhs, diag, cfg.pcr_iters)
            self.stats.solve_time += _time.perf_counter() - t_slv
            self.stats.pcr_iterations += len(hist) - 1
            self.stats.residual = float(hist[-1])

            lam_before = lam.copy()
            if self._nd:
                self.lam_dist += dl[self._od:self._od + self._nd]
            if self._nt:
                self.lam_tetra += dl[self._ot:self._ot + 6 * self._nt].reshape(
                    self._nt, 6)
            if self._na:
                self.lam_attach += dl[self._oa:self._oa + 3 * self._na].reshape(
                    self._na, 3)
            if self._nh:
                self.lam_hinge += dl[self._oh:self._oh + 5 * self._nh].reshape(
                    self._nh, 5)
            if nc:
                fs.lambda_n += dl[oc:oc + nc]
                fs.lambda_f += dl[of:of + 2 * nc].reshape(nc, 2)
                fs.project()

            lam[:self._m_static] = self._pack_static_lambda()
            if nc:
                lam[oc:oc + nc] = fs.lambda_n
                lam[of:of + 2 * nc] = fs.lambda_f.ravel()
            np.subtract(lam, lam_before, out=lam_before)
            self._apply_impulse(v, fams, lam_before, minv, be)
            self.stats.newton_iterations += 1

        if cfg.keep_matrix:
            self._last_snapshot = {
                "fams": [(idx.copy(), vals.copy(), off, n, r)
                         for idx, vals, off, n, r in fams],
                "dyn": dyn.copy(), "rhs": rhs.copy(), "minv": minv,
                "m": m, "ot": self._ot, "nt": self._nt,
            }

        st.set_velocities(v)
        integrate_pose(st, h)
        self._warm = fs.store_warm(contacts)
        self.stats.contact_count += nc

    def _pack_static_lambda(self) -> np.ndarray:
        out = np.empty(self._m_static)
        if self._nd:
            out[self._od:self._od + self._nd] = self.lam_dist
        if self._nt:
            out[self._ot:self._ot + 6 * self._nt] = self.lam_tetra.ravel()
        if self._na:
            out[self._oa:self._oa + 3 * self._na] = self.lam_attach.ravel()
        if self._nh:
            out[self._oh:self._oh + 5 * self._nh] = self.lam_hinge.ravel()
        return out

    def _apply_impulse(self, v, fams, dlam, minv, be) -> None:
        """v += M^-1 J^T dlam, each row applied at the Jacobian it was solved with."""
        w = self._w
        w[:] = 0.0
        for idx, vals, off, n, r in fams:
            be.block_transpose(idx, vals, dlam[off:off + n * r].reshape(n, r), w)
        be.minv_apply(minv.diag, minv.ang_inv, self._bd0, w, self._u)
        v += self._u

    # ------------------------------------------------------------ inspection

    def last_system(self) -> SchurSystem:
        """Explicit CSR of the most recent Newton system (keep_matrix on)."""
        snap = self._last_snapshot
        if snap is None:
            raise RuntimeError("no system snapshot; set config.keep_matrix and step")
        m = snap["m"]
        rows, cols, vals = [], [], []
        for idx, bvals, off, n, r in snap["fams"]:
            k = idx.shape[1]
            rr = np.repeat(off + np.arange(n * r), k)
            cc = np.broadcast_to(idx[:, None, :], (n, r, k)).ravel()
            rows.append(rr)
            cols.append(cc)
            vals.append(bvals.ravel())
        J = CsrMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                               np.concatenate(vals), (m, self._ndof))
        rr = [np.arange(m)]
        cc = [np.arange(m)]
        vv = [snap["dyn"]]
        nt, ot = snap["nt"], snap["ot"]
        if nt:
            base = ot + 6 * np.arange(nt)
            rr.append(np.repeat(base, 36) + np.tile(np.repeat(np.arange(6), 6), nt))
            cc.append(np.repeat(base, 36) + np.tile(np.tile(np.arange(6), 6), nt))
            vv.append(self._eh2.ravel())
        reg = CsrMatrix.from_coo(np.concatenate(rr), np.concatenate(cc),
                                 np.concatenate(vv), (m, m))
        return assemble_schur(J, snap["minv"].matrix(), reg, snap["rhs"])

    def export_system(self, path_a: str, path_b: str) -> None:
        """Write the last Newton system as Matrix Market files."""
        sys_ = self.last_system()
        mmwrite(path_a, sys_.matrix)
        mmwrite_dense(path_b, sys_.rhs)
