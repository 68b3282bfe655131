"""Robot assembly: soft links, rigid carriages, wheels, cabling, gait.

A snake is a chain of pneumatic bending links joined by rigid wheeled
carriages. Each link is a hexahedral particle grid split into five
tetrahedra per cell with alternating parity, plus distance-constraint
"fibers": actuated chamber cables along the outer columns, an
inextensible spine along the center plane, cross-section rings and
chamber cross braces. Link end sections bolt to the carriage frames
through attachment constraints; wheels hang on free hinges so ground
friction is low along the body and high sideways, which is what turns
body undulation into travel.

Axes: +x forward along the body, +y left, +z up. The right chamber
sits at negative y; pressurizing it stretches the right side and bends
the link toward +y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import (AttachmentConstraint, AttachmentSet,
                          DistanceConstraint, DistanceSet, HingeJoint,
                          HingeSet, KIND_ACTUATION, KIND_INEXTENSIBLE,
                          KIND_STRUCTURAL, TetraElement, TetraSet)
from .contact import WheelCollider
from .pneumatics import ChannelBank, StrainLaw
from .scene import SceneConfig
from .solver import Simulator
from .state import ParticleSet, RigidBody, SystemState, rotation_matrix

# five-tetra cell split; parity alternates which corners are cut so
# shared faces between neighboring cells carry matching diagonals
_CELL_EVEN = (
    ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((1, 1, 0), (0, 1, 0), (1, 0, 0), (1, 1, 1)),
    ((1, 0, 1), (0, 0, 1), (1, 1, 1), (1, 0, 0)),
    ((0, 1, 1), (1, 1, 1), (0, 0, 1), (0, 1, 0)),
    ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)),
)
_CELL_ODD = (
    ((1, 0, 0), (0, 0, 0), (1, 1, 0), (1, 0, 1)),
    ((0, 1, 0), (1, 1, 0), (0, 0, 0), (0, 1, 1)),
    ((0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 0)),
    ((1, 1, 1), (0, 1, 1), (1, 0, 1), (1, 1, 0)),
    ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)),
)


def heading_yaw(quat: np.ndarray) -> float:
    """Yaw of the body +x axis, in radians, about world +z."""
    h = rotation_matrix(quat)[:, 0]
    return math.atan2(h[1], h[0])


@dataclass
class GaitParams:
    """Open-loop serpentine generator: a_i = clamp(sin(w t + alpha i) + phi) A.

    amplitude_psi is the command magnitude A, frequency the wave rate
    (Hz by default, rad/s when omega_in_radians is set), phase_offset
    the per-link phase alpha, turn_bias the steering offset phi.
    """

    amplitude_psi: float = 8.0
    frequency: float = 2.0
    phase_offset: float = 0.5 * math.pi
    turn_bias: float = 0.0
    omega_in_radians: bool = False

    @classmethod
    def from_scene(cls, scene: SceneConfig) -> "GaitParams":
        return cls(scene.amplitude_psi, scene.frequency, scene.phase_offset,
                   scene.turn_bias, scene.omega_in_radians)

    def angular_rate(self) -> float:
        return self.frequency if self.omega_in_radians else 2.0 * math.pi * self.frequency


@dataclass
class LinkMesh:
    """One link's share of the global particle and constraint lists."""

    base: int                  # first global particle id
    positions: np.ndarray      # (n, 3) rest positions
    masses: np.ndarray         # (n,)
    tets: list
    cables: list
    start_section: np.ndarray  # particle ids of the x = 0 face
    end_section: np.ndarray
    start_mounts: np.ndarray   # rim subset of the face carrying the frame
    end_mounts: np.ndarray


def build_link_mesh(scene: SceneConfig, base: int, origin: np.ndarray,
                    left_channel: int, right_channel: int) -> LinkMesh:
    S, W, H = scene.sections, scene.width_nodes, scene.height_nodes
    if W < 5 or H < 2 or S < 2:
        raise ValueError("link grid needs at least 5x2 nodes and 2 sections")
    dx = scene.link_length / (S - 1)
    dy = scene.link_width / (W - 1)
    dz = scene.link_height / (H - 1)

    def nid(i, j, k):
        return base + (i * W + j) * H + k

    n = S * W * H
    pos = np.empty((n, 3))
    for i in range(S):
        for j in range(W):
            for k in range(H):
                pos[nid(i, j, k) - base] = origin + np.array(
                    [i * dx, j * dy - 0.5 * scene.link_width, k * dz])

    masses = np.zeros(n)
    tets = []
    for i in range(S - 1):
        for j in range(W - 1):
            for k in range(H - 1):
                cell = _CELL_EVEN if (i + j + k) % 2 == 0 else _CELL_ODD
                for corners in cell:
                    ids = np.array([nid(i + di, j + dj, k + dk)
                                    for di, dj, dk in corners])
                    el = TetraElement.from_positions(
                        ids, pos[ids - base], scene.youngs_modulus,
                        scene.poisson)
                    tets.append(el)
                    masses[ids - base] += scene.density * el.rest_volume / 4.0

    def dist(a, b, compliance, kind, channel=-1):
        rest = float(np.linalg.norm(pos[a - base] - pos[b - base]))
        return DistanceConstraint(a, b, rest, compliance, kind, channel)

    cables = []
    # Actuated chamber cables along the two outer columns; the right
    # chamber (negative y, j = 0) elongates under its channel pressure.
    # Each cable spans its whole chain end to end, the way a bellows
    # pushes on its flanges: an end-to-end length cannot be satisfied
    # by wrinkling the face nodes between the ends, so the drive turns
    # into a bending moment instead of a surface zigzag.
    for j, channel in ((0, right_channel), (W - 1, left_channel)):
        for k in range(H):
            cables.append(dist(nid(0, j, k), nid(S - 1, j, k),
                               scene.actuation_compliance,
                               KIND_ACTUATION, channel))
    # inextensible spine along the center plane
    jc = W // 2
    for k in range(H):
        for i in range(S - 1):
            cables.append(dist(nid(i, jc, k), nid(i + 1, jc, k),
                               scene.inextensible_compliance,
                               KIND_INEXTENSIBLE))
    # cross-section perimeter rings on two of every three sections
    for i in range(S):
        if i % 3 == 1:
            continue
        for k in (0, H - 1):
            for j in range(W - 1):
                cables.append(dist(nid(i, j, k), nid(i, j + 1, k),
                                   scene.structural_compliance,
                                   KIND_STRUCTURAL))
        for j in (0, W - 1):
            for k in range(H - 1):
                cables.append(dist(nid(i, j, k), nid(i, j, k + 1),
                                   scene.structural_compliance,
                                   KIND_STRUCTURAL))
    # chamber cross braces in each section plane
    for i in range(S):
        for j0 in (0, W - 1):
            j1 = 2 if j0 == 0 else W - 3
            cables.append(dist(nid(i, j0, 0), nid(i, j1, H - 1),
                               scene.structural_compliance, KIND_STRUCTURAL))
            cables.append(dist(nid(i, j0, H - 1), nid(i, j1, 0),
                               scene.structural_compliance, KIND_STRUCTURAL))

    start = np.array([nid(0, j, k) for j in range(W) for k in range(H)])
    end = np.array([nid(S - 1, j, k) for j in range(W) for k in range(H)])
    # Frames grip each face at six rim points (corners plus mid-width,
    # top and bottom). Welding every face node to the frame would stack
    # dozens of near-parallel rows on six body freedoms, and the
    # redundant multipliers wander under a fixed iteration budget.
    jm = W // 2
    mounts = [(j, k) for j in (0, jm, W - 1) for k in (0, H - 1)]
    start_m = np.array([nid(0, j, k) for j, k in mounts])
    end_m = np.array([nid(S - 1, j, k) for j, k in mounts])
    return LinkMesh(base, pos, masses, tets, cables, start, end,
                    start_m, end_m)


@dataclass
class SnakeModel:
    """A ready-to-step simulator plus the indices needed to measure it."""

    sim: Simulator
    scene: SceneConfig
    n_snakes: int
    links_per_snake: int
    frame_bodies: np.ndarray   # (n_snakes, links + 1) rigid body ids
    body_length: float

    def commands(self, t: float, gait: GaitParams | None = None) -> np.ndarray:
        g = gait if gait is not None else GaitParams.from_scene(self.scene)
        return gait_commands(g, t, self.n_snakes * self.links_per_snake,
                             self.links_per_snake)

    def center_of_mass(self) -> np.ndarray:
        from .state import center_of_mass
        return center_of_mass(self.sim.state)

    def link_curvature(self, link: int, snake: int = 0) -> float:
        """Signed bend of one link from the yaw of its two end frames.

        Positive curvature bends the body toward +y. Yaw is divided by
        the rest length of the bending section, so a straight link
        reads zero and a quarter circle reads (pi/2) / length.
        """
        st = self.sim.state
        a = self.frame_bodies[snake, link]
        b = self.frame_bodies[snake, link + 1]
        ya = heading_yaw(st.body_quat[a])
        yb = heading_yaw(st.body_quat[b])
        d = yb - ya
        while d > math.pi:
            d -= 2.0 * math.pi
        while d < -math.pi:
            d += 2.0 * math.pi
        return d / self.scene.link_length

    def head_yaw(self, snake: int = 0) -> float:
        return heading_yaw(self.sim.state.body_quat[self.frame_bodies[snake, 0]])


def gait_commands(gait: GaitParams, t: float, n_links_total: int,
                  links_per_snake: int) -> np.ndarray:
    """Per-link signed pressure commands (psi) for the serpentine gait."""
    w = gait.angular_rate()
    i = np.arange(n_links_total) % links_per_snake
    raw = np.sin(w * t + gait.phase_offset * i) + gait.turn_bias
    return np.clip(raw, -1.0, 1.0) * gait.amplitude_psi


def _frame_inertia(scene: SceneConfig) -> np.ndarray:
    m = scene.frame_mass
    lx = scene.frame_length
    ly = 2.0 * scene.wheel_offset_y
    lz = scene.link_height
    return np.diag([m / 12.0 * (ly * ly + lz * lz),
                    m / 12.0 * (lx * lx + lz * lz),
                    m / 12.0 * (lx * lx + ly * ly)])


def _wheel_inertia(scene: SceneConfig) -> np.ndarray:
    m = scene.wheel_mass
    r = scene.wheel_radius
    return np.diag([0.25 * m * r * r, 0.5 * m * r * r, 0.25 * m * r * r])


def build_snake(scene: SceneConfig, n_snakes: int | None = None,
                with_wheels: bool = True, ground: bool = True,
                gravity: tuple | None = None) -> SnakeModel:
    """Assemble n side-by-side snakes into one simulator."""
    ns = n_snakes if n_snakes is not None else scene.snakes
    links = scene.links
    spacing = 0.3  # lateral gap between snakes; wide enough to never collide

    positions = []
    masses = []
    tet_elements = []
    cables = []
    attachments = []
    hinges = []
    bodies: list[RigidBody] = []
    wheels: list[WheelCollider] = []
    frame_ids = np.zeros((ns, links + 1), np.int32)

    axis_y = np.array([0.0, 1.0, 0.0])
    base = 0
    for s in range(ns):
        yoff = (s - 0.5 * (ns - 1)) * spacing
        # carriage frames and wheels first so hinge indexing is local
        sframe = []
        for c in range(links + 1):
            ctr = np.array([scene.pitch * c + 0.5 * scene.frame_length,
                            yoff, scene.frame_height])
            frame_id = len(bodies)
            bodies.append(RigidBody.create(ctr, scene.frame_mass,
                                           _frame_inertia(scene)))
            sframe.append(frame_id)
            if with_wheels:
                for side in (-1.0, 1.0):
                    anchor = np.array([0.0, side * scene.wheel_offset_y,
                                       -scene.wheel_drop])
                    wid = len(bodies)
                    bodies.append(RigidBody.create(ctr + anchor,
                                                   scene.wheel_mass,
                                                   _wheel_inertia(scene)))
                    hinges.append(HingeJoint(wid, frame_id,
                                             np.zeros(3), anchor,
                                             axis_y.copy(), axis_y.copy(),
                                             scene.hinge_compliance))
                    wheels.append(WheelCollider(wid, scene.wheel_radius,
                                                axis_y.copy()))
        frame_ids[s] = sframe

        for li in range(links):
            link_global = s * links + li
            origin = np.array([scene.pitch * li + scene.frame_length,
                               yoff, scene.clearance])
            mesh = build_link_mesh(scene, base, origin,
                                   2 * link_global, 2 * link_global + 1)
            positions.append(mesh.positions)
            masses.append(mesh.masses)
            tet_elements.extend(mesh.tets)
            cables.extend(mesh.cables)
            for pid in mesh.start_mounts:
                anchor = mesh.positions[pid - base] - bodies[sframe[li]].position
                attachments.append(AttachmentConstraint(
                    pid, sframe[li], anchor, scene.attachment_compliance))
            for pid in mesh.end_mounts:
                anchor = mesh.positions[pid - base] - bodies[sframe[li + 1]].position
                attachments.append(AttachmentConstraint(
                    pid, sframe[li + 1], anchor, scene.attachment_compliance))
            base += mesh.positions.shape[0]

    particles = ParticleSet.create(np.concatenate(positions, axis=0),
                                   np.concatenate(masses))
    state = SystemState.create(particles, bodies)

    cfg = scene.solver_config()
    cfg.ground_enabled = ground
    if gravity is not None:
        cfg.gravity = gravity
    channels = ChannelBank.create(ns * links, k_inflate=scene.k_inflate,
                                  k_deflate=scene.k_deflate,
                                  deflate_cap=scene.deflate_cap_psi,
                                  supply=scene.supply_psi)
    sim = Simulator(
        state, cfg,
        distances=DistanceSet.from_constraints(cables),
        tetras=TetraSet.from_elements(tet_elements),
        attachments=AttachmentSet.from_constraints(attachments),
        hinges=HingeSet.from_joints(hinges) if hinges else None,
        wheels=wheels, channels=channels,
        strain=StrainLaw(scene.youngs_modulus))
    body_length = scene.pitch * links + scene.frame_length
    return SnakeModel(sim, scene, ns, links, frame_ids, body_length)


def build_bend_fixture(scene: SceneConfig) -> SnakeModel:
    """One link cantilevered off a rigid clamp, no gravity, no ground.

    This isolates the pneumatic bending response the way the physical
    bench test does: the first cross-section is pinned as if held in a
    vise, so the clamp absorbs any net momentum from the inflation
    transient. Inflate a chamber, let the link settle, read the
    curvature from the end frames.
    """
    one = SceneConfig(**{**scene.__dict__, "links": 1, "snakes": 1})
    model = build_snake(one, n_snakes=1, with_wheels=False, ground=False,
                        gravity=(0.0, 0.0, 0.0))
    clamp = np.arange(one.width_nodes * one.height_nodes)
    model.sim.state.particles.inv_mass[clamp] = 0.0
    return model
