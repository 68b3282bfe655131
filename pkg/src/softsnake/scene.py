"""Scene files: human-readable INI describing robot, gait and solver.

Every key has a default matching the reference hardware, so an empty
file (or no file at all) gives the standard four-link snake. Unknown
sections or keys raise, which catches typos early.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

from .solver import SolverConfig


@dataclass
class SceneConfig:
    # snake
    links: int = 4
    sections: int = 13
    width_nodes: int = 7
    height_nodes: int = 4
    link_length: float = 0.12
    link_width: float = 0.04
    link_height: float = 0.03
    density: float = 1070.0
    youngs_modulus: float = 66243.0
    # Nearly incompressible silicone reads as 0.4999, but linear
    # tetrahedra on a coarse regular grid lock volumetrically there and
    # bend an order of magnitude too stiff. 0.49 keeps the material
    # effectively incompressible at this resolution without the locking
    # penalty; the measured hardware curvature response is recovered.
    poisson: float = 0.49
    clearance: float = 0.005
    pitch: float = 0.16
    snakes: int = 1
    # carriage
    frame_mass: float = 0.05
    frame_length: float = 0.04
    frame_height: float = 0.02
    wheel_radius: float = 0.015
    wheel_mass: float = 0.008
    wheel_offset_y: float = 0.03
    wheel_drop: float = 0.005
    # pneumatics
    supply_psi: float = 8.0
    k_inflate: float = 0.23
    k_deflate: float = 0.23
    deflate_cap_psi: float = 0.68
    tick_hz: float = 60.0
    # gait
    amplitude_psi: float = 8.0
    frequency: float = 2.0
    omega_in_radians: bool = False
    phase_offset: float = 0.5 * math.pi
    turn_bias: float = 0.0
    # solver
    dt: float = 1.0 / 60.0
    substeps: int = 2
    newton_iters: int = 4
    pcr_iters: int = 20
    mu: float = 1.0
    gravity_z: float = -9.81
    contact_margin: float = 0.005
    constraint_damping: float = 10.0
    max_strain_rate: float = 6.0
    backend: str = ""
    # compliance
    actuation_compliance: float = 1e-6
    structural_compliance: float = 1e-8
    inextensible_compliance: float = 1e-9
    attachment_compliance: float = 1e-9
    hinge_compliance: float = 1e-10
    friction_compliance: float = 1e-8
    # sim
    duration: float = 10.0
    latency: bool = True

    @classmethod
    def from_file(cls, path: str) -> "SceneConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_string(f.read())

    @classmethod
    def from_string(cls, text: str) -> "SceneConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        out = cls()
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ValueError(f"unknown scene section [{section}]")
            for key, raw in parser.items(section):
                name = _SECTIONS[section].get(key)
                if name is None:
                    raise ValueError(f"unknown scene key {section}.{key}")
                cur = getattr(out, name)
                if isinstance(cur, bool):
                    val = parser.getboolean(section, key)
                elif isinstance(cur, int):
                    val = int(raw)
                elif isinstance(cur, float):
                    val = float(raw)
                else:
                    val = raw.strip()
                setattr(out, name, val)
        return out

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            dt=self.dt, substeps=self.substeps, newton_iters=self.newton_iters,
            pcr_iters=self.pcr_iters, gravity=(0.0, 0.0, self.gravity_z),
            contact_margin=self.contact_margin, mu=self.mu,
            friction_compliance=self.friction_compliance,
            constraint_damping=self.constraint_damping,
            max_strain_rate=self.max_strain_rate,
            backend=self.backend or None)

    def to_items(self) -> list[tuple[str, str]]:
        """Flat section.key=value pairs, stable order, for file preambles."""
        items = []
        for section, mapping in _SECTIONS.items():
            for key, name in mapping.items():
                v = getattr(self, name)
                if isinstance(v, bool):
                    s = "true" if v else "false"
                elif isinstance(v, float):
                    s = repr(v)
                else:
                    s = str(v)
                items.append((f"{section}.{key}", s))
        return items

    def write(self, path: str) -> None:
        lines = []
        last = None
        for full, val in self.to_items():
            section, key = full.split(".", 1)
            if section != last:
                if last is not None:
                    lines.append("")
                lines.append(f"[{section}]")
                last = section
            lines.append(f"{key} = {val}")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")


_SECTIONS: dict[str, dict[str, str]] = {
    "snake": {
        "links": "links", "sections": "sections", "width_nodes": "width_nodes",
        "height_nodes": "height_nodes", "link_length": "link_length",
        "link_width": "link_width", "link_height": "link_height",
        "density": "density", "youngs_modulus": "youngs_modulus",
        "poisson": "poisson", "clearance": "clearance", "pitch": "pitch",
        "snakes": "snakes",
    },
    "carriage": {
        "frame_mass": "frame_mass", "frame_length": "frame_length",
        "frame_height": "frame_height", "wheel_radius": "wheel_radius",
        "wheel_mass": "wheel_mass", "wheel_offset_y": "wheel_offset_y",
        "wheel_drop": "wheel_drop",
    },
    "pneumatics": {
        "supply_psi": "supply_psi", "k_inflate": "k_inflate",
        "k_deflate": "k_deflate", "deflate_cap_psi": "deflate_cap_psi",
        "tick_hz": "tick_hz",
    },
    "gait": {
        "amplitude_psi": "amplitude_psi", "frequency": "frequency",
        "omega_in_radians": "omega_in_radians", "phase_offset": "phase_offset",
        "turn_bias": "turn_bias",
    },
    "solver": {
        "dt": "dt", "substeps": "substeps", "newton_iters": "newton_iters",
        "pcr_iters": "pcr_iters", "mu": "mu", "gravity_z": "gravity_z",
        "contact_margin": "contact_margin",
        "constraint_damping": "constraint_damping",
        "max_strain_rate": "max_strain_rate", "backend": "backend",
    },
    "compliance": {
        "actuation": "actuation_compliance", "structural": "structural_compliance",
        "inextensible": "inextensible_compliance",
        "attachment": "attachment_compliance", "hinge": "hinge_compliance",
        "friction": "friction_compliance",
    },
    "sim": {
        "duration": "duration", "latency": "latency",
    },
}
