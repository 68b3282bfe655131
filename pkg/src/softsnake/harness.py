"""Experiment harness: the four standard runs and their CSV output.

Each run returns a record object carrying the resolved configuration,
a column list and per-sample rows; emit_csv writes it with the config
as a comment preamble, floats at 9 significant digits, deterministic
ordering. Simulation-derived values are bit-reproducible between runs
of the same config; wall-clock timings appear only in the benchmark
report, which is the one output that cannot be byte-stable.
"""
from __future__ import annotations

import csv
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pneumatics import StrainLaw
from .scene import SceneConfig
from .snake import GaitParams, SnakeModel, build_bend_fixture, build_snake
from .state import center_of_mass, kinetic_energy

SETTLE_ENERGY_J = 1e-6
SETTLE_HOLD_S = 0.5


@dataclass
class ExperimentRecord:
    """Append-only sample table plus the config that produced it."""

    experiment: str
    config: list[tuple[str, str]]
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row width {len(values)} != {len(self.columns)} columns")
        self.rows.append(tuple(values))


@dataclass
class TimingReport:
    """Per-scene-size wall-time table from the scaling benchmark."""

    experiment: str
    config: list[tuple[str, str]]
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row width {len(values)} != {len(self.columns)} columns")
        self.rows.append(tuple(values))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % float(v)
    return str(v)


def emit_csv(record, path: str) -> None:
    """Write a record (experiment or timing) as commented-header CSV."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# experiment = {record.experiment}\n")
            for key, val in record.config:
                f.write(f"# {key} = {val}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(record.columns)
            for row in record.rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as e:
        raise OSError(f"cannot write experiment output to {path}: {e}") from e


def _settle(model: SnakeModel, commands: np.ndarray,
            max_frames: int = 900) -> bool:
    """Step until kinetic energy stays under threshold for the hold time."""
    sim = model.sim
    hold_frames = max(1, int(round(SETTLE_HOLD_S / sim.config.dt)))
    quiet = 0
    for _ in range(max_frames):
        sim.step(commands, latency=False)
        if kinetic_energy(sim.state) < SETTLE_ENERGY_J:
            quiet += 1
            if quiet >= hold_frames:
                return True
        else:
            quiet = 0
    return False


def run_curvature_sweep(scene: SceneConfig, pressures=None,
                        samples_per_level: int = 30,
                        out_path: str | None = None) -> ExperimentRecord:
    """Quasi-static curvature per held pressure level, both chambers.

    Signed pressures select the chamber: positive inflates the right
    chamber (bend toward +y), negative the left. Each level starts
    from a fresh straight link, snaps the chamber pressure (latency
    off; this is the steady state) and waits for the settle criterion.
    """
    if pressures is None:
        pressures = [float(p) for p in range(-8, 9)]
    for p in pressures:
        if abs(p) > 10.0:
            raise ValueError("pressure levels must stay within +-10 psi")
    rec = ExperimentRecord(
        "curvature-sweep", scene.to_items(),
        ["tick", "time_s", "pressure_psi", "curvature_mean", "curvature_std",
         "settled"])
    for level, p in enumerate(pressures):
        model = build_bend_fixture(scene)
        commands = np.array([float(p)])
        settled = _settle(model, commands)
        samples = np.empty(samples_per_level)
        for s in range(samples_per_level):
            model.sim.step(commands, latency=False)
            samples[s] = model.link_curvature(0)
        rec.append(level, model.sim.state.time, float(p),
                   float(np.mean(samples)), float(np.std(samples)),
                   1 if settled else 0)
    if out_path:
        emit_csv(rec, out_path)
    return rec


def run_step_response(scene: SceneConfig, targets=(0.6, 0.7, 0.8, 0.9, 1.0),
                      hold_s: float = 2.0,
                      out_path: str | None = None) -> ExperimentRecord:
    """Inflate-from-zero then deflate-to-zero traces per target fraction.

    Pressure follows the valve latency model tick by tick; the
    mechanical trace (curvature) comes from a bend fixture driven by
    the same channel. Targets are fractions of the supply pressure.
    """
    for t in targets:
        if not 0.0 < t <= 1.0:
            raise ValueError("targets must be fractions of supply in (0, 1]")
    rec = ExperimentRecord(
        "step-response", scene.to_items(),
        ["tick", "time_s", "target_fraction", "phase", "pressure_psi",
         "strain", "curvature"])
    law = StrainLaw(scene.youngs_modulus)
    hold = int(round(hold_s / scene.dt))
    for frac in targets:
        model = build_bend_fixture(scene)
        sim = model.sim
        tick = 0
        for phase, command in (("inflate", frac * scene.supply_psi), ("deflate", 0.0)):
            commands = np.array([command])
            for _ in range(hold):
                sim.step(commands, latency=True)
                p = float(sim.channels.pressures[1])  # right chamber
                rec.append(tick, sim.state.time, frac, phase, p,
                           law.strain(p), model.link_curvature(0))
                tick += 1
    if out_path:
        emit_csv(rec, out_path)
    return rec


def run_locomotion(scene: SceneConfig, gait: GaitParams | None = None,
                   duration: float | None = None, latency_enabled: bool = True,
                   out_path: str | None = None,
                   model: SnakeModel | None = None) -> ExperimentRecord:
    """Open-loop gait on the ground; records the COM trajectory per frame.

    Divergence (non-finite state) aborts the run and returns the rows
    collected so far, with the final row flagged.
    """
    g = gait if gait is not None else GaitParams.from_scene(scene)
    T = duration if duration is not None else scene.duration
    m = model if model is not None else build_snake(scene)
    sim = m.sim
    nch = sim.channels.pressures.shape[0]
    rec = ExperimentRecord(
        "locomote", scene.to_items(),
        ["tick", "time_s", "com_x", "com_y", "com_z", "head_yaw",
         "path_xy", "contacts", "pcr_iterations", "diverged"]
        + [f"curvature_{i}" for i in range(m.links_per_snake)]
        + [f"pressure_{i}" for i in range(nch)])
    frames = int(round(T / sim.config.dt))
    path = 0.0
    prev = center_of_mass(sim.state)
    for i in range(frames):
        t = i * sim.config.dt
        stats = sim.step(m.commands(t, g), latency=latency_enabled)
        com = center_of_mass(sim.state)
        ok = bool(np.all(np.isfinite(com)))
        if ok:
            path += float(np.hypot(com[0] - prev[0], com[1] - prev[1]))
            prev = com
        curv = [m.link_curvature(k) for k in range(m.links_per_snake)]
        press = [float(p) for p in sim.channels.pressures]
        rec.append(i, sim.state.time, float(com[0]), float(com[1]),
                   float(com[2]), m.head_yaw(), path, stats.contact_count,
                   stats.pcr_iterations, 0 if ok else 1, *curv, *press)
        if not ok:
            break
    if out_path:
        emit_csv(rec, out_path)
    return rec


def run_benchmark(scene: SceneConfig, snake_counts=(1, 2, 3, 4),
                  frames: int = 60, warmup: int = 5,
                  include_single_link: bool = True,
                  backends: list[str] | None = None,
                  out_path: str | None = None) -> TimingReport:
    """Wall time per frame against scene size, per kernel backend.

    Sizes run sequentially; warm-up frames (JIT, cache fill) are
    excluded from the statistics. The single-link row is the quarter
    snake from the bending experiments.
    """
    if backends is None:
        backends = [kernels.active.NAME]
    rep = TimingReport(
        "bench", scene.to_items(),
        ["backend", "snakes", "particles", "bodies", "constraint_rows",
         "frames", "assembly_ms", "solve_ms", "total_ms", "total_ms_std",
         "total_per_snake_ms"])
    cases: list[tuple[float, object]] = []
    if include_single_link:
        cases.append((0.25, lambda sc: build_bend_fixture(sc)))
    for n in snake_counts:
        if n < 1:
            raise ValueError("snake counts must be >= 1")
        cases.append((float(n), lambda sc, n=n: build_snake(sc, n_snakes=n)))
    for backend in backends:
        for count, make in cases:
            sc = SceneConfig(**{**scene.__dict__, "backend": backend})
            m = make(sc)
            sim = m.sim
            g = GaitParams.from_scene(sc)
            for i in range(warmup):
                sim.step(m.commands(i * sim.config.dt, g))
            times = np.empty(frames)
            asm = 0.0
            slv = 0.0
            for i in range(frames):
                t = (warmup + i) * sim.config.dt
                t0 = _time.perf_counter()
                stats = sim.step(m.commands(t, g))
                times[i] = _time.perf_counter() - t0
                asm += stats.assembly_time
                slv += stats.solve_time
            total_ms = float(np.mean(times) * 1e3)
            rep.append(backend, count, sim.state.num_particles,
                       sim.state.num_bodies, sim.static_rows, frames,
                       asm / frames * 1e3, slv / frames * 1e3, total_ms,
                       float(np.std(times) * 1e3), total_ms / count)
    if out_path:
        emit_csv(rep, out_path)
    return rep
