"""Command line front end: one experiment per invocation.

Exit codes: 0 on success, 2 when the simulation diverged (the partial
record is still written), 1 on bad arguments or scene files.
"""
from __future__ import annotations

import argparse
import os
import sys

from .harness import (run_benchmark, run_curvature_sweep, run_locomotion,
                      run_step_response)
from .scene import SceneConfig
from .snake import build_snake


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="softsnake",
        description="pneumatic soft snake simulator: experiments and benchmarks")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--scene", help="scene INI file (defaults when omitted)")
        p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("curvature-sweep", help="quasi-static curvature vs pressure")
    common(p)
    p.add_argument("--pressures", type=_floats,
                   help="comma list of signed psi levels (default -8..8)")
    p.add_argument("--samples", type=int, default=30,
                   help="settled samples averaged per level")

    p = sub.add_parser("step-response", help="valve latency inflate/deflate traces")
    common(p)
    p.add_argument("--targets", type=_floats,
                   help="comma list of supply fractions (default 0.6..1.0)")

    p = sub.add_parser("locomote", help="open-loop serpentine gait on the ground")
    common(p)
    p.add_argument("--no-latency", action="store_true",
                   help="drive chamber pressures directly, skipping the valve model")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--dump-system", metavar="DIR",
                   help="write the final Newton system as Matrix Market A.mtx/b.mtx")

    p = sub.add_parser("bench", help="per-frame timing vs scene size")
    common(p)
    p.add_argument("--snakes", type=_ints, default=[1, 2, 3, 4],
                   help="comma list of snake counts")
    p.add_argument("--frames", type=int, default=60, help="timed frames per size")
    p.add_argument("--compare-backends", action="store_true",
                   help="run both the compiled and the pure-numpy kernels")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scene = SceneConfig.from_file(args.scene) if args.scene else SceneConfig()
    except (OSError, ValueError) as e:
        print(f"softsnake: bad scene: {e}", file=sys.stderr)
        return 1

    if args.verb == "curvature-sweep":
        run_curvature_sweep(scene, pressures=args.pressures,
                            samples_per_level=args.samples, out_path=args.out)
    elif args.verb == "step-response":
        kw = {"targets": tuple(args.targets)} if args.targets else {}
        run_step_response(scene, out_path=args.out, **kw)
    elif args.verb == "locomote":
        model = None
        if args.dump_system:
            model = build_snake(scene)
            model.sim.config.keep_matrix = True
        rec = run_locomotion(scene, duration=args.duration,
                             latency_enabled=not args.no_latency,
                             out_path=args.out, model=model)
        if args.dump_system:
            os.makedirs(args.dump_system, exist_ok=True)
            model.sim.export_system(os.path.join(args.dump_system, "A.mtx"),
                                    os.path.join(args.dump_system, "b.mtx"))
        if rec.rows and rec.rows[-1][rec.columns.index("diverged")]:
            print("softsnake: simulation diverged; partial record written",
                  file=sys.stderr)
            return 2
    elif args.verb == "bench":
        backends = None
        if args.compare_backends:
            from . import kernels
            backends = ["numba", "numpy"] if kernels.HAS_NUMBA else ["numpy"]
        run_benchmark(scene, snake_counts=tuple(args.snakes),
                      frames=args.frames, backends=backends, out_path=args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
