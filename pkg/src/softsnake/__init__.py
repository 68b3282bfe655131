"""Real-time multiphysics simulation of pneumatic soft snake robots.

Soft links are corotational FEM tetrahedra plus distance-constraint
fibers, carriages are rigid bodies on hinged wheels, ground contact
uses Fischer-Burmeister complementarity with Coulomb friction, and
everything is stepped implicitly through a matrix-free preconditioned
conjugate residual solve. Chamber pressures follow a discrete valve
latency model driving the actuated fibers through a linear strain law.

Hot kernels run through numba when available; set SOFTSNAKE_BACKEND to
"numpy" or "numba" to pick explicitly.
"""
from .constraints import (AttachmentConstraint, DistanceConstraint, HingeJoint,
                          TetraElement)
from .harness import (ExperimentRecord, TimingReport, emit_csv, run_benchmark,
                      run_curvature_sweep, run_locomotion, run_step_response)
from .pneumatics import ChannelBank, PneumaticChannel, StrainLaw, PSI_TO_PA
from .scene import SceneConfig
from .snake import GaitParams, SnakeModel, build_bend_fixture, build_snake
from .solver import (SchurSystem, Simulator, SolverConfig, assemble_schur,
                     fischer_burmeister, pcr_solve)
from .sparse import CsrMatrix
from .state import ParticleSet, RigidBody, SystemState

__version__ = "0.1.0"

__all__ = [
    "AttachmentConstraint", "ChannelBank", "CsrMatrix", "DistanceConstraint",
    "ExperimentRecord", "GaitParams", "HingeJoint", "ParticleSet",
    "PneumaticChannel", "PSI_TO_PA", "RigidBody", "SceneConfig", "SchurSystem",
    "Simulator", "SnakeModel", "SolverConfig", "StrainLaw", "SystemState",
    "TetraElement", "TimingReport", "assemble_schur", "build_bend_fixture",
    "build_snake", "emit_csv", "fischer_burmeister", "pcr_solve",
    "run_benchmark", "run_curvature_sweep", "run_locomotion",
    "run_step_response", "__version__",
]
