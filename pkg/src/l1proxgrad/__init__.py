"""Proximal gradient methods in L1 for bang-bang optimal control."""

from .fem import ControlProblem, NonConvergence, PdeConfig
from .mesh import Mesh, build_uniform_mesh
from .optimizers import (
    BacktrackConfig,
    BacktrackExhausted,
    IterationRecord,
    RunConfig,
    RunResult,
    dual_gap,
    frank_wolfe,
    prox_grad_l1,
    prox_grad_l2,
    run,
)
from .prox import ProxProblem, ProxSolution, kkt_check, solve_quickselect, solve_sorted

__all__ = [
    "BacktrackConfig",
    "BacktrackExhausted",
    "ControlProblem",
    "IterationRecord",
    "Mesh",
    "NonConvergence",
    "PdeConfig",
    "ProxProblem",
    "ProxSolution",
    "RunConfig",
    "RunResult",
    "build_uniform_mesh",
    "dual_gap",
    "frank_wolfe",
    "kkt_check",
    "prox_grad_l1",
    "prox_grad_l2",
    "run",
    "solve_quickselect",
    "solve_sorted",
]
