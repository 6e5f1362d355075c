"""Proximal gradient in L1, projected gradient in L2, and Frank-Wolfe.

All three methods work on the reduced discrete problem from
:mod:`l1proxgrad.fem` with g the indicator of the box [u_a, u_b], and stop on
the dual gap Ψ(u) = max_{v in box} ⟨∇f(u), u - v⟩.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import stats

from .fem import ControlProblem, PdeConfig
from .mesh import build_uniform_mesh
from .prox import (
    PivotRule,
    ProxProblem,
    forced_move,
    non_bang_bang_count,
    solve_quickselect,
    transform,
)

log = logging.getLogger(__name__)

Algorithm = Literal["pg_l1", "pg_l2", "fw"]
ALGORITHMS: tuple[str, ...] = ("pg_l1", "pg_l2", "fw")


class BacktrackExhausted(RuntimeError):
    """No admissible stepsize parameter within ``max_trials`` increases."""


class DescentViolation(AssertionError):
    pass


@dataclass(frozen=True)
class BacktrackConfig:
    grow: float = 2.0
    shrink: float = 0.9
    L_init: float = 1.0
    L_min: float = 1e-10
    max_trials: int = 60

    def __post_init__(self):
        if not self.grow > 1:
            raise ValueError("grow factor must exceed 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not self.L_init >= self.L_min > 0:
            raise ValueError("need L_init >= L_min > 0")
        if self.max_trials < 1:
            raise ValueError("max_trials must be positive")


@dataclass
class RunConfig:
    algorithm: Algorithm = "pg_l1"
    gap_tol: float = 1e-8
    max_iter: int = 5000
    pde: PdeConfig = field(default_factory=PdeConfig)
    level: int = 32
    backtrack: BacktrackConfig = field(default_factory=BacktrackConfig)
    seed: int = 0
    pivot: PivotRule = "random"
    check_descent: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")


@dataclass
class IterationRecord:
    k: int
    objective: float
    gap: float
    stepsize: float  # L_k accepted for the step u_k -> u_{k+1}; nan on the last row
    nonbb: int
    trials: int
    state_solves: int
    wall_time: float
    step: float = math.nan  # ||u_{k+1} - u_k||_L1


@dataclass
class RunResult:
    u: np.ndarray
    history: list[IterationRecord]
    converged: bool
    adjoint: np.ndarray
    problem: ControlProblem

    @property
    def iterations(self) -> int:
        return self.history[-1].k

    @property
    def objective(self) -> float:
        return self.history[-1].objective

    def __iter__(self):
        # allows ``u, history = run(...)``
        return iter((self.u, self.history))


def dual_gap(u, gamma, bounds) -> float:
    """Ψ(u) = Σ_j γ_j u_j - min(γ_j u_a, γ_j u_b); every summand is nonnegative."""
    ua, ub = bounds
    gamma = np.asarray(gamma)
    return float(np.sum(gamma * np.asarray(u) - np.minimum(gamma * ua, gamma * ub)))


def _descent_tol(value: float) -> float:
    return 1e-12 * max(1.0, abs(value))


def _setup(cfg: RunConfig, problem: ControlProblem | None) -> ControlProblem:
    if problem is None:
        problem = ControlProblem(build_uniform_mesh(cfg.level), cfg.pde)
    return problem


def prox_grad_l1(
    cfg: RunConfig,
    problem: ControlProblem | None = None,
    u0=None,
    callback: Callable[[IterationRecord], None] | None = None,
) -> RunResult:
    """Proximal gradient in L1 with backtracking on the stepsize parameter L_k.

    Each step solves the squared weighted-L1 prox model exactly and accepts
    the smallest L_k = L_{k,0} * grow**n with J(u_{k+1}) below the model value.
    """
    prob = _setup(cfg, problem)
    bt = cfg.backtrack
    a = prob.areas
    bounds = prob.bounds
    rng = np.random.default_rng(cfg.seed)
    u = np.full(a.size, bounds[1]) if u0 is None else np.array(u0, dtype=float)
    t0 = time.perf_counter()
    J, g, p = prob.value_and_gradient(u)
    L0 = bt.L_init
    history: list[IterationRecord] = []
    converged = False
    for k in range(cfg.max_iter + 1):
        psi = dual_gap(u, g, bounds)
        nonbb = non_bang_bang_count(u, bounds)
        if psi <= cfg.gap_tol or k == cfg.max_iter:
            converged = psi <= cfg.gap_tol
            rec = IterationRecord(k, J, psi, math.nan, nonbb, 0, prob.state_solves,
                                  time.perf_counter() - t0)
            history.append(rec)
            if callback:
                callback(rec)
            break
        L = L0
        for trial in range(1, bt.max_trials + 1):
            sub = ProxProblem(g, a, u, L, bounds)
            sol = solve_quickselect(sub, rng, pivot=cfg.pivot)
            J_new = prob.objective(sol.v)
            model = J + float(g @ (sol.v - u)) + 0.5 * L * sol.alpha**2
            if J_new <= model:
                break
            L *= bt.grow
        else:
            raise BacktrackExhausted(f"iteration {k}: no stepsize after {bt.max_trials} trials")
        if cfg.check_descent:
            _check_l1_step(sub, sol, J, J_new, k)
        rec = IterationRecord(k, J, psi, L, nonbb, trial, prob.state_solves,
                              time.perf_counter() - t0, sol.alpha)
        history.append(rec)
        if callback:
            callback(rec)
        u = sol.v
        J = J_new
        p = prob.solve_adjoint(prob.solve_state(u))
        g = prob.gradient_from_adjoint(p)
        L0 = max(L * bt.shrink, bt.L_min)
    return RunResult(u, history, converged, p, prob)


def _check_l1_step(sub: ProxProblem, sol, J_old: float, J_new: float, k: int) -> None:
    decrease = J_old - J_new
    bound = 0.5 * sub.stepsize * sol.alpha**2
    if decrease < bound - _descent_tol(J_old):
        raise DescentViolation(f"iteration {k}: decrease {decrease:.3e} < L/2 ||du||^2 = {bound:.3e}")
    lo, hi = forced_move(*transform(sub), sol.alpha)
    slack = 1e-12 * max(1.0, sol.alpha)
    if not lo - slack <= sol.alpha <= hi + slack:
        raise DescentViolation(f"iteration {k}: alpha {sol.alpha} not in N(alpha) = [{lo}, {hi}]")


def prox_grad_l2(
    cfg: RunConfig,
    problem: ControlProblem | None = None,
    u0=None,
    callback: Callable[[IterationRecord], None] | None = None,
) -> RunResult:
    """Projected gradient in L2: u_{k+1} = clip(u_k - ∇f(u_k)/L_k, u_a, u_b)."""
    prob = _setup(cfg, problem)
    bt = cfg.backtrack
    a = prob.areas
    ua, ub = bounds = prob.bounds
    u = np.full(a.size, ub) if u0 is None else np.array(u0, dtype=float)
    t0 = time.perf_counter()
    J, g, p = prob.value_and_gradient(u)
    L0 = bt.L_init
    history: list[IterationRecord] = []
    converged = False
    for k in range(cfg.max_iter + 1):
        psi = dual_gap(u, g, bounds)
        nonbb = non_bang_bang_count(u, bounds)
        if psi <= cfg.gap_tol or k == cfg.max_iter:
            converged = psi <= cfg.gap_tol
            rec = IterationRecord(k, J, psi, math.nan, nonbb, 0, prob.state_solves,
                                  time.perf_counter() - t0)
            history.append(rec)
            if callback:
                callback(rec)
            break
        pointwise = g / a  # L2 Riesz representative of the gradient
        L = L0
        for trial in range(1, bt.max_trials + 1):
            v = np.clip(u - pointwise / L, ua, ub)
            du = v - u
            sq = float(a @ du**2)
            J_new = prob.objective(v)
            if J_new <= J + float(g @ du) + 0.5 * L * sq:
                break
            L *= bt.grow
        else:
            raise BacktrackExhausted(f"iteration {k}: no stepsize after {bt.max_trials} trials")
        if cfg.check_descent and J - J_new < 0.5 * L * sq - _descent_tol(J):
            raise DescentViolation(f"iteration {k}: insufficient decrease")
        rec = IterationRecord(k, J, psi, L, nonbb, trial, prob.state_solves,
                              time.perf_counter() - t0, float(a @ np.abs(du)))
        history.append(rec)
        if callback:
            callback(rec)
        u, J = v, J_new
        p = prob.solve_adjoint(prob.solve_state(u))
        g = prob.gradient_from_adjoint(p)
        L0 = max(L * bt.shrink, bt.L_min)
    return RunResult(u, history, converged, p, prob)


def frank_wolfe(
    cfg: RunConfig,
    problem: ControlProblem | None = None,
    u0=None,
    callback: Callable[[IterationRecord], None] | None = None,
) -> RunResult:
    """Conditional gradient with an adaptive (backtracked) curvature estimate.

    The step σ minimizes the quadratic upper model with constant L̂ measured
    in the L1 norm; L̂ grows on rejection and shrinks after acceptance.
    """
    prob = _setup(cfg, problem)
    bt = cfg.backtrack
    a = prob.areas
    ua, ub = bounds = prob.bounds
    u = np.zeros(a.size) if u0 is None else np.array(u0, dtype=float)
    t0 = time.perf_counter()
    J, g, p = prob.value_and_gradient(u)
    L_hat = bt.L_init
    history: list[IterationRecord] = []
    converged = False
    for k in range(cfg.max_iter + 1):
        psi = dual_gap(u, g, bounds)
        nonbb = non_bang_bang_count(u, bounds)
        if psi <= cfg.gap_tol or k == cfg.max_iter:
            converged = psi <= cfg.gap_tol
            rec = IterationRecord(k, J, psi, math.nan, nonbb, 0, prob.state_solves,
                                  time.perf_counter() - t0)
            history.append(rec)
            if callback:
                callback(rec)
            break
        vertex = np.where(g > 0, ua, ub)
        d = vertex - u
        dn = float(a @ np.abs(d))
        for trial in range(1, bt.max_trials + 1):
            sigma = min(max(psi / (L_hat * dn**2), 0.0), 1.0)
            v = vertex.copy() if sigma == 1.0 else np.clip(u + sigma * d, ua, ub)
            J_new = prob.objective(v)
            if J_new <= J - sigma * psi + 0.5 * L_hat * sigma**2 * dn**2:
                break
            L_hat *= bt.grow
        else:
            raise BacktrackExhausted(f"iteration {k}: no stepsize after {bt.max_trials} trials")
        if cfg.check_descent and not J_new < J:
            raise DescentViolation(f"iteration {k}: Frank-Wolfe step did not decrease J")
        rec = IterationRecord(k, J, psi, L_hat, nonbb, trial, prob.state_solves,
                              time.perf_counter() - t0, float(a @ np.abs(v - u)))
        history.append(rec)
        if callback:
            callback(rec)
        u, J = v, J_new
        p = prob.solve_adjoint(prob.solve_state(u))
        g = prob.gradient_from_adjoint(p)
        L_hat = max(L_hat * bt.shrink, bt.L_min)
    return RunResult(u, history, converged, p, prob)


SOLVERS = {"pg_l1": prox_grad_l1, "pg_l2": prox_grad_l2, "fw": frank_wolfe}


def run(cfg: RunConfig, problem: ControlProblem | None = None, **kwargs) -> RunResult:
    return SOLVERS[cfg.algorithm](cfg, problem, **kwargs)


# -- empirical rate diagnostics ------------------------------------------------


def log_linear_r2(values) -> float:
    """R² of a straight-line fit to log(values) against the index."""
    y = np.log(np.asarray(values, dtype=float))
    res = stats.linregress(np.arange(y.size), y)
    return float(res.rvalue**2)


@dataclass
class RateEnvelope:
    stationarity: np.ndarray  # running min of (L_grad + L_l) * ||u_{l+1} - u_l||
    stationarity_bound: np.ndarray
    gap: np.ndarray  # running min of Ψ(u_{l+1})
    gap_bound: np.ndarray

    @property
    def violations(self) -> int:
        return int(np.sum(self.stationarity > self.stationarity_bound)
                   + np.sum(self.gap > self.gap_bound))


def rate_envelopes(history: list[IterationRecord], j_ref: float, lip_est: float,
                   bounds, domain_measure: float = 1.0) -> RateEnvelope:
    """Compare an L1 proximal gradient run with its sublinear worst-case envelopes.

    ``lip_est`` stands in for the unknown Lipschitz constant of ∇f, so the
    result is a diagnostic; violations are logged, not raised.
    """
    steps = [r for r in history if not math.isnan(r.stepsize)]
    if not steps:
        empty = np.zeros(0)
        return RateEnvelope(empty, empty, empty, empty)
    Ls = np.array([r.stepsize for r in steps])
    dist = np.array([r.step for r in steps])
    La, Lb = Ls.min(), Ls.max()
    nu = min(La / (2 * (lip_est + La) ** 2), Lb / (2 * (lip_est + Lb) ** 2))
    r0 = max(history[0].objective - j_ref, 0.0)
    kk = np.arange(1, len(steps) + 1)
    bound = np.sqrt(r0 / (nu * kk))
    stat = np.minimum.accumulate((lip_est + Ls) * dist)
    gaps = np.array([r.gap for r in history[1:len(steps) + 1]])
    m0 = max(abs(bounds[0]), abs(bounds[1])) * domain_measure
    env = RateEnvelope(stat, bound, np.minimum.accumulate(gaps), 2 * m0 * bound)
    if env.violations:
        log.warning("rate envelope exceeded at %d iterations (L_grad estimate %.3g)",
                    env.violations, lip_est)
    return env
