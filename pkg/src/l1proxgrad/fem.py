"""P1/P0 finite elements for the semilinear bang-bang control problem.

State equation (Dirichlet):  -Δy + a(y) = u,            y = 0 on the boundary
State equation (Neumann):    -Δy + 10 y + a(y) = u,     ∂y/∂n = 0
with a(y) = alpha * y**3, tracking objective f(u) = 1/2 ||y - y_d||^2.

States and adjoints are continuous piecewise linear, controls are piecewise
constant per triangle. The cubic term is integrated with the lumped (nodal)
mass, so Newton matrices stay symmetric and the discrete adjoint is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import Mesh

BoundaryCondition = Literal["dirichlet", "neumann"]

NEWTON_TOL = 1e-11
NEWTON_MAX_ITER = 50
NEWTON_POLISH = 1e-14


class NonConvergence(RuntimeError):
    """Newton's method failed to reach the residual tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Newton did not converge in {iterations} iterations (residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


def desired_state(x: np.ndarray) -> np.ndarray:
    """Tracking target y_d evaluated at points ``x`` of shape (n, 2)."""
    x1, x2 = x[:, 0], x[:, 1]
    return 2.0 * np.sin(np.pi * (x1 + 1.0)) * np.cos(2.0 * np.pi * x2) + 0.8 * (x2 + x1**2) - 0.5


@dataclass(frozen=True)
class PdeConfig:
    alpha: float = 0.0
    bc: BoundaryCondition = "dirichlet"
    bounds: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.alpha < 0:
            raise ValueError("nonlinearity coefficient must be nonnegative")
        ua, ub = self.bounds
        if not ua < ub:
            raise ValueError(f"need u_a < u_b, got {self.bounds}")
        object.__setattr__(self, "bounds", (float(ua), float(ub)))

    @property
    def reaction_shift(self) -> float:
        return 10.0 if self.bc == "neumann" else 0.0

    @classmethod
    def dirichlet(cls, alpha: float = 0.0) -> "PdeConfig":
        return cls(alpha=alpha, bc="dirichlet", bounds=(-5.0, 5.0))

    @classmethod
    def neumann(cls, alpha: float = 0.0) -> "PdeConfig":
        return cls(alpha=alpha, bc="neumann", bounds=(-10.0, 10.0))


@dataclass(frozen=True, eq=False)
class Assembly:
    """Global operators on all nodes; ``free`` lists the unknowns after boundary treatment."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    lumped_mass: np.ndarray
    control_load: sp.csr_matrix  # (n_nodes, n_triangles), entries a_j / 3
    free: np.ndarray


def assemble(mesh: Mesh, bc: BoundaryCondition = "dirichlet") -> Assembly:
    tri = mesh.triangles
    area = mesh.areas
    p = mesh.nodes[tri]  # (nt, 3, 2)

    # gradients of the barycentric basis functions
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / (2.0 * area)[:, None, None]
    k_loc = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    m_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = area[:, None, None] * m_ref

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    stiffness = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mass = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # clean up round-off asymmetry from summation order
    stiffness = ((stiffness + stiffness.T) * 0.5).tocsr()
    mass = ((mass + mass.T) * 0.5).tocsr()

    lumped = np.bincount(tri.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
    cells = np.repeat(np.arange(mesh.n_triangles), 3)
    control_load = sp.coo_matrix(
        (np.repeat(area / 3.0, 3), (tri.ravel(), cells)), shape=(n, mesh.n_triangles)
    ).tocsr()

    if bc == "dirichlet":
        free = np.flatnonzero(~mesh.boundary_node)
    elif bc == "neumann":
        free = np.arange(n)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return Assembly(stiffness, mass, lumped, control_load, free)


@dataclass
class ControlProblem:
    """Reduced discrete problem u -> f(S(u)) on a fixed mesh.

    Keeps the last computed state as Newton warm start and as a cache, so
    ``gradient(u)`` right after ``objective(u)`` costs a single adjoint solve.
    """

    mesh: Mesh
    cfg: PdeConfig
    asm: Assembly = field(init=False)
    target: np.ndarray = field(init=False)
    state_solves: int = field(default=0, init=False)
    adjoint_solves: int = field(default=0, init=False)

    def __post_init__(self):
        self.asm = assemble(self.mesh, self.cfg.bc)
        self.target = desired_state(self.mesh.nodes)
        free = self.asm.free
        lin = self.asm.stiffness + self.cfg.reaction_shift * self.asm.mass
        self._lin_free = lin[free][:, free].tocsc()
        self._lumped_free = self.asm.lumped_mass[free]
        self._linear_lu = splu(self._lin_free) if self.cfg.alpha == 0 else None
        self._y_guess = np.zeros(free.size)
        self._cache_u: np.ndarray | None = None
        self._cache_y: np.ndarray | None = None

    @property
    def areas(self) -> np.ndarray:
        return self.mesh.areas

    @property
    def bounds(self) -> tuple[float, float]:
        return self.cfg.bounds

    def _jacobian(self, y_free: np.ndarray) -> sp.csc_matrix:
        d = 3.0 * self.cfg.alpha * self._lumped_free * y_free**2
        return (self._lin_free + sp.diags(d)).tocsc()

    def _residual(self, y_free, load):
        return self._lin_free @ y_free + self.cfg.alpha * self._lumped_free * y_free**3 - load

    def solve_state(self, u) -> np.ndarray:
        """Nodal state y = S(u); boundary entries are zero for Dirichlet."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.n_triangles,):
            raise ValueError(f"control has shape {u.shape}, expected ({self.mesh.n_triangles},)")
        if self._cache_u is not None and np.array_equal(u, self._cache_u):
            return self._cache_y
        free = self.asm.free
        load = (self.asm.control_load @ u)[free]
        self.state_solves += 1
        if self._linear_lu is not None:
            y_free = self._linear_lu.solve(load)
        else:
            y_free = self._y_guess.copy()
            res = self._residual(y_free, load)
            err = np.max(np.abs(res))
            it = 0
            polished = False
            # one extra step after reaching NEWTON_TOL: objective differences of
            # ~1e-12 matter to the line searches near convergence
            while err > NEWTON_TOL or (not polished and err > NEWTON_POLISH):
                if it >= NEWTON_MAX_ITER:
                    raise NonConvergence(it, err)
                polished = err <= NEWTON_TOL
                y_free = y_free - splu(self._jacobian(y_free)).solve(res)
                res = self._residual(y_free, load)
                err = np.max(np.abs(res))
                it += 1
            self._y_guess = y_free
        y = np.zeros(self.mesh.n_nodes)
        y[free] = y_free
        self._cache_u, self._cache_y = u.copy(), y
        return y

    def solve_adjoint(self, y) -> np.ndarray:
        """Nodal adjoint p solving J(y)^T p = M (y - y_d) with J the state Jacobian."""
        free = self.asm.free
        rhs = (self.asm.mass @ (np.asarray(y) - self.target))[free]
        self.adjoint_solves += 1
        if self._linear_lu is not None:
            p_free = self._linear_lu.solve(rhs)
        else:
            p_free = splu(self._jacobian(np.asarray(y)[free])).solve(rhs)
        p = np.zeros(self.mesh.n_nodes)
        p[free] = p_free
        return p

    def tracking(self, y) -> float:
        r = np.asarray(y) - self.target
        return 0.5 * float(r @ (self.asm.mass @ r))

    def objective(self, u) -> float:
        return self.tracking(self.solve_state(u))

    def gradient_from_adjoint(self, p) -> np.ndarray:
        """Per-triangle integrals of the adjoint, γ_j = ∫_{T_j} p."""
        return self.asm.control_load.T @ np.asarray(p)

    def gradient(self, u) -> np.ndarray:
        return self.gradient_from_adjoint(self.solve_adjoint(self.solve_state(u)))

    def value_and_gradient(self, u) -> tuple[float, np.ndarray, np.ndarray]:
        """Return ``(f(u), γ(u), p(u))``."""
        y = self.solve_state(u)
        p = self.solve_adjoint(y)
        return self.tracking(y), self.gradient_from_adjoint(p), p


def solve_state(u, cfg: PdeConfig, mesh: Mesh) -> np.ndarray:
    return ControlProblem(mesh, cfg).solve_state(u)


def solve_adjoint(y, cfg: PdeConfig, mesh: Mesh) -> np.ndarray:
    return ControlProblem(mesh, cfg).solve_adjoint(y)


def objective(u, cfg: PdeConfig, mesh: Mesh) -> tuple[float, np.ndarray]:
    prob = ControlProblem(mesh, cfg)
    y = prob.solve_state(u)
    return prob.tracking(y), y


def gradient(u, cfg: PdeConfig, mesh: Mesh) -> np.ndarray:
    return ControlProblem(mesh, cfg).gradient(u)


def empirical_lipschitz(prob: ControlProblem, rng: np.random.Generator, pairs: int = 5) -> float:
    """Largest observed ||∇f(u1) - ∇f(u2)||_inf / ||u1 - u2||_L1 over random feasible pairs.

    The gradient is taken in its pointwise (per-area) representation.
    """
    ua, ub = prob.bounds
    a = prob.areas
    best = 0.0
    for _ in range(pairs):
        u1 = rng.uniform(ua, ub, a.size)
        u2 = rng.uniform(ua, ub, a.size)
        g1 = prob.gradient(u1) / a
        g2 = prob.gradient(u2) / a
        dist = float(a @ np.abs(u1 - u2))
        if dist > 0:
            best = max(best, float(np.max(np.abs(g1 - g2))) / dist)
    return best
