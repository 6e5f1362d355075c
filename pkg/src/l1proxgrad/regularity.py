"""One-dimensional counterexamples separating quadratic growth from PŁK/SMS,
and an empirical check of the bang-bang regularity condition
|{|p| <= ε}| <= C ε for computed adjoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh


def _dyadic_cell(t: float) -> tuple[float, float]:
    """Return (lo, mid) with t in [lo, 2 lo) and mid = 1.5 lo; exact for floats."""
    m, e = math.frexp(t)  # t = m * 2**e, m in [0.5, 1)
    lo = math.ldexp(1.0, e - 1)
    return lo, 1.5 * lo


def f63(t: float) -> float:
    """Even C^1 function with quadratic growth at 0 but stationary points at 2^-i.

    On [2^-i, 2^-i+1] it rises from 1/(12 4^i) along +1/2 (t - 2^-i)^2 up to
    the midpoint and then follows the downward parabola into the next level.
    """
    t = abs(float(t))
    if t == 0.0:
        return 0.0
    lo, mid = _dyadic_cell(t)
    if t < mid:
        return lo * lo / 12.0 + 0.5 * (t - lo) ** 2
    hi = 2.0 * lo
    return hi * hi / 12.0 - 0.5 * (t - hi) ** 2


def grad_f63(t: float) -> float:
    t = float(t)
    if t == 0.0:
        return 0.0
    s = abs(t)
    lo, mid = _dyadic_cell(s)
    g = s - lo if s < mid else 2.0 * lo - s
    return math.copysign(g, t)


CHORD_WINDOW = 64


def _chord(n: int, t: float) -> float:
    # chord of t -> t^2 through 2^n and 2^(n+1): slope 3 * 2^n
    p = math.ldexp(1.0, n)
    return p * p + 3.0 * p * (t - p)


def _check_window(s: float, window: int) -> None:
    if s > math.ldexp(1.0, window) or s < math.ldexp(1.0, -window):
        raise ValueError(f"|t| = {s} outside the chord window 2^±{window}")


def g64(t: float, window: int = CHORD_WINDOW) -> float:
    """Piecewise linear interpolant of t^2 at ±2^n, the convex hull of those points."""
    s = abs(float(t))
    if s == 0.0:
        return 0.0
    _check_window(s, window)
    n = math.frexp(s)[1] - 1  # s in [2^n, 2^(n+1))
    candidates = [k for k in (n - 1, n, n + 1) if -window <= k <= window]
    return max(_chord(k, s) for k in candidates)


def subdiff_g64(t: float, window: int = CHORD_WINDOW) -> tuple[float, float]:
    """Convex subdifferential of g64 at t as an interval."""
    t = float(t)
    if t == 0.0:
        return (0.0, 0.0)
    s = abs(t)
    _check_window(s, window)
    m, e = math.frexp(s)
    n = e - 1
    if m == 0.5:  # breakpoint s = 2^n
        lo, hi = 3.0 * math.ldexp(1.0, n - 1), 3.0 * math.ldexp(1.0, n)
    else:
        lo = hi = 3.0 * math.ldexp(1.0, n)
    if t < 0:
        lo, hi = -hi, -lo
    return (lo, hi)


def f64(t: float) -> float:
    """Smooth concave part paired with g64."""
    return -0.75 * float(t) ** 2


def grad_f64(t: float) -> float:
    return -1.5 * float(t)


def check_qg_63(grid) -> float:
    """Minimum of 2 f(t) / t^2 over the grid; quadratic growth holds with 1/7."""
    ts = np.asarray(grid, dtype=float)
    if np.any(ts == 0):
        raise ValueError("grid must exclude 0")
    return float(min(2.0 * f63(t) / (t * t) for t in ts))


@dataclass(frozen=True)
class Witness:
    i: int
    t: float
    value: float
    grad: float


def check_plk_failure_63(depth: int = 20) -> list[Witness]:
    """Stationary points t = 2^-i with f(t) > 0: the PŁK ratio f/|∇f|^2 is infinite there."""
    out = []
    for i in range(1, depth + 1):
        t = math.ldexp(1.0, -i)
        out.append(Witness(i, t, f63(t), grad_f63(t)))
    return out


def plk_ratio_63(t: float) -> float:
    g = grad_f63(t)
    return math.inf if g == 0 else f63(t) / (g * g)


def stationary_lattice_64(n_min: int = -10, n_max: int = 10):
    """Rows (n, -f'(2^n), subdifferential interval, included?) for f64 + g64."""
    rows = []
    for n in range(n_min, n_max + 1):
        t = math.ldexp(1.0, n)
        lo, hi = subdiff_g64(t)
        target = -grad_f64(t)
        rows.append((n, target, lo, hi, lo <= target <= hi))
    return rows


@dataclass(frozen=True)
class SublevelRow:
    eps: float
    measure: float

    @property
    def ratio(self) -> float:
        return self.measure / self.eps


def check_71_diagnostic(p, mesh: Mesh, eps_list) -> tuple[list[SublevelRow], float]:
    """Area of triangles where max nodal |p| <= ε, for each ε, and Ĉ = max measure/ε."""
    p = np.asarray(p, dtype=float)
    if p.shape != (mesh.n_nodes,):
        raise ValueError("adjoint must be a nodal field on the mesh")
    tri_max = np.abs(p)[mesh.triangles].max(axis=1)
    order = np.argsort(tri_max)
    sorted_max = tri_max[order]
    cum_area = np.concatenate(([0.0], np.cumsum(mesh.areas[order])))
    rows = []
    for eps in eps_list:
        k = np.searchsorted(sorted_max, eps, side="right")
        rows.append(SublevelRow(float(eps), float(cum_area[k])))
    c_hat = max((r.ratio for r in rows), default=0.0)
    return rows, c_hat
