"""Exact prox step for the box-constrained, squared weighted-L1 model.

Solves

    min_{v in [u_a, u_b]^N}  γᵀv + (L/2) (Σ_j a_j |v_j - u_j|)²

After the substitution w = a ⊙ v the problem reads

    min_{w in [û_a, û_b]}  ĝᵀw + ½ ||w - û||₁²,     ĝ_j = γ_j / (a_j L),

and every minimizer moves the same total distance α = ||w - û||₁. For a
trial value α, coordinate j is pushed to a bound if |ĝ_j| > α, stays at
û_j if |ĝ_j| < α, and may move anywhere in between on a tie. The total
displacement set N(α) = [S_low(α), S_high(α)] is decreasing in α, and the
unique α with α ∈ N(α) is found by a quickselect-style search over the
breakpoints |ĝ_j|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

PivotRule = Literal["random", "median_of_medians"]


@dataclass(frozen=True, eq=False)
class ProxProblem:
    gamma: np.ndarray
    areas: np.ndarray
    current: np.ndarray
    stepsize: float
    bounds: tuple[float, float]

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        a = np.asarray(self.areas, dtype=float)
        u = np.asarray(self.current, dtype=float)
        if g.ndim != 1 or g.size == 0 or a.shape != g.shape or u.shape != g.shape:
            raise ValueError("gamma, areas and current must be nonempty 1d arrays of equal length")
        if not self.stepsize > 0:
            raise ValueError(f"stepsize must be positive, got {self.stepsize}")
        if np.any(a <= 0):
            raise ValueError("areas must be positive")
        ua, ub = self.bounds
        if not ua < ub:
            raise ValueError(f"need u_a < u_b, got {self.bounds}")
        if np.any(u < ua) or np.any(u > ub):
            raise ValueError("current iterate violates the bounds")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "areas", a)
        object.__setattr__(self, "current", u)
        object.__setattr__(self, "bounds", (float(ua), float(ub)))

    @property
    def size(self) -> int:
        return self.gamma.size


@dataclass(frozen=True, eq=False)
class ProxSolution:
    v: np.ndarray
    alpha: float
    nonbb_delta: int  # entries of v strictly between the bounds


def transform(p: ProxProblem):
    """Return ``(ĝ, û, û_a, û_b)`` for the area-weighted variables w = a ⊙ v."""
    a = p.areas
    ua, ub = p.bounds
    return p.gamma / (a * p.stepsize), a * p.current, ua * a, ub * a


def forced_move(ghat, uhat, ua_hat, ub_hat, alpha: float) -> tuple[float, float]:
    """Interval [S_low, S_high] of total displacements compatible with ``alpha``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    ghat = np.asarray(ghat, dtype=float)
    up = np.asarray(ub_hat) - np.asarray(uhat)
    down = np.asarray(uhat) - np.asarray(ua_hat)
    s_low = float(up[ghat < -alpha].sum() + down[ghat > alpha].sum())
    if alpha > 0:
        slack = up[ghat == -alpha].sum() + down[ghat == alpha].sum()
    else:
        zero = ghat == 0
        slack = np.maximum(up[zero], down[zero]).sum()
    return s_low, s_low + float(slack)


def _breakpoints(p: ProxProblem):
    """|ĝ_j| and the capacity of the forced direction, for coordinates that can move."""
    a = p.areas
    ua, ub = p.bounds
    ghat = p.gamma / (a * p.stepsize)
    cap = np.where(ghat < 0, a * (ub - p.current), a * (p.current - ua))
    active = (ghat != 0) & (cap > 0)
    return ghat, np.abs(ghat[active]), cap[active]


def median_of_medians(values: np.ndarray) -> float:
    """Pivot guaranteed to split ``values`` at worst 30/70 (groups of five)."""
    values = np.asarray(values)
    if values.size <= 5:
        return float(np.sort(values)[(values.size - 1) // 2])
    n5 = values.size // 5 * 5
    medians = np.sort(values[:n5].reshape(-1, 5), axis=1)[:, 2]
    if n5 < values.size:
        tail = np.sort(values[n5:])
        medians = np.append(medians, tail[(tail.size - 1) // 2])
    return select_kth(medians, (medians.size - 1) // 2, pivot="median_of_medians")


def select_kth(values, k: int, pivot: PivotRule = "random", rng=None) -> float:
    """k-th smallest entry (0-based) by quickselect."""
    vals = np.asarray(values, dtype=float)
    if not 0 <= k < vals.size:
        raise IndexError(f"k={k} out of range for {vals.size} values")
    rng = np.random.default_rng() if rng is None else rng
    while True:
        if vals.size <= 5:
            return float(np.sort(vals)[k])
        if pivot == "random":
            piv = vals[rng.integers(vals.size)]
        else:
            piv = median_of_medians(vals)
        lower = vals[vals < piv]
        n_eq = np.count_nonzero(vals == piv)
        if k < lower.size:
            vals = lower
        elif k < lower.size + n_eq:
            return float(piv)
        else:
            k -= lower.size + n_eq
            vals = vals[vals > piv]


def _reconstruct(p: ProxProblem, ghat: np.ndarray, alpha: float) -> ProxSolution:
    u = p.current
    a = p.areas
    ua, ub = p.bounds
    v = u.copy()
    if alpha > 0:
        up = ghat < -alpha
        down = ghat > alpha
        v[up] = ub
        v[down] = ua
        s_low = float((a[up] * (ub - u[up])).sum() + (a[down] * (u[down] - ua)).sum())
        need = alpha - s_low
        ties = np.flatnonzero(np.abs(ghat) == alpha)
        # greedy fill in ascending index order: at most one tie ends up interior
        for j in ties:
            if need <= 0:
                break
            if ghat[j] < 0:
                cap = a[j] * (ub - u[j])
                if need >= cap:
                    v[j] = ub
                else:
                    v[j] = min(u[j] + need / a[j], ub)
            else:
                cap = a[j] * (u[j] - ua)
                if need >= cap:
                    v[j] = ua
                else:
                    v[j] = max(u[j] - need / a[j], ua)
            need -= cap
    nonbb = int(np.count_nonzero((v > ua) & (v < ub)))
    return ProxSolution(v, float(alpha), nonbb)


def solve_quickselect(
    p: ProxProblem, rng: np.random.Generator | None = None, pivot: PivotRule = "random"
) -> ProxSolution:
    """Exact minimizer in expected O(N) time.

    Each round partitions the remaining breakpoints around a pivot α and
    compares α with N(α); only the side containing the fixed point is kept.
    ``capacity_above`` accumulates capacities of breakpoints already known
    to lie above the search window.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    ghat, t, c = _breakpoints(p)
    capacity_above = 0.0
    alpha = None
    while t.size:
        if pivot == "random":
            piv = t[rng.integers(t.size)]
        else:
            piv = median_of_medians(t)
        gt = t > piv
        eq = t == piv
        s_low = capacity_above + c[gt].sum()
        s_high = s_low + c[eq].sum()
        if s_low <= piv <= s_high:
            alpha = float(piv)
            break
        if piv < s_low:
            t, c = t[gt], c[gt]
        else:
            capacity_above = s_high
            lt = t < piv
            t, c = t[lt], c[lt]
    if alpha is None:
        # S is constant on the remaining open window, so α = S there
        alpha = float(capacity_above)
    return _reconstruct(p, ghat, alpha)


def solve_sorted(p: ProxProblem) -> ProxSolution:
    """Reference O(N log N) solver: scan sorted breakpoints for α ∈ N(α)."""
    ghat, t, c = _breakpoints(p)
    if t.size == 0:
        return _reconstruct(p, ghat, 0.0)
    order = np.argsort(-t, kind="stable")
    t, c = t[order], c[order]
    bps, start = np.unique(-t, return_index=True)
    bps = -bps  # distinct breakpoints, descending
    group_cap = np.add.reduceat(c, start)
    cum = np.cumsum(group_cap)  # S_high at each breakpoint
    prev = np.concatenate(([0.0], cum[:-1]))  # S_low at each breakpoint

    in_gap = prev > bps  # fixed point strictly above this breakpoint
    at_point = (prev <= bps) & (bps <= cum)
    hit = in_gap | at_point
    if not hit.any():
        alpha = float(cum[-1])
    else:
        i = int(np.argmax(hit))
        alpha = float(prev[i]) if in_gap[i] else float(bps[i])
    return _reconstruct(p, ghat, alpha)


def subproblem_objective(p: ProxProblem, v) -> float:
    v = np.asarray(v, dtype=float)
    dist = float(p.areas @ np.abs(v - p.current))
    return float(p.gamma @ v) + 0.5 * p.stepsize * dist**2


def kkt_check(p: ProxProblem, s: ProxSolution) -> float:
    """Largest violation of 0 ∈ ĝ + α ∂|·|(w - û) + N_box(w), in transformed units.

    Also includes the mismatch between ``s.alpha`` and the realized distance.
    """
    ghat, uhat, _, _ = transform(p)
    ua, ub = p.bounds
    v = np.asarray(s.v, dtype=float)
    alpha = s.alpha
    d = p.areas * v - uhat
    lo = np.where(d > 0, alpha, -alpha)
    hi = np.where(d < 0, -alpha, alpha)
    lo = np.where(v == ua, -np.inf, lo)
    hi = np.where(v == ub, np.inf, hi)
    x = -ghat
    dist = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    if np.any(v < ua) or np.any(v > ub):
        return np.inf
    realized = float(np.abs(p.areas * (v - p.current)).sum())
    return max(float(dist.max()), abs(realized - alpha))


def non_bang_bang_count(u, bounds) -> int:
    ua, ub = bounds
    u = np.asarray(u)
    return int(np.count_nonzero((u > ua) & (u < ub)))
