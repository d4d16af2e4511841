"""The physical fluctuation selected in the vanishing-curvature limit.

Out of the trapped regime's many inviscid solutions, the small-d cell
solutions converge to exactly one: the branch anchored at the flattest
global maximum xbar of the flow (the one minimizing -v'').  Two numerical
witnesses accompany the construction:

* the eigenvalue slope (E_d - 1)/d tends to -sqrt(-v''(xbar)) as d -> 0,
  so the extrapolated slope identifies the selected anchor;
* the sup distance between the solved fluctuation w_d and the selected
  branch shrinks with d, while the distance to any other branch stays
  bounded away from zero.

Selection is only well posed when the maximum set is finite, curvatures
are distinct and nondegenerate; ties are refused loudly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cell import CellSolution, solve_cell
from .flows import MaximaSet, NormalizedProblem, locate_maxima
from .inviscid import (
    branch_values,
    inviscid_threshold,
    solve_inviscid_H,
    turning_point,
)


class SelectionError(RuntimeError):
    """Raised when the selection hypotheses fail (ties, degeneracy, regime)."""


@dataclass
class SelectionResult:
    regime: str
    x_bar: float
    slope_target: float
    x_mu: float
    x: np.ndarray
    w0: np.ndarray  # selected fluctuation normalized to vanish at x = 0
    assumptions_ok: dict


def select_xbar(maxima: MaximaSet) -> tuple:
    """The selected maximum and the limiting eigenvalue slope.

    Returns (x_bar, slope_target) with slope_target = -sqrt(-v''(x_bar)),
    where x_bar minimizes -v'' over the maximum set.  Refuses degenerate or
    tied curvature sets: the limit is discontinuous across ties, so nearly
    tied flows must fail rather than silently pick a side.
    """
    if not maxima.is_finite:
        raise SelectionError("selection refused: maximum set is not finite/nondegenerate")
    if len(maxima) > 1 and not maxima.curvatures_distinct:
        raise SelectionError(
            "selection ill-posed: curvatures at the maxima are tied within tolerance"
        )
    if any(c <= 0 for c in maxima.neg_curvatures):
        raise SelectionError("selection refused: degenerate maximum (v'' = 0)")
    i = int(np.argmin(maxima.neg_curvatures))
    x_bar = maxima.points[i]
    return float(x_bar), float(-np.sqrt(maxima.neg_curvatures[i]))


def physical_fluctuation(
    problem: NormalizedProblem,
    tol: float = 1e-10,
    n_samples: int = 4096,
) -> SelectionResult:
    """Construct the d -> 0 limit profile w0(x) - w0(0).

    Trapped regime: the branch anchored at xbar, shifted to vanish at 0.
    Unique regime: the unique fluctuation (slope never changes sign),
    which already vanishes at 0; flagged with regime = "unique".
    """
    inv = solve_inviscid_H(problem, tol=tol)
    xs = np.arange(n_samples) / n_samples
    if inv.regime == "unique":
        w0 = _unique_regime_profile(problem, inv.H0_norm, xs)
        return SelectionResult(
            regime="unique",
            x_bar=float("nan"),
            slope_target=float("nan"),
            x_mu=float("nan"),
            x=xs,
            w0=w0,
            assumptions_ok={"finite": True, "distinct": True, "trapped": False},
        )
    maxima = locate_maxima(problem.flow)
    x_bar, slope_target = select_xbar(maxima)
    x_mu = turning_point(problem, x_bar, tol=min(tol, 1e-12))
    vals = branch_values(problem, x_bar, np.concatenate([[0.0], xs]), xmu=x_mu)
    w0 = vals[1:] - vals[0]
    return SelectionResult(
        regime="trapped",
        x_bar=x_bar,
        slope_target=slope_target,
        x_mu=x_mu,
        x=xs,
        w0=w0,
        assumptions_ok={
            "finite": maxima.is_finite,
            "distinct": maxima.curvatures_distinct,
            "trapped": True,
        },
    )


def _unique_regime_profile(problem, E0, xs):
    from .inviscid import _breakpoints, _cumulative_at  # shared quadrature core

    sign = 1.0 if problem.mu >= 0 else -1.0
    order = np.argsort(xs)
    ts = np.asarray(xs, dtype=float)[order]
    cum = _cumulative_at(problem, E0, 0.0, ts, _breakpoints(problem))
    w_sorted = sign * problem.gamma * cum - problem.mu * ts
    out = np.empty_like(w_sorted)
    out[order] = w_sorted
    return out


def verify_selection(
    problem: NormalizedProblem,
    d: float,
    tol: Optional[float] = None,
    grid_n: Optional[int] = None,
    anchor: Optional[float] = None,
    solution: Optional[CellSolution] = None,
) -> float:
    """Sup-norm distance between the solved w_d and a limit branch.

    By default the branch anchored at xbar (the selected one); pass another
    maximum as `anchor` for the wrong-anchor control, whose distance must
    stay bounded away from zero as d -> 0.
    """
    mstar = inviscid_threshold(problem)
    if abs(problem.mean_ratio) >= mstar:
        raise SelectionError("verify_selection applies to the trapped regime")
    if anchor is None:
        anchor, _ = select_xbar(locate_maxima(problem.flow))
    sol = solution if solution is not None else solve_cell(
        problem, d, grid_n=grid_n, tol=tol
    )
    pts = np.concatenate([[0.0], sol.x])
    vals = branch_values(problem, anchor, pts)
    w0 = vals[1:] - vals[0]
    return float(np.abs(sol.w - w0).max())


def slope_diagnostic(
    problem: NormalizedProblem,
    d_values: Sequence[float],
    tol: Optional[float] = None,
    grid_n: Optional[int] = None,
) -> np.ndarray:
    """(E_d - 1)/d along a descending schedule of small Markstein numbers."""
    mstar = inviscid_threshold(problem)
    if abs(problem.mean_ratio) >= mstar:
        raise SelectionError("slope diagnostic applies to the trapped regime")
    d_values = list(d_values)
    ratios = {}
    warm = None
    for d in sorted(set(d_values), reverse=True):
        sol = solve_cell(problem, d, grid_n=grid_n, tol=tol, warm=warm)
        warm = (sol.phi, sol.E, d)
        ratios[d] = (sol.E - 1.0) / d
    return np.array([ratios[d] for d in d_values])


def richardson_slope(d_values: Sequence[float], ratios: Sequence[float]) -> float:
    """Extrapolate (E_d - 1)/d to d = 0 from the two smallest d.

    Model: E(d) = 1 + s d + O(d^{3/2}), so the ratio is s + c sqrt(d);
    two-point elimination of c gives s.
    """
    d = np.asarray(d_values, dtype=float)
    r = np.asarray(ratios, dtype=float)
    order = np.argsort(d)
    d, r = d[order], r[order]
    d2, d1 = d[0], d[1]  # d2 < d1: the two smallest
    r2, r1 = r[0], r[1]
    s1, s2 = np.sqrt(d1), np.sqrt(d2)
    return float((r2 * s1 - r1 * s2) / (s1 - s2))
