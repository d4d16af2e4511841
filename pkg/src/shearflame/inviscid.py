"""Zero-curvature (d = 0) effective speed and the inviscid solution branches.

In normalized variables (gamma > 0, max v = 0, m = mu/gamma) the inviscid
cell equation reads sqrt(1 + phi0^2) + v = E0, so |phi0| = sqrt((E0-v)^2 - 1)
wherever that is nonnegative.  Two regimes:

* |m| >= m* = int_0^1 sqrt((1-v)^2 - 1):  E0 > 1 is the unique root of
  F(E) = int sqrt((E-v)^2 - 1) = |m| and the fluctuation is unique up to a
  constant (the slope mu + w' never changes sign);
* |m| <  m* (trapped):  E0 = 1 and one continuous periodic solution exists
  per global maximum of v, glued from the two slope signs at a turning
  point; solutions anchored at different maxima differ by more than a
  constant.

The square-root integrand vanishes linearly at each flow maximum when
E0 = 1, so quadrature routines split every interval at the maxima.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .flows import MaximaSet, NormalizedProblem, locate_maxima

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass
class BranchSolution:
    """One periodic inviscid solution, anchored at a flow maximum.

    `x` are sample points in [anchor, anchor + 1]; `w` the fluctuation
    (normalized frame), `w_prime` its closed-form derivative away from the
    kinks.  u = mu x + w rises from the anchor up to the turning point and
    falls back, so its only local minimum per period sits at the anchor.
    """

    anchor: float
    turning_point: float
    x: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    residual: float


@dataclass
class InviscidResult:
    regime: str  # "unique" or "trapped"
    H0_norm: float  # eigenvalue E0 of the normalized problem
    H0: float  # effective speed mapped back to the original problem
    mu_star_norm: float
    mu_star: float
    residual: float
    branches: List[BranchSolution] = field(default_factory=list)


def _sqrt_slope(problem: NormalizedProblem, E0: float):
    """y -> sqrt((E0 - v(y))^2 - 1), clipped at zero for roundoff."""

    def f(y):
        q = E0 - problem.flow.value(y)
        return np.sqrt(np.maximum(q * q - 1.0, 0.0))

    return f


def _breakpoints(problem: NormalizedProblem) -> np.ndarray:
    if problem.flow.is_constant:
        return np.array([])
    return np.asarray(locate_maxima(problem.flow).points, dtype=float)


def _interval_breaks(breaks: np.ndarray, a: float, b: float) -> list:
    """Copies of the periodic break set that fall strictly inside (a, b)."""
    if len(breaks) == 0 or b <= a:
        return []
    k_lo = int(np.floor(a - 1))
    k_hi = int(np.ceil(b + 1))
    pts = []
    for k in range(k_lo, k_hi + 1):
        for q in breaks + k:
            if a + 1e-14 < q < b - 1e-14:
                pts.append(float(q))
    return sorted(pts)


def _quad_split(f, a: float, b: float, breaks: np.ndarray, tol: float) -> float:
    if b <= a:
        return 0.0
    inner = _interval_breaks(breaks, a, b)
    eps = max(tol * 1e-2, 1e-13)
    total = 0.0
    for lo, hi in zip([a] + inner, inner + [b]):
        val, _ = quad(f, lo, hi, epsabs=eps, epsrel=eps, limit=200)
        total += val
    return total


def inviscid_threshold(problem: NormalizedProblem, tol: float = 1e-12) -> float:
    """Normalized trapping threshold m* = int_0^1 sqrt((1 - v)^2 - 1) dy."""
    f = _sqrt_slope(problem, 1.0)
    return _quad_split(f, 0.0, 1.0, _breakpoints(problem), tol)


def _slope_budget(problem: NormalizedProblem, E0: float, tol: float) -> float:
    f = _sqrt_slope(problem, E0)
    return _quad_split(f, 0.0, 1.0, _breakpoints(problem), tol)


def solve_inviscid_H(problem: NormalizedProblem, tol: float = 1e-10) -> InviscidResult:
    """Regime classification and the inviscid effective speed.

    In the unique regime E0 solves F(E0) = |m| by bracketed root finding
    (F is continuous and strictly increasing on [1, inf), F(1) = m* and
    F(1 + |m|) >= |m|); the recorded residual is |F(E0) - |m||.  In the
    trapped regime E0 = 1 exactly.
    """
    m = abs(problem.mean_ratio)
    mstar = inviscid_threshold(problem, tol=min(tol, 1e-12))
    gamma = problem.gamma
    if m < mstar:
        return InviscidResult(
            regime="trapped",
            H0_norm=1.0,
            H0=problem.h_original(gamma * 1.0),
            mu_star_norm=mstar,
            mu_star=gamma * mstar,
            residual=0.0,
        )
    if m == mstar:
        E0, res = 1.0, 0.0
    else:
        fun = lambda E: _slope_budget(problem, E, tol) - m
        E0 = brentq(fun, 1.0, 1.0 + m + 1e-12, xtol=1e-15, rtol=8.9e-16)
        # Newton polish with the analytic derivative, but only safely away
        # from E0 = 1 where the derivative integrand is singular at maxima
        if E0 - 1.0 > 1e-3:
            breaks = _breakpoints(problem)
            for _ in range(3):
                f = _sqrt_slope(problem, E0)
                df = lambda y: (E0 - problem.flow.value(y)) / np.maximum(f(y), 1e-300)
                deriv = _quad_split(df, 0.0, 1.0, breaks, tol)
                step = (_slope_budget(problem, E0, tol) - m) / deriv
                E0 -= step
                if abs(step) < 1e-15:
                    break
        res = abs(_slope_budget(problem, E0, tol) - m)
    return InviscidResult(
        regime="unique",
        H0_norm=float(E0),
        H0=problem.h_original(gamma * float(E0)),
        mu_star_norm=mstar,
        mu_star=gamma * mstar,
        residual=float(res),
    )


def turning_point(
    problem: NormalizedProblem, anchor: float, tol: float = 1e-12
) -> float:
    """The unique x in (anchor, anchor + 1) balancing the two slope pieces.

    Solves  int_anchor^x Phi - int_x^{anchor+1} Phi = m  for the normalized
    slope Phi = sqrt((1-v)^2 - 1), i.e. A(x) = (m* + m)/2 with A increasing.
    Only defined in the trapped regime.
    """
    m = problem.mean_ratio
    mstar = inviscid_threshold(problem, tol=min(tol, 1e-12))
    if abs(m) >= mstar:
        raise ValueError("turning point exists only in the trapped regime (|m| < m*)")
    f = _sqrt_slope(problem, 1.0)
    breaks = _breakpoints(problem)
    target = 0.5 * (mstar + m)

    def cum(t):
        return _quad_split(f, anchor, t, breaks, tol)

    lo = anchor + 1e-13
    hi = anchor + 1.0 - 1e-13
    return float(brentq(lambda t: cum(t) - target, lo, hi, xtol=tol, rtol=8.9e-16))


def _cumulative_at(problem, E0, start: float, xs: np.ndarray, breaks) -> np.ndarray:
    """Cumulative integral of the slope from `start` to each x (sorted).

    Vectorized composite Gauss-Legendre between consecutive nodes; nodes are
    augmented with the periodic break set so no panel straddles a kink.
    """
    f = _sqrt_slope(problem, E0)
    nodes = np.concatenate([[start], xs])
    inner = _interval_breaks(breaks, float(nodes[0]), float(nodes[-1]))
    all_nodes = np.unique(np.concatenate([nodes, inner]))
    a = all_nodes[:-1]
    b = all_nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    panel = half * (f(pts) @ _GL_WEIGHTS)
    cum_all = np.concatenate([[0.0], np.cumsum(panel)])
    pos = np.searchsorted(all_nodes, xs)
    return cum_all[pos]


def branch_values(
    problem: NormalizedProblem,
    anchor: float,
    xs,
    xmu: Optional[float] = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """Fluctuation w of the branch anchored at `anchor`, at arbitrary points.

    Points are reduced mod 1 into [anchor, anchor + 1); the branch is the
    periodic extension of the two-piece profile.
    """
    if xmu is None:
        xmu = turning_point(problem, anchor, tol=tol)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    t = anchor + ((xs - anchor) % 1.0)
    order = np.argsort(t)
    ts = t[order]
    breaks = _breakpoints(problem)
    A = _cumulative_at(problem, 1.0, anchor, ts, breaks)
    A_mu = _cumulative_at(problem, 1.0, anchor, np.array([xmu]), breaks)[0]
    u = np.where(ts <= xmu, A, 2.0 * A_mu - A)
    w_sorted = problem.gamma * u - problem.mu * ts
    out = np.empty_like(w_sorted)
    out[order] = w_sorted
    return out


def enumerate_solutions(
    problem: NormalizedProblem,
    tol: float = 1e-10,
    samples_per_period: int = 2048,
) -> InviscidResult:
    """All inviscid solution branches of a trapped-regime problem.

    One branch per global maximum of the flow.  Sampling is uniform with an
    8x denser window of radius 0.05 around each kink (the anchor and the
    turning point).  Refuses flows whose maximum set is not finite.
    """
    result = solve_inviscid_H(problem, tol=tol)
    if result.regime != "trapped":
        raise ValueError("branch enumeration applies to the trapped regime only")
    maxima = locate_maxima(problem.flow)
    if not maxima.is_finite:
        raise ValueError("flow has a degenerate maximum set; refusing enumeration")
    branches = []
    for anchor in maxima.points:
        xmu = turning_point(problem, anchor, tol=min(tol, 1e-12))
        xs = _branch_sampling(anchor, xmu, samples_per_period)
        breaks = _breakpoints(problem)
        A = _cumulative_at(problem, 1.0, anchor, xs, breaks)
        A_mu = _cumulative_at(problem, 1.0, anchor, np.array([xmu]), breaks)[0]
        on_first = xs <= xmu
        u = np.where(on_first, A, 2.0 * A_mu - A)
        w = problem.gamma * u - problem.mu * xs
        slope = _sqrt_slope(problem, 1.0)(xs)
        w_prime = np.where(on_first, 1.0, -1.0) * problem.gamma * slope - problem.mu
        res = _branch_residual(problem, w_prime, xs)
        branches.append(
            BranchSolution(
                anchor=float(anchor),
                turning_point=float(xmu),
                x=xs,
                w=w,
                w_prime=w_prime,
                residual=res,
            )
        )
    result.branches = branches
    return result


def _branch_sampling(anchor: float, xmu: float, n: int) -> np.ndarray:
    base = anchor + np.arange(n + 1) / n
    extra = []
    for kink in (anchor, xmu, anchor + 1.0):
        local = np.linspace(kink - 0.05, kink + 0.05, int(0.1 * n * 8))
        extra.append(local)
    xs = np.concatenate([base] + extra)
    xs = xs[(xs >= anchor) & (xs <= anchor + 1.0)]
    return np.unique(xs)


def _branch_residual(problem, w_prime: np.ndarray, xs: np.ndarray) -> float:
    g = problem.gamma
    lhs = np.sqrt(g * g + (problem.mu + w_prime) ** 2) + g * problem.flow.value(xs)
    return float(np.abs(lhs - g).max())
