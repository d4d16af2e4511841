"""Viscous cell-problem solver: the turbulent flame speed at Markstein number d.

For a canonical problem (gamma > 0, max v = 0) the unknown pair is the
slope field phi = (mu + w')/gamma on a uniform periodic grid together with
the eigenvalue E:

    -d phi'/(1 + phi^2) + sqrt(1 + phi^2) + v(x) = E,   mean(phi) = mu/gamma,

and the effective speed is H = gamma*E plus the normalization shift.  The
collocation equations plus the mean constraint form a bordered Newton
system; the border row is essential, since the plain collocation Jacobian
alone becomes exponentially ill-conditioned as d -> 0 while the bordered
matrix stays benign.

Two discretizations share the same interface: a dense trigonometric
differentiation matrix (spectral accuracy, used for moderate grids) and a
6th-order centered finite-difference stencil assembled sparsely (used for
the large grids the small-d transition layer requires).  Small d is reached
by continuation, halving d from 4 with adaptive step refinement.

As d -> 0 the linearization develops a genuine near-null mode concentrated
at the flattest flow maximum (width ~ sqrt(d)); Newton then crawls once the
residual is tiny.  The default tolerance therefore relaxes for very small d;
callers can override it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .flows import FlowProfile, Momentum, NormalizedProblem, normalize
from .gridops import (
    UPWIND5_WEIGHTS,
    close_periodic,
    cumulative_integral,
    integral,
    next_pow2,
    open_grid,
    periodic_antiderivative,
    spectral_derivative,
    trig_diff_matrix,
    trig_interpolate,
    upwind5_derivative,
)

D_CONTINUATION_START = 4.0
SPECTRAL_MAX_N = 512
GRID_MIN = 256
GRID_MAX = 16384
DEFAULT_TOL = 1e-11
# below this d the near-null crawl makes 1e-11 unreachable; relax smoothly
TOL_RELAX_D = 0.02


class SolverError(RuntimeError):
    """Newton failed to converge; carries the last residual for diagnosis."""

    def __init__(self, message: str, residual: float = np.nan, d: float = np.nan):
        super().__init__(message)
        self.residual = residual
        self.d = d


@dataclass
class CellSolution:
    """Converged discrete solution of the cell problem at one Markstein number.

    Arrays live on the normalized problem's frame; `H` is mapped back to the
    original problem through the recorded normalization bookkeeping.
    """

    d: float
    grid_n: int
    x: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    E: float
    H: float
    residual: float
    newton_iters: int
    method: str
    problem: NormalizedProblem


@dataclass
class SweepResult:
    """Markstein sweep: speeds, derivative estimates, and the verdict."""

    d_values: np.ndarray
    H_values: np.ndarray
    dH_dd_fd: np.ndarray
    dE_dd_formula: np.ndarray
    dE_dd_fd: np.ndarray
    residuals: np.ndarray
    strictly_decreasing: bool


def default_tol(d: float) -> float:
    """Residual goal: 1e-11 at moderate d, relaxed where branch interaction
    caps the attainable floor (multi-well flows around d ~ 0.005)."""
    if d >= TOL_RELAX_D:
        return DEFAULT_TOL
    return 1e-9


def stall_tolerance(d: float, tol: float) -> float:
    """Residual level accepted when Newton stalls above the goal.

    For d below the relax threshold the attainable floor on flows with
    competing maxima is the exponentially small branch splitting, which
    passes through ~1e-5 on its way to zero; accept up to that.  At
    moderate d a stall is a genuine failure.
    """
    if d >= TOL_RELAX_D:
        return tol
    return max(tol, 1e-5)


def auto_grid(d: float) -> int:
    """Power-of-two grid resolving the O(d)-wide transition layer."""
    return next_pow2(int(min(max(GRID_MIN, 16.0 / d), GRID_MAX)))


def _phi_residual(d, m, vx, phi, E, deriv):
    dphi = deriv(phi)
    s = np.sqrt(1.0 + phi * phi)
    R = -d * dphi / (1.0 + phi * phi) + s + vx - E
    return R, float(phi.mean() - m), dphi, s


class _DenseSystem:
    """Bordered Newton system on the trigonometric differentiation matrix."""

    name = "spectral"

    def __init__(self, n: int):
        self.n = n
        self.D = trig_diff_matrix(n)

    def derivative(self, f):
        return self.D @ f

    def solve(self, d, phi, dphi, s, R, rm, nu=0.0):
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = -d * self.D / (1.0 + phi * phi)[:, None]
        M[np.arange(n), np.arange(n)] += (
            2 * d * phi * dphi / (1.0 + phi * phi) ** 2 + phi / s + nu
        )
        M[:n, n] = -1.0
        M[n, :n] = 1.0 / n
        rhs = np.concatenate([-R, [-rm]])
        sol = np.linalg.solve(M, rhs)
        for _ in range(2):
            defect = rhs - M @ sol
            if np.abs(defect).max() < 1e-10 * max(np.abs(rhs).max(), 1e-30):
                break
            sol += np.linalg.solve(M, defect)
        return sol[:n], sol[n]


class _BandedSystem:
    """Bordered Newton system on the 5th-order upwind stencil (sparse).

    The upwind bias matters: the pure centered stencil annihilates the
    Nyquist sawtooth, whose Jacobian eigenvalue then crosses zero at
    grid-dependent Markstein numbers and walls off the continuation.
    """

    name = "upwind5"

    def __init__(self, n: int):
        self.n = n
        idx = np.arange(n)
        rows = [np.tile(idx, 7), idx, np.full(n, n)]
        cols = [
            np.concatenate([(idx + s) % n for s in range(-3, 4)]),
            np.full(n, n),
            idx,
        ]
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)

    def derivative(self, f):
        return upwind5_derivative(f)

    def solve(self, d, phi, dphi, s, R, rm, nu=0.0):
        n = self.n
        a = -d * n / (1.0 + phi * phi)  # row factor including 1/h
        diag = 2 * d * phi * dphi / (1.0 + phi * phi) ** 2 + phi / s + nu
        blocks = [a * UPWIND5_WEIGHTS[sft + 3] for sft in range(-3, 4)]
        blocks[3] = blocks[3] + diag
        vals = np.concatenate(blocks + [np.full(n, -1.0), np.full(n, 1.0 / n)])
        M = sp.csc_matrix((vals, (self._rows, self._cols)), shape=(n + 1, n + 1))
        rhs = np.concatenate([-R, [-rm]])
        # COLAMD ordering matters here: the periodic advection structure
        # provokes catastrophic pivot growth under the natural ordering
        lu = spla.splu(M)
        sol = lu.solve(rhs)
        for _ in range(2):
            defect = rhs - M @ sol
            if np.abs(defect).max() < 1e-10 * max(np.abs(rhs).max(), 1e-30):
                break
            sol += lu.solve(defect)
        return sol[:n], sol[n]


def _pick_system(n: int, method: str):
    if method == "auto":
        method = "spectral" if n <= SPECTRAL_MAX_N else "upwind5"
    if method == "spectral":
        if n > 4096:
            raise ValueError("dense spectral system capped at n = 4096")
        return _DenseSystem(n)
    if method == "upwind5":
        return _BandedSystem(n)
    raise ValueError(f"unknown method {method!r}")


def _newton_phi(d, m, vx, n, phi, E, tol, method="auto", maxit=120, stall_accept=None):
    """Bordered Newton iteration; returns (phi, E, residual, iters, method).

    Line search is nonmonotone (reference = worst of the last four
    residuals) because the transition layer's march produces transient
    sup-norm rises along perfectly good Newton directions.  When the plain
    direction fails, damped directions from (J + nu I) are tried before
    giving up.

    If the iteration stalls above tol but at or below `stall_accept`, the
    best iterate is returned with its achieved residual instead of raising:
    near branch-degenerate flows the attainable floor is set by the
    exponentially small splitting between competing profiles, not by the
    discretization.
    """
    system = _pick_system(n, method)
    memory: list = []
    best = (phi, E, np.inf)
    for it in range(maxit):
        R, rm, dphi, s = _phi_residual(d, m, vx, phi, E, system.derivative)
        res = max(float(np.abs(R).max()), abs(rm))
        if res < best[2]:
            best = (phi.copy(), E, res)
        if res < tol:
            return phi, E, res, it, system.name
        memory.append(res)
        ref = max(memory[-4:])
        accepted = False
        for damping in (0.0, 1e-4, 1e-2):
            dphi_dir, dE = system.solve(d, phi, dphi, s, R, rm, nu=damping * res)
            lam = 1.0
            for _ in range(30):
                cand_phi = phi + lam * dphi_dir
                cand_E = E + lam * dE
                Rt, rmt, _, _ = _phi_residual(
                    d, m, vx, cand_phi, cand_E, system.derivative
                )
                rt = max(float(np.abs(Rt).max()), abs(rmt))
                if rt < ref * (1.0 - 1e-4 * lam) or rt < tol:
                    accepted = True
                    break
                lam *= 0.5
            if accepted:
                break
        if not accepted:
            break
        phi, E = cand_phi, cand_E
    phi_b, E_b, res_b = best
    if stall_accept is not None and res_b <= stall_accept:
        return phi_b, E_b, res_b, maxit, system.name
    raise SolverError(
        f"Newton stalled at d={d:g} (best residual {res_b:.3e}, goal {tol:g})",
        residual=res_b,
        d=d,
    )


def _cold_start(m, vx):
    n = len(vx)
    return np.full(n, m), float(np.sqrt(1.0 + m * m) + vx.mean())


def _continuation_schedule(d_target: float) -> list:
    ds = []
    d = D_CONTINUATION_START
    while d > d_target * (1 + 1e-9):
        ds.append(d)
        d /= 2.0
    ds.append(d_target)
    return ds


def _solve_normalized(problem, d, grid_n, tol, method, warm=None):
    """Adaptive continuation driver on the normalized problem.

    `warm` may carry (phi, E, d_from) from a previous solve at a larger d.
    The d step is adaptive: halving by default, gentler (down to ~0.5%)
    through the transition zone where the layer forms, growing back after
    easy steps.  Grid changes are re-converged at the current d before the
    next d step: interpolation artifacts otherwise wreck the entry residual
    on sharp layers.  Intermediate steps fail fast and only warm-start the
    next level; the final step gets the full iteration budget.
    """
    m = problem.mean_ratio
    final_n = grid_n if grid_n is not None else auto_grid(d)
    if d >= D_CONTINUATION_START / 2 and warm is None:
        vx = problem.flow.value(open_grid(final_n))
        phi0, E0 = _cold_start(m, vx)
        phi, E, res, iters, name = _newton_phi(
            d, m, vx, final_n, phi0, E0, tol, method
        )
        return phi, E, res, iters, final_n, name

    def solve_at(dk, n, phi0, E0, step_tol, maxit, accept):
        vx = problem.flow.value(open_grid(n))
        return _newton_phi(
            dk, m, vx, n, phi0, E0, step_tol, method,
            maxit=maxit, stall_accept=accept,
        )

    inter_tol = max(tol, 1e-9)
    if warm is not None:
        phi, E, d_cur = warm
        n_cur = len(phi)
    else:
        n_cur = min(auto_grid(D_CONTINUATION_START), final_n)
        phi0, E0 = _cold_start(m, problem.flow.value(open_grid(n_cur)))
        phi, E, _, _, _ = solve_at(
            D_CONTINUATION_START, n_cur, phi0, E0, inter_tol, 120,
            stall_tolerance(D_CONTINUATION_START, inter_tol),
        )
        d_cur = D_CONTINUATION_START
    def regrid(n_new, d_at, phi, E):
        ph = trig_interpolate(phi, n_new)
        return solve_at(
            d_at, n_new, ph, E, inter_tol, 120, stall_tolerance(d_at, inter_tol)
        )

    iters_total = 0
    factor = 2.0
    budget = 3000
    while d_cur > d * (1 + 1e-12):
        d_next = max(d_cur / factor, d)
        # grow the grid for the upcoming level before stepping down in d;
        # the current, well-resolved state regrids in a Newton step or two
        n_needed = min(max(auto_grid(d_next), n_cur), final_n)
        if n_needed != n_cur:
            phi, E, _, it0, _ = regrid(n_needed, d_cur, phi, E)
            iters_total += it0
            n_cur = n_needed
        try:
            phi_new, E_new, _, iters, _ = solve_at(
                d_next, n_cur, phi.copy(), E, inter_tol, 30,
                stall_tolerance(d_next, inter_tol),
            )
        except SolverError:
            iters_total += 30
            factor = np.sqrt(factor)
            if factor < 1.005 or iters_total > budget:
                raise
            continue
        phi, E, d_cur = phi_new, E_new, d_next
        iters_total += iters
        if iters_total > budget:
            raise SolverError(
                f"continuation iteration budget exhausted at d={d_cur:g}",
                residual=np.nan, d=d_cur,
            )
        if iters <= 6:
            factor = min(2.0, factor * 1.4)
    if n_cur != final_n:
        phi, E, _, it0, _ = regrid(final_n, d, phi, E)
        iters_total += it0
        n_cur = final_n
    phi, E, res, iters, name = solve_at(
        d, n_cur, phi, E, tol, 250, stall_tolerance(d, tol)
    )
    iters_total += iters
    return phi, E, res, iters_total, n_cur, name


def solve_cell(
    problem: NormalizedProblem,
    d: float,
    grid_n: Optional[int] = None,
    tol: Optional[float] = None,
    method: str = "auto",
    warm: Optional[tuple] = None,
) -> CellSolution:
    """Solve the cell problem at Markstein number d on a normalized problem.

    grid_n must be a power of two >= 64 when given; by default it scales
    like 16/d to resolve the transition layer.  Raises SolverError if Newton
    cannot reach the tolerance.
    """
    if d <= 0:
        raise ValueError("Markstein number d must be positive")
    if grid_n is not None:
        if grid_n < 64 or grid_n & (grid_n - 1):
            raise ValueError("grid_n must be a power of two >= 64")
    if tol is None:
        tol = default_tol(d)
    phi, E, res, iters, n, name = _solve_normalized(
        problem, d, grid_n, tol, method, warm
    )
    w = problem.gamma * periodic_antiderivative(phi)
    H_norm = problem.gamma * E
    return CellSolution(
        d=d,
        grid_n=n,
        x=open_grid(n),
        phi=phi,
        w=w,
        E=E,
        H=problem.h_original(H_norm),
        residual=res,
        newton_iters=iters,
        method=name,
        problem=problem,
    )


def turbulent_flame_speed(
    flow: FlowProfile,
    p: Momentum,
    d: float,
    grid_n: Optional[int] = None,
    tol: Optional[float] = None,
) -> tuple:
    """Effective front speed for any momentum, including the degenerate one.

    For p = (0, mu) the speed is |mu| exactly and the fluctuation vanishes;
    otherwise the problem is normalized and solved.  Returns (H, solution)
    where solution is None on the degenerate path.
    """
    if p.gamma == 0.0:
        return abs(p.mu), None
    problem = normalize(flow, p)
    sol = solve_cell(problem, d, grid_n=grid_n, tol=tol)
    return sol.H, sol


def sweep_markstein(
    problem: NormalizedProblem,
    d_values: Sequence[float],
    grid_n: Optional[int] = None,
    tol: Optional[float] = None,
    alpha_fd_step: float = 1e-3,
    compute_alpha_fd: bool = True,
) -> SweepResult:
    """Solve along a descending schedule of Markstein numbers.

    Fills three derivative estimates: secant differences of H over the
    sweep grid (centered where possible), the closed-form dE/dd evaluated
    on each converged profile, and a small-step centered FD of E for
    cross-validation of the formula.
    """
    d_values = np.asarray(list(d_values), dtype=float)
    if len(d_values) == 0:
        raise ValueError("empty d schedule")
    if np.any(np.diff(d_values) >= 0):
        raise ValueError("d_values must be strictly decreasing for continuation")
    H = np.empty_like(d_values)
    E = np.empty_like(d_values)
    residuals = np.empty_like(d_values)
    alpha_form = np.empty_like(d_values)
    alpha_fd = np.full_like(d_values, np.nan)
    warm = None
    for i, d in enumerate(d_values):
        sol = solve_cell(problem, d, grid_n=grid_n, tol=tol, warm=warm)
        warm = (sol.phi, sol.E, d)
        H[i], E[i], residuals[i] = sol.H, sol.E, sol.residual
        alpha_form[i] = alpha_from_formula(sol)
        if compute_alpha_fd:
            step = min(alpha_fd_step, d / 4)
            up = solve_cell(problem, d + step, grid_n=sol.grid_n, tol=tol,
                            warm=(sol.phi, sol.E, d))
            dn = solve_cell(problem, d - step, grid_n=sol.grid_n, tol=tol,
                            warm=(sol.phi, sol.E, d))
            alpha_fd[i] = (up.E - dn.E) / (2 * step)
    dH = np.empty_like(d_values)
    if len(d_values) == 1:
        dH[:] = np.nan
    else:
        dH[0] = (H[1] - H[0]) / (d_values[1] - d_values[0])
        dH[-1] = (H[-1] - H[-2]) / (d_values[-1] - d_values[-2])
        if len(d_values) > 2:
            dH[1:-1] = (H[2:] - H[:-2]) / (d_values[2:] - d_values[:-2])
    strict = bool(np.all(np.diff(H) > 0)) if len(H) > 1 else True
    # d decreasing, H increasing along the sweep <=> H decreasing in d
    return SweepResult(
        d_values=d_values,
        H_values=H,
        dH_dd_fd=dH,
        dE_dd_formula=alpha_form,
        dE_dd_fd=alpha_fd,
        residuals=residuals,
        strictly_decreasing=strict,
    )


def mean_identity_check(sol: CellSolution, problem: Optional[NormalizedProblem] = None) -> float:
    """Deviation from the integral identity tying H to the profile.

    Integrating the cell equation over one period kills the derivative term
    (arctan(phi) is periodic), leaving

        H = int_0^1 sqrt(gamma^2 + (mu + w')^2) dy + gamma * int_0^1 v dy

    in original-frame quantities.  Returns |H - quadrature|.
    """
    pb = problem if problem is not None else sol.problem
    g = pb.gamma
    speed_term = g * float(np.sqrt(1.0 + sol.phi**2).mean())
    flow_term = g * (float(pb.flow.value(sol.x).mean()) + pb.c_shift)
    return abs(sol.H - (speed_term + flow_term))


def alpha_from_formula(sol: CellSolution, d: Optional[float] = None) -> float:
    """Closed-form dE/dd evaluated on a converged profile.

    Differentiating the cell equation in d gives a linear periodic problem
    for the profile's d-derivative; solving it with an integrating factor
    and imposing periodicity plus zero mean yields alpha = -N/D with

        g(x) = log(1+phi^2(x)) - log(1+phi^2(0)) + (1/d) int_0^x phi sqrt(1+phi^2)

    (the coefficient integral of the linearized equation divided through by
    d; for d = 1 this is the natural integrating factor of the variational
    equation).  N and D are the bilinear integral combinations

        N = e^{g(1)} int phi' e^{-g} . int e^{g} - (e^{g(1)}-1) int e^{g(x)} int_0^x phi' e^{-g},
        D = likewise with (1+phi^2) in place of phi'.

    D is positive for any profile; a nonpositive D signals quadrature
    failure and raises.  The sign of alpha is negative exactly when the
    flow is non-constant.  Exponentials are shifted by max(g), which cancels
    in every product, to avoid overflow at small d.
    """
    if d is None:
        d = sol.d
    phi = sol.phi
    n = len(phi)
    x = np.linspace(0.0, 1.0, n + 1)
    p = close_periodic(phi)
    s = np.sqrt(1.0 + p * p)
    hcum = cumulative_integral(p * s, x)
    g = np.log1p(p * p) - np.log1p(p[0] ** 2) + hcum / d
    g1 = hcum[-1] / d
    g = g - g.max()
    dphi = close_periodic(spectral_derivative(phi))
    eg = np.exp(g)
    emg = np.exp(-g)
    wgt = 1.0 + p * p
    int_eg = integral(eg, x)
    eg1 = np.exp(g1)
    num = eg1 * integral(dphi * emg, x) * int_eg - (eg1 - 1.0) * integral(
        eg * cumulative_integral(dphi * emg, x), x
    )
    den = eg1 * integral(wgt * emg, x) * int_eg - (eg1 - 1.0) * integral(
        eg * cumulative_integral(wgt * emg, x), x
    )
    if not np.isfinite(den) or den <= 0.0:
        raise ArithmeticError(
            f"denominator of the dE/dd formula is not positive ({den!r}); "
            "quadrature failure"
        )
    return float(-num / den)


def solve_viscous_hj(
    G: FlowProfile,
    hamiltonian: Callable[[np.ndarray], np.ndarray],
    hamiltonian_deriv: Callable[[np.ndarray], np.ndarray],
    p: float,
    d: float,
    grid_n: int = 256,
    tol: float = 1e-11,
    maxit: int = 120,
) -> tuple:
    """Effective Hamiltonian of the 1-D viscous cell problem

        -d w'' + H(p + w') + G(x) = Hbar(p, d),   w 1-periodic, w(0) = 0.

    Dense spectral collocation with the unknown Hbar bordered in and w(0)
    pinned.  Works for convex or non-convex H with a first derivative;
    continuation halves d from 2 when the target is small.
    """
    if d <= 0:
        raise ValueError("diffusivity d must be positive")
    n = grid_n
    x = open_grid(n)
    Gx = G.value(x)
    D = trig_diff_matrix(n)
    D2 = D @ D
    schedule = [dd for dd in _continuation_schedule(d) if dd <= max(2.0, d)]
    if not schedule or schedule[0] != max(2.0, d):
        schedule = [max(2.0, d)] + [dd for dd in schedule if dd < max(2.0, d)]
    w = np.zeros(n)
    Hbar = float(np.asarray(hamiltonian(np.asarray(p, dtype=float)))) + float(Gx.mean())

    def hj_resid(dd, w, Hbar):
        wp = D @ w
        return -dd * (D2 @ w) + hamiltonian(p + wp) + Gx - Hbar, wp

    for dd in schedule:
        memory = []
        for it in range(maxit):
            R, wp = hj_resid(dd, w, Hbar)
            res = max(float(np.abs(R).max()), abs(w[0]))
            if res < tol:
                break
            memory.append(res)
            ref = max(memory[-4:])
            M = np.zeros((n + 1, n + 1))
            M[:n, :n] = -dd * D2 + hamiltonian_deriv(p + wp)[:, None] * D
            M[:n, n] = -1.0
            M[n, 0] = 1.0
            rhs = np.concatenate([-R, [-w[0]]])
            sol = np.linalg.solve(M, rhs)
            sol += np.linalg.solve(M, rhs - M @ sol)
            lam, accepted = 1.0, False
            for _ in range(30):
                wt = w + lam * sol[:n]
                Ht = Hbar + lam * sol[n]
                Rt, _ = hj_resid(dd, wt, Ht)
                rt = max(float(np.abs(Rt).max()), abs(wt[0]))
                if rt < ref * (1.0 - 1e-4 * lam) or rt < tol:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                raise SolverError(
                    f"viscous HJ line search failed at d={dd:g}", residual=res, d=dd
                )
            w, Hbar = wt, Ht
        else:
            raise SolverError(
                f"viscous HJ Newton did not converge at d={dd:g}", residual=res, d=dd
            )
    return float(Hbar), w
