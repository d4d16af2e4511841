"""Numerical oracles for the inequality machinery behind the slowdown proof.

Three layers, checked independently:

* the A/B/C integral functionals of a periodic slope profile, whose
  combination A + B - C equals the numerator of the closed-form dE/dd and
  is positive for non-constant profiles; plus the sign-splitting bound
  relating a profile to its positive part;
* a constrained discrete inequality for weight families (b, b~) with equal
  row/column budgets: W(a) >= c sum a_i g(a_i) + (theta tau / 2) sum (a_i - a_k)^2
  whenever g' <= -theta, with equality exactly on constant tuples;
* its continuous counterpart with exponential kernels on [0, T], in both
  the decreasing-g (>=) and increasing-g (<=) directions.

All quadrature is composite Simpson on uniform grids; inequality checks are
one-sided with a small relative slack so roundoff cannot produce false
alarms.  The randomized suite draws weight perturbations from the null
space of the budget constraints, so every generated case is admissible by
construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import null_space

from .gridops import close_periodic, cumulative_integral, integral

SLACK_REL = 1e-9


@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    gap: float
    quadratic_term: float
    passed: bool
    equality: bool
    slack: float


@dataclass(frozen=True)
class GSpec:
    """A C^1 function g on (0, L] with a certified derivative bound.

    `theta` bounds g' one-sidedly on the whole interval: g' <= -theta for
    decreasing families, g' >= theta for increasing ones.
    """

    name: str
    fun: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    L: float
    theta: float
    decreasing: bool = True


def g_inverse_sine(M: float) -> GSpec:
    """g(y) = 1/sin(y) on (0, arctan M] with theta = 1/sqrt(1 + M^2)."""
    L = float(np.arctan(M))
    return GSpec(
        name="inverse-sine",
        fun=lambda y: 1.0 / np.sin(y),
        deriv=lambda y: -np.cos(y) / np.sin(y) ** 2,
        L=L,
        theta=1.0 / np.sqrt(1.0 + M * M),
    )


def g_exponential(k: float, L: float) -> GSpec:
    """g(y) = e^{-k y}; |g'| >= k e^{-k L} on (0, L]."""
    return GSpec(
        name="exponential",
        fun=lambda y: np.exp(-k * y),
        deriv=lambda y: -k * np.exp(-k * y),
        L=float(L),
        theta=float(k * np.exp(-k * L)),
    )


def g_linear(A: float, theta: float, L: float, decreasing: bool = True) -> GSpec:
    s = -1.0 if decreasing else 1.0
    return GSpec(
        name="linear",
        fun=lambda y: A + s * theta * y,
        deriv=lambda y: np.full_like(np.asarray(y, dtype=float), s * theta),
        L=float(L),
        theta=float(theta),
        decreasing=decreasing,
    )


def _slack(*values: float) -> float:
    return SLACK_REL * max(*(abs(v) for v in values), 1.0)


# ---------------------------------------------------------------------------
# A/B/C functionals of a periodic slope profile


def _abc_from_closed(p: np.ndarray, x: np.ndarray):
    s = np.sqrt(1.0 + p * p)
    h = cumulative_integral(p * s, x)
    h1 = h[-1]
    inner = cumulative_integral((1.0 + p * p) * np.exp(h), x)
    lam = np.arctan(p)
    core = lam * np.exp(-h) * p * s
    A = np.exp(h1) * integral(core * inner, x)
    B = integral(core * (inner[-1] - inner), x)
    C = (np.exp(h1) - 1.0) * integral(lam * (1.0 + p * p), x)
    return A, B, C, h1


def abc_functionals(phi: np.ndarray) -> tuple:
    """(A, B, C, gap) for a profile sampled on the uniform periodic grid.

    With h(x) = int_0^x phi sqrt(1+phi^2):

        A = e^{h(1)} int arctan(phi) e^{-h} phi sqrt(1+phi^2) int_0^x (1+phi^2) e^{h},
        B = the complementary tail version of A without the e^{h(1)} factor,
        C = (e^{h(1)} - 1) int arctan(phi) (1+phi^2).

    gap = A + B - C vanishes on constants and is strictly positive for any
    non-constant profile; under the mirror map phi -> -phi(-x) the gap
    scales by e^{-h(1)} (so it is invariant exactly when h(1) = 0).
    """
    phi = np.asarray(phi, dtype=float)
    n = len(phi)
    if n % 2:
        raise ValueError("expect an even number of samples on the open periodic grid")
    x = np.linspace(0.0, 1.0, n + 1)
    A, B, C, _ = _abc_from_closed(close_periodic(phi), x)
    return float(A), float(B), float(C), float(A + B - C)


def split_inequality_check(phi: np.ndarray) -> InequalityReport:
    """Sign-splitting bound: gap(phi) >= e^{h^-(1)} gap(phi_+).

    phi_+ = max(phi, 0) and h^-(1) = int phi_- sqrt(1 + phi_-^2) <= 0.
    Equality holds exactly when phi has no negative part.
    """
    phi = np.asarray(phi, dtype=float)
    n = len(phi)
    x = np.linspace(0.0, 1.0, n + 1)
    pc = close_periodic(phi)
    pp = np.maximum(pc, 0.0)
    pm = np.minimum(pc, 0.0)
    A, B, C, _ = _abc_from_closed(pc, x)
    Ap, Bp, Cp, _ = _abc_from_closed(pp, x)
    hm1 = integral(pm * np.sqrt(1.0 + pm * pm), x)
    lhs = A + B - C
    rhs = float(np.exp(hm1) * (Ap + Bp - Cp))
    slack = _slack(lhs, rhs)
    negative_part_zero = bool(np.all(phi >= -1e-15))
    return InequalityReport(
        lhs=float(lhs),
        rhs=rhs,
        gap=float(lhs - rhs),
        quadratic_term=0.0,
        passed=bool(lhs >= rhs - slack),
        equality=negative_part_zero,
        slack=slack,
    )


# ---------------------------------------------------------------------------
# Continuous inequality with exponential kernels on [0, T]


def continuous_inequality(
    f: np.ndarray,
    T: float,
    g: GSpec,
    direction: Optional[str] = None,
) -> InequalityReport:
    """Exponential-kernel inequality for a positive profile f on [0, T].

    lhs = e^T int f e^{-x} int_0^x g(f) e^y + int f e^{-x} int_x^T g(f) e^y.
    For decreasing g (g' <= -theta):
        lhs >= (e^T - 1) int f g(f) + (theta/2) iint |f(x) - f(y)|^2;
    for increasing g the inequality flips with the quadratic term negated.

    f is sampled on the closed uniform grid over [0, T] (even panel count).
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0.0):
        raise ValueError("f must be strictly positive (g may blow up at 0)")
    if float(f.max()) > g.L * (1 + 1e-12):
        raise ValueError("max f exceeds the domain cap L of g")
    decreasing = g.decreasing if direction is None else (direction == "decreasing")
    n = len(f)
    x = np.linspace(0.0, T, n)
    gf = g.fun(f)
    K = cumulative_integral(gf * np.exp(x), x)
    lhs = np.exp(T) * integral(f * np.exp(-x) * K, x) + integral(
        f * np.exp(-x) * (K[-1] - K), x
    )
    base = (np.exp(T) - 1.0) * integral(f * gf, x)
    intf = integral(f, x)
    intf2 = integral(f * f, x)
    double = 2.0 * T * intf2 - 2.0 * intf * intf
    quad = 0.5 * g.theta * double
    slack = _slack(lhs, base, quad)
    if decreasing:
        rhs = base + quad
        passed = lhs >= rhs - slack
    else:
        rhs = base - quad
        passed = lhs <= rhs + slack
    eq = abs(lhs - base) <= slack and quad <= slack
    return InequalityReport(
        lhs=float(lhs),
        rhs=float(rhs),
        gap=float(lhs - base) if decreasing else float(base - lhs),
        quadratic_term=float(quad),
        passed=bool(passed),
        equality=bool(eq),
        slack=slack,
    )


# ---------------------------------------------------------------------------
# Constrained discrete inequality


def canonical_weights(n: int, T: float) -> tuple:
    """The exponential weight family on the uniform partition of [0, T].

    b[i, k] = e^{T - x_i + x_k} on the lower triangle (k <= i) and
    b~[i, k] = e^{x_k - x_i} on the upper one satisfy both budget
    constraints with c = (e^{T + T/n} - 1)/(e^{T/n} - 1), and every entry
    is >= 1.
    """
    xs = T * np.arange(1, n + 1) / n
    low = np.tril(np.exp(T - xs[:, None] + xs[None, :]))
    up = np.triu(np.exp(xs[None, :] - xs[:, None]))
    c = (np.exp(T + T / n) - 1.0) / (np.exp(T / n) - 1.0)
    return low, up, float(c)


def constraint_residual(b: np.ndarray, b_tilde: np.ndarray, c: float) -> float:
    """Worst deviation of the row/column budget sums from c."""
    n = b.shape[0]
    rows = np.array(
        [b[i, : i + 1].sum() + b_tilde[i, i:].sum() for i in range(n)]
    )
    cols = np.array(
        [b[k:, k].sum() + b_tilde[: k + 1, k].sum() for k in range(n)]
    )
    return float(max(np.abs(rows - c).max(), np.abs(cols - c).max()))


def _constraint_matrix(n: int) -> tuple:
    """Budget constraints as a matrix over the stacked triangular entries."""
    low_idx = [(i, k) for i in range(n) for k in range(i + 1)]
    up_idx = [(i, k) for i in range(n) for k in range(i, n)]
    m = len(low_idx) + len(up_idx)
    A = np.zeros((2 * n, m))
    for j, (i, k) in enumerate(low_idx):
        A[i, j] += 1.0  # row budget of row i
        A[n + k, j] += 1.0  # column budget of column k
    off = len(low_idx)
    for j, (i, k) in enumerate(up_idx):
        A[i, off + j] += 1.0
        A[n + k, off + j] += 1.0
    return A, low_idx, up_idx


def random_constraint_weights(
    n: int,
    base_T: float,
    tau: float,
    seed=None,
    scale: float = 0.5,
) -> tuple:
    """Admissible random weights: canonical family plus a null-space kick.

    The perturbation lives in the null space of the 2n budget constraints,
    so both sums stay equal to the canonical c to rounding; it is scaled so
    every entry stays >= tau.  If tau exceeds the canonical minimum entry
    no perturbation is possible and the canonical family is returned with a
    warning.  Returns (b, b_tilde, c).
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    low, up, c = canonical_weights(n, base_T)
    A, low_idx, up_idx = _constraint_matrix(n)
    vec = np.concatenate(
        [np.array([low[i, k] for i, k in low_idx]), np.array([up[i, k] for i, k in up_idx])]
    )
    if vec.min() < tau:
        warnings.warn(
            "tau exceeds the canonical minimum entry; returning unperturbed weights"
        )
        return low, up, c
    N = null_space(A)
    if N.shape[1] == 0:
        return low, up, c
    direction = N @ rng.normal(size=N.shape[1])
    mx = np.abs(direction).max()
    if mx > 0:
        headroom = vec.min() - tau
        direction *= scale * headroom / mx
    perturbed = vec + direction
    b = np.zeros((n, n))
    bt = np.zeros((n, n))
    for j, (i, k) in enumerate(low_idx):
        b[i, k] = perturbed[j]
    off = len(low_idx)
    for j, (i, k) in enumerate(up_idx):
        bt[i, k] = perturbed[off + j]
    return b, bt, c


def discrete_inequality(
    a: np.ndarray,
    b: np.ndarray,
    b_tilde: np.ndarray,
    g: GSpec,
    theta: float,
    tau: float,
    c: float,
) -> InequalityReport:
    """Weighted inequality W(a) >= c sum a g(a) + (theta tau / 2) sum (a_i - a_k)^2.

    The weights must satisfy the budget constraints to 1e-10 and the floor
    tau; g' <= -theta is required on (0, max a].  Equality is reported when
    all entries of a coincide.
    """
    a = np.asarray(a, dtype=float)
    n = len(a)
    if np.any(a <= 0) or float(a.max()) > g.L * (1 + 1e-12):
        raise ValueError("a must lie in (0, L]^n")
    if constraint_residual(b, b_tilde, c) > 1e-10 * max(abs(c), 1.0):
        raise ValueError("weights violate the budget constraints")
    active = np.concatenate(
        [b[np.tril_indices(n)], b_tilde[np.triu_indices(n)]]
    )
    if active.min() < tau - 1e-12:
        raise ValueError("weights violate the floor tau")
    ga = g.fun(a)
    W = float(a @ ((b + b_tilde) @ ga))
    base = c * float(a @ ga)
    quad = 0.5 * theta * tau * float(2 * n * (a @ a) - 2 * a.sum() ** 2)
    slack = _slack(W, base, quad)
    gap = W - base
    equality = bool(np.all(a == a[0]))
    return InequalityReport(
        lhs=W,
        rhs=base + quad,
        gap=float(gap),
        quadratic_term=float(quad),
        passed=bool(gap >= quad - slack),
        equality=equality,
        slack=slack,
    )


# ---------------------------------------------------------------------------
# Randomized verification suite


def _random_gspec(rng, L_hint: Optional[float] = None):
    kind = rng.integers(0, 3)
    if kind == 0:
        M = rng.uniform(0.5, 4.0)
        return g_inverse_sine(M)
    if kind == 1:
        L = L_hint if L_hint is not None else rng.uniform(0.5, 2.0)
        return g_exponential(rng.uniform(0.3, 2.0), L)
    L = L_hint if L_hint is not None else rng.uniform(0.5, 2.0)
    return g_linear(rng.uniform(0.5, 3.0), rng.uniform(0.1, 2.0), L)


def run_random_suite(
    n_discrete: int = 1000,
    n_continuous: int = 200,
    seed: int = 0,
    grid: int = 1024,
) -> dict:
    """Randomized inequality verification; any failure is build-breaking.

    Returns a report dict with case counts, minimal margins (gap minus
    quadratic term, most negative is worst) and reproduction data for any
    failures.
    """
    rng = np.random.default_rng(seed)
    failures = []
    min_margin_disc = np.inf
    for case in range(n_discrete):
        n = int(rng.integers(3, 13))
        T = float(rng.uniform(0.5, 3.0))
        tau = 0.5
        b, bt, c = random_constraint_weights(n, T, tau, seed=rng)
        g = _random_gspec(rng)
        lo = 0.05 * g.L
        a = rng.uniform(lo, g.L, size=n)
        if rng.uniform() < 0.1:
            a[:] = a[0]  # exercise the equality branch
        theta = g.theta if rng.uniform() < 0.8 else 0.0
        rep = discrete_inequality(a, b, bt, g, theta, tau, c)
        margin = rep.gap - rep.quadratic_term
        min_margin_disc = min(min_margin_disc, margin)
        if not rep.passed:
            failures.append({"kind": "discrete", "case": case, "margin": margin})
    min_margin_cont = np.inf
    for case in range(n_continuous):
        T = float(rng.uniform(0.5, 2.5))
        g = _random_gspec(rng)
        n = grid + 1
        x = np.linspace(0.0, T, n)
        kmax = int(rng.integers(1, 4))
        f = np.full(n, 0.55 * g.L)
        for k in range(1, kmax + 1):
            amp = 0.35 * g.L * rng.uniform(-1, 1) / k
            f += amp * np.cos(2 * np.pi * k * x / T + rng.uniform(0, 2 * np.pi))
        f = np.clip(f, 0.05 * g.L, g.L)
        rep = continuous_inequality(f, T, g)
        margin = rep.gap - rep.quadratic_term
        min_margin_cont = min(min_margin_cont, margin)
        if not rep.passed:
            failures.append({"kind": "continuous", "case": case, "margin": margin})
    return {
        "discrete_cases": n_discrete,
        "continuous_cases": n_continuous,
        "seed": seed,
        "min_margin_discrete": float(min_margin_disc),
        "min_margin_continuous": float(min_margin_cont),
        "failures": failures,
        "passed": not failures,
    }
