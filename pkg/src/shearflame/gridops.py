"""Periodic-grid numerics shared by the solver modules.

Everything here operates on uniform grids over one period [0, 1).  Open
grids (x_j = j/n, no right endpoint) are used by the cell solver; closed
grids (n+1 points including both endpoints) are used by the quadrature
helpers that feed the inequality checks.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.linalg import toeplitz

FD6_WEIGHTS = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
# 5th-order upwind-biased derivative = centered 6th order + (1/60) * sixth
# difference.  The dissipation term removes the sawtooth kernel of the pure
# centered stencil (the exact Nyquist mode has zero centered derivative),
# which otherwise makes the collocation Jacobian singular at grid-dependent
# Markstein numbers.
UPWIND5_WEIGHTS = FD6_WEIGHTS + np.array([1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]) / 60.0


def open_grid(n: int) -> np.ndarray:
    """Uniform periodic grid x_j = j/n, j = 0..n-1."""
    return np.arange(n) / n


def trig_diff_matrix(n: int) -> np.ndarray:
    """Dense trigonometric differentiation matrix on the period-1 open grid.

    Standard cotangent construction for even n (DMSuite style), scaled from
    the 2*pi-periodic domain to period 1.
    """
    if n % 2 != 0:
        raise ValueError("trig_diff_matrix requires even n")
    h = 2 * np.pi / n
    col = np.zeros(n)
    j = np.arange(1, n)
    col[1:] = 0.5 * (-1.0) ** j / np.tan(j * h / 2.0)
    return 2 * np.pi * toeplitz(col, -col)


def fd6_derivative(f: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Sixth-order centered finite-difference derivative, periodic wrap."""
    return stencil_derivative(f, FD6_WEIGHTS, period)


def upwind5_derivative(f: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Fifth-order upwind-biased derivative (sawtooth-safe), periodic wrap."""
    return stencil_derivative(f, UPWIND5_WEIGHTS, period)


def stencil_derivative(f: np.ndarray, weights: np.ndarray, period: float = 1.0) -> np.ndarray:
    n = len(f)
    h = period / n
    out = np.zeros_like(f)
    for shift, c in zip(range(-3, 4), weights):
        if c:
            out += c * np.roll(f, -shift)
    return out / h


def spectral_derivative(f: np.ndarray, period: float = 1.0) -> np.ndarray:
    """FFT derivative of samples on the open periodic grid."""
    n = len(f)
    coeff = np.fft.rfft(f)
    k = np.arange(len(coeff))
    return np.fft.irfft(coeff * (2j * np.pi * k / period), n)


def trig_interpolate(f: np.ndarray, n_new: int) -> np.ndarray:
    """Resample periodic data onto a finer/coarser open grid by FFT padding."""
    n = len(f)
    coeff = np.fft.rfft(f)
    out = np.zeros(n_new // 2 + 1, dtype=complex)
    m = min(len(coeff), len(out))
    out[:m] = coeff[:m]
    return np.fft.irfft(out, n_new) * (n_new / n)


def periodic_antiderivative(f: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Antiderivative of the zero-mean part of periodic samples, F(0) = 0.

    The mean of f is discarded; the caller accounts for any linear drift.
    Spectrally accurate for smooth data.
    """
    n = len(f)
    coeff = np.fft.rfft(f - f.mean())
    k = np.arange(len(coeff)).astype(float)
    k[0] = 1.0
    anti = coeff / (2j * np.pi * k / period)
    anti[0] = 0.0
    out = np.fft.irfft(anti, n)
    return out - out[0]


def close_periodic(f: np.ndarray) -> np.ndarray:
    """Append the wrap value so open-grid samples become closed-grid ones."""
    return np.concatenate([f, f[:1]])


def cumulative_integral(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative integral on a closed uniform grid, F(x_0) = 0.

    Composite-Simpson based (4th order); used for the non-periodic nested
    integrands e^{±g} * (smooth) that appear in the inequality machinery.
    """
    return np.concatenate([[0.0], cumulative_simpson(f, x=x)])


def integral(f: np.ndarray, x: np.ndarray) -> float:
    """Composite Simpson integral on a closed uniform grid."""
    return float(simpson(f, x=x))


def periodic_mean(f: np.ndarray) -> float:
    """Mean over one period of open-grid samples (spectrally accurate)."""
    return float(f.mean())


def next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()
