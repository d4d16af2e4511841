"""Weak-flow expansion of the effective front speed in dimension n.

For a small incompressible field delta*V and a unit direction p obeying a
Diophantine condition, the effective speed expands as

    H_d(p) = |p| + delta a1(p) + delta^2 a2(p) + O(delta^3),
    a1 = p . lambda_0,
    a2 = (1/2) sum_{k != 0} |p.lambda_k|^2 |k|^2
         / ( d^2 (|k|^2 - |p.k|^2)^2 4 pi^2 + |p.k|^2 ),

with lambda_k the Fourier coefficients of V.  a2 is a sum of nonnegative
terms, and each term with |k| != |p.k| strictly decreases in d, which is
the perturbative face of the slowdown.  Only the coefficients are computed;
the corrector fields themselves are never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Optional, Tuple

import numpy as np

from .flows import FlowSpec


@dataclass
class VectorFieldFourier:
    """Truncated Fourier data of a periodic incompressible vector field.

    coeffs maps integer wavevectors k to complex n-vectors lambda_k.
    Invariants enforced by `validate`: lambda_{-k} = conj(lambda_k) (real
    field) and k . lambda_k = 0 (divergence free).
    """

    dimension: int
    coeffs: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict)

    def validate(self, tol: float = 1e-12) -> None:
        for k, lam in self.coeffs.items():
            if len(k) != self.dimension or len(lam) != self.dimension:
                raise ValueError(f"coefficient for k={k} has wrong dimension")
            kv = np.asarray(k, dtype=float)
            if abs(kv @ lam) > tol * max(1.0, float(np.abs(lam).max())):
                raise ValueError(f"field is not divergence free at k={k}")
            mk = tuple(-ki for ki in k)
            other = self.coeffs.get(mk)
            if other is None or np.abs(np.conj(lam) - other).max() > tol:
                raise ValueError(f"reality condition fails at k={k}")
        lam0 = self.coeffs.get((0,) * self.dimension)
        if lam0 is not None and np.abs(lam0.imag).max() > tol:
            raise ValueError("mean coefficient must be real")

    @property
    def truncation(self) -> int:
        if not self.coeffs:
            return 0
        return max(max(abs(ki) for ki in k) for k in self.coeffs)

    @classmethod
    def from_shear(cls, spec: FlowSpec) -> "VectorFieldFourier":
        """The 2-D shear field (v(x2), 0) of a scalar profile."""
        coeffs: Dict[Tuple[int, ...], np.ndarray] = {}
        coeffs[(0, 0)] = np.array([spec.offset, 0.0], dtype=complex)
        kmax = max(len(spec.cos), len(spec.sin))
        a = np.zeros(kmax)
        b = np.zeros(kmax)
        a[: len(spec.cos)] = spec.cos
        b[: len(spec.sin)] = spec.sin
        for m in range(1, kmax + 1):
            lam = 0.5 * (a[m - 1] - 1j * b[m - 1])
            if lam != 0:
                coeffs[(0, m)] = np.array([lam, 0.0])
                coeffs[(0, -m)] = np.array([np.conj(lam), 0.0])
        return cls(dimension=2, coeffs=coeffs)

    @classmethod
    def random_incompressible(cls, dimension: int, K: int, seed=None) -> "VectorFieldFourier":
        """Random real divergence-free field truncated at |k|_inf <= K."""
        rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else np.random.default_rng(seed)
        )
        coeffs: Dict[Tuple[int, ...], np.ndarray] = {}
        coeffs[(0,) * dimension] = rng.normal(size=dimension).astype(complex)
        for k in product(range(-K, K + 1), repeat=dimension):
            if all(ki == 0 for ki in k) or k in coeffs:
                continue
            kv = np.asarray(k, dtype=float)
            lam = rng.normal(size=dimension) + 1j * rng.normal(size=dimension)
            lam -= kv * (kv @ lam) / (kv @ kv)  # project out the divergence
            lam /= 1.0 + (kv @ kv)  # decay with |k|
            coeffs[k] = lam
            coeffs[tuple(-ki for ki in k)] = np.conj(lam)
        return cls(dimension=dimension, coeffs=coeffs)


@dataclass
class PerturbationResult:
    alpha1: float
    alpha2: float
    H_approx: float
    truncation_K: int
    diophantine_margin: float


def diophantine_check(p: np.ndarray, K: int, beta: float, C: float) -> tuple:
    """Finite verification of |p.k| >= C/|k|^beta over 0 < |k| <= K.

    Returns (ok, margin) with margin = min |p.k| |k|^beta; ok also fails
    when some wavevector is exactly orthogonal to p (rational direction).
    """
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise ValueError("p must be a unit vector")
    n = len(p)
    margin = math.inf
    for k in product(range(-K, K + 1), repeat=n):
        if all(ki == 0 for ki in k):
            continue
        kv = np.asarray(k, dtype=float)
        norm = np.linalg.norm(kv)
        if norm > K:
            continue
        margin = min(margin, abs(float(p @ kv)) * norm**beta)
    return bool(margin >= C), float(margin)


def effective_speed_expansion(
    V: VectorFieldFourier,
    p: np.ndarray,
    d: float,
    delta: float,
    beta: float = 2.0,
) -> PerturbationResult:
    """First and second order coefficients of the weak-flow expansion.

    p must be a unit vector (the expansion is stated for unit directions;
    rescale the field and momentum before calling for other magnitudes).
    d = 0 is rejected: wavevectors orthogonal to p make the second-order
    denominator vanish exactly at d = 0 and nowhere else.
    """
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise ValueError(
            "p must be a unit vector; rescale (p, V, delta) before expanding"
        )
    if d <= 0:
        raise ValueError("d must be positive in the expansion")
    V.validate()
    lam0 = V.coeffs.get((0,) * V.dimension)
    alpha1 = float(p @ lam0.real) if lam0 is not None else 0.0
    terms = []
    for k, lam in V.coeffs.items():
        if all(ki == 0 for ki in k):
            continue
        kv = np.asarray(k, dtype=float)
        pk = float(p @ kv)
        plam = complex(p @ lam)
        num = (abs(plam) ** 2) * float(kv @ kv)
        if num == 0.0:
            continue
        den = d * d * (float(kv @ kv) - pk * pk) ** 2 * 4 * math.pi**2 + pk * pk
        terms.append(((tuple(k)), num / den))
    # deterministic, order-independent accumulation
    terms.sort(key=lambda t: t[0])
    alpha2 = 0.5 * math.fsum(t[1] for t in terms)
    margin = math.inf
    if V.coeffs:
        K = V.truncation
        if K > 0:
            _, margin = diophantine_check(p, K, beta, 0.0)
    return PerturbationResult(
        alpha1=alpha1,
        alpha2=float(alpha2),
        H_approx=float(1.0 + delta * alpha1 + delta * delta * alpha2),
        truncation_K=V.truncation,
        diophantine_margin=float(margin),
    )


def cross_check_shear(
    spec: FlowSpec,
    p: np.ndarray,
    d: float,
    delta: float,
    grid_n: Optional[int] = None,
    tol: Optional[float] = None,
) -> tuple:
    """Solver-vs-expansion comparison on a weak shear flow.

    Solves the cell problem with the flow delta*v and compares with
    |p| + delta a1 + delta^2 a2.  Returns (H_solver, H_expansion, error);
    the error should shrink like delta^3.
    """
    from .cell import turbulent_flame_speed
    from .flows import FlowSpec as FS
    from .flows import Momentum, build_flow

    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise ValueError("p must be a unit vector for the cross check")
    gamma, mu = float(p[0]), float(p[1])
    if gamma == 0.0:
        raise ValueError("cross check needs gamma != 0")
    field2d = VectorFieldFourier.from_shear(spec)
    exp = effective_speed_expansion(field2d, p, d, delta)
    scaled = FS(
        cos=tuple(delta * a for a in spec.cos),
        sin=tuple(delta * b for b in spec.sin),
        offset=delta * spec.offset,
    )
    H_solver, _ = turbulent_flame_speed(
        build_flow(scaled), Momentum(gamma, mu), d, grid_n=grid_n, tol=tol
    )
    return float(H_solver), exp.H_approx, float(abs(H_solver - exp.H_approx))


def parse_field_file(path, dimension: Optional[int] = None) -> VectorFieldFourier:
    """Read Fourier data lines: k1 .. kn  re(l1) im(l1) .. re(ln) im(ln)."""
    coeffs: Dict[Tuple[int, ...], np.ndarray] = {}
    dim = dimension
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if dim is None:
                # n integers followed by 2n floats -> 3n fields
                if len(parts) % 3:
                    raise ValueError(f"malformed field line: {raw!r}")
                dim = len(parts) // 3
            if len(parts) != 3 * dim:
                raise ValueError(f"expected {3*dim} entries per line, got {len(parts)}")
            k = tuple(int(q) for q in parts[:dim])
            vals = [float(q) for q in parts[dim:]]
            lam = np.array(
                [complex(vals[2 * i], vals[2 * i + 1]) for i in range(dim)]
            )
            coeffs[k] = lam
    if dim is None:
        raise ValueError("empty field file")
    return VectorFieldFourier(dimension=dim, coeffs=coeffs)
