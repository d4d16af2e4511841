"""Periodic shear profiles and the canonical form of the cell problem.

A shear flow here is a smooth 1-periodic scalar profile v(y) stored as a
truncated Fourier series, so v' and v'' are exact.  `normalize` rewrites a
problem (gamma, mu, v) into the canonical form the solvers expect:
gamma > 0, mu >= 0 and max v = 0, recording the bookkeeping needed to map
the effective speed and the fluctuation profile back.

The three identities used by `normalize` (each verified end-to-end through
the solver in the test suite):

* flipping the sign of gamma together with the flow leaves the problem
  unchanged, with the same fluctuation:  Hd((-g, mu); -v) = Hd((g, mu); v);
* reflecting y -> -y flips the sign of mu: Hd((g, -mu); v(-.)) = Hd((g, mu); v),
  with w(y) -> w(-y);
* adding a constant c to the flow adds gamma*c to the effective speed and
  leaves the fluctuation unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MAX_MEMBERSHIP_TOL = 1e-10
CURVATURE_DISTINCT_RTOL = 1e-6
_SCAN_POINTS = 4096


@dataclass(frozen=True)
class FlowSpec:
    """Truncated Fourier data for v(y) = offset + sum_k a_k cos(2 pi k y) + b_k sin(2 pi k y).

    `cos[k-1]` is the coefficient of cos(2 pi k y); likewise for `sin`.
    """

    cos: tuple = ()
    sin: tuple = ()
    offset: float = 0.0
    preset_name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "cos", tuple(float(a) for a in self.cos))
        object.__setattr__(self, "sin", tuple(float(b) for b in self.sin))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def is_constant(self) -> bool:
        return all(a == 0.0 for a in self.cos) and all(b == 0.0 for b in self.sin)

    def _harmonics(self):
        kmax = max(len(self.cos), len(self.sin))
        a = np.zeros(kmax)
        b = np.zeros(kmax)
        a[: len(self.cos)] = self.cos
        b[: len(self.sin)] = self.sin
        return np.arange(1, kmax + 1), a, b

    def value(self, y):
        y = np.asarray(y, dtype=float)
        out = np.full_like(y, self.offset, dtype=float)
        if not self.is_constant:
            k, a, b = self._harmonics()
            ang = 2 * np.pi * np.multiply.outer(y, k)
            out = out + np.cos(ang) @ a + np.sin(ang) @ b
        return out if out.ndim else float(out)

    def derivative(self, y, order: int = 1):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y, dtype=float)
        if not self.is_constant:
            k, a, b = self._harmonics()
            w = 2 * np.pi * k
            ang = 2 * np.pi * np.multiply.outer(y, k)
            # d/dy rotates (cos, sin) -> (-w sin, w cos)
            ca = np.stack([a, b])
            for _ in range(order):
                ca = np.stack([w * ca[1], -w * ca[0]])
            out = out + np.cos(ang) @ ca[0] + np.sin(ang) @ ca[1]
        return out if out.ndim else float(out)

    def negated(self) -> "FlowSpec":
        return FlowSpec(
            cos=tuple(-a for a in self.cos),
            sin=tuple(-b for b in self.sin),
            offset=-self.offset,
        )

    def reflected(self) -> "FlowSpec":
        """Spec of y -> v(-y)."""
        return FlowSpec(
            cos=self.cos,
            sin=tuple(-b for b in self.sin),
            offset=self.offset,
        )

    def shifted(self, c: float) -> "FlowSpec":
        return replace(self, offset=self.offset + float(c))


PRESETS = {
    # single global maximum at y = 0 with -v'' = 4 pi^2
    "single-well": FlowSpec(cos=(1.0,), offset=-1.0, preset_name="single-well"),
    # v = -sin^2(2 pi y) (1 + cos(2 pi y)/2): maxima at {0, 1/2} with
    # -v'' = 12 pi^2 and 4 pi^2, so the flat one (1/2) wins selection
    "two-max-distinct": FlowSpec(
        cos=(-0.125, 0.5, 0.125), offset=-0.5, preset_name="two-max-distinct"
    ),
    # v = -sin^2(2 pi y): maxima at {0, 1/2} with equal curvature 8 pi^2
    "two-max-tied": FlowSpec(cos=(0.0, 0.5), offset=-0.5, preset_name="two-max-tied"),
}


def preset_flow(name: str) -> "FlowProfile":
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return build_flow(PRESETS[name])


@dataclass
class FlowProfile:
    """A flow spec together with its summary statistics and evaluators."""

    spec: FlowSpec
    mean: float
    max_value: float
    min_value: float

    def value(self, y):
        return self.spec.value(y)

    def derivative(self, y):
        return self.spec.derivative(y, 1)

    def second_derivative(self, y):
        return self.spec.derivative(y, 2)

    @property
    def is_constant(self) -> bool:
        return self.spec.is_constant


@dataclass(frozen=True)
class MaximaSet:
    """Global maximum points of a flow over one period with their curvatures."""

    points: tuple
    neg_curvatures: tuple
    is_finite: bool
    curvatures_distinct: bool
    distinctness_margin: float

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Momentum:
    gamma: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "mu", float(self.mu))
        if self.gamma == 0.0 and self.mu == 0.0:
            raise ValueError("momentum (0, 0) is not admissible")

    @property
    def norm(self) -> float:
        return float(np.hypot(self.gamma, self.mu))


def build_flow(spec: FlowSpec) -> FlowProfile:
    """Compute mean/max/min of the series by dense scan plus Newton refinement."""
    if spec.is_constant:
        c = spec.offset
        return FlowProfile(spec=spec, mean=c, max_value=c, min_value=c)
    ys = np.arange(_SCAN_POINTS) / _SCAN_POINTS
    vals = spec.value(ys)
    vmax = _refine_extremum(spec, ys[int(np.argmax(vals))], sign=+1)
    vmin = _refine_extremum(spec, ys[int(np.argmin(vals))], sign=-1)
    return FlowProfile(spec=spec, mean=spec.offset, max_value=vmax, min_value=vmin)


def _refine_extremum(spec: FlowSpec, y0: float, sign: int) -> float:
    """Polish one extremum of the series with safeguarded Newton on v'."""
    y = y0
    for _ in range(60):
        d1 = spec.derivative(y, 1)
        d2 = spec.derivative(y, 2)
        if d2 == 0.0:
            break
        step = d1 / d2
        if abs(step) > 1.0 / _SCAN_POINTS:
            step = np.sign(step) / _SCAN_POINTS
        y -= step
        if abs(step) < 1e-15:
            break
    cand = spec.value(y)
    # Newton may have walked to a saddle of the wrong kind; keep the better value
    return float(max(sign * cand, sign * spec.value(y0)) * sign)


def locate_maxima(flow: FlowProfile, tol: float = MAX_MEMBERSHIP_TOL) -> MaximaSet:
    """All global maxima of v in [0, 1) with -v'' values and structure flags.

    A maximum with |v''| below tolerance is reported with is_finite = False
    (an interval of maxima, or a degenerate one): callers that rely on
    quadratic behaviour near the maxima must refuse such flows.
    """
    if flow.is_constant:
        raise ValueError("locate_maxima requires a non-constant flow")
    spec = flow.spec
    ys = np.arange(_SCAN_POINTS) / _SCAN_POINTS
    vals = spec.value(ys)
    near = ys[vals >= flow.max_value - max(tol, 1e-9)]
    points = []
    for y0 in near:
        y = _polish_max_location(spec, y0)
        if abs(spec.value(y) - flow.max_value) > tol or abs(spec.derivative(y)) > 1e-8:
            continue
        y = y % 1.0
        if not any(_circ_dist(y, q) < 1e-7 for q in points):
            points.append(y)
    points.sort()
    negc = [-spec.derivative(y, 2) for y in points]
    degenerate = any(c < 1e-8 for c in negc)
    margin = np.inf
    if len(negc) > 1:
        arr = np.sort(negc)
        scale = max(abs(arr[-1]), 1.0)
        margin = float(np.min(np.diff(arr)) / scale)
    distinct = (not degenerate) and (margin > CURVATURE_DISTINCT_RTOL)
    return MaximaSet(
        points=tuple(float(p) for p in points),
        neg_curvatures=tuple(float(c) for c in negc),
        is_finite=not degenerate,
        curvatures_distinct=distinct,
        distinctness_margin=float(margin if np.isfinite(margin) else np.inf),
    )


def _polish_max_location(spec: FlowSpec, y0: float) -> float:
    y = y0
    for _ in range(80):
        d1 = spec.derivative(y, 1)
        d2 = spec.derivative(y, 2)
        if d2 >= -1e-14:
            break
        step = d1 / d2
        y -= step
        if abs(step) < 1e-16:
            break
    return y


def _circ_dist(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class NormalizedProblem:
    """Canonical cell-problem instance: gamma > 0, mu >= 0, max v = 0.

    `flow` already includes the flip/reflection/shift; `c_shift` is the
    constant removed from the (possibly sign-flipped) flow, so for any
    Markstein number the original effective speed is

        H_original = H_normalized + gamma * c_shift.
    """

    flow: FlowProfile
    gamma: float
    mu: float
    gamma_flipped: bool
    reflected: bool
    c_shift: float
    original_flow: FlowProfile
    original_momentum: Momentum

    @property
    def momentum(self) -> Momentum:
        return Momentum(self.gamma, self.mu)

    @property
    def mean_ratio(self) -> float:
        """Prescribed mean of phi = (mu + w')/gamma."""
        return self.mu / self.gamma

    def h_original(self, h_normalized: float) -> float:
        return h_normalized + self.gamma * self.c_shift

    def h_normalized(self, h_original: float) -> float:
        return h_original - self.gamma * self.c_shift

    def map_position_back(self, x):
        """Original-frame position of a normalized-frame coordinate."""
        x = np.asarray(x, dtype=float)
        out = (-x) % 1.0 if self.reflected else x % 1.0
        return out if out.ndim else float(out)

    def map_profile_back(self, x: np.ndarray, w: np.ndarray):
        """Original-frame (x, w) samples of a normalized-frame fluctuation.

        Only the reflection changes the profile; the flip keeps w and the
        shift only moves the eigenvalue.
        """
        if not self.reflected:
            return x, w
        xs = (-np.asarray(x)) % 1.0
        order = np.argsort(xs)
        return xs[order], np.asarray(w)[order]

    @property
    def is_canonical_input(self) -> bool:
        return not (self.gamma_flipped or self.reflected) and self.c_shift == 0.0


def normalize(flow: FlowProfile, p: Momentum) -> NormalizedProblem:
    """Rewrite (flow, p) with gamma > 0, mu >= 0 and max v = 0.

    gamma = 0 has no phi-form and is special-cased by the callers
    (the effective speed is |mu| exactly); it is rejected here.
    """
    if p.gamma == 0.0:
        raise ValueError("normalize requires gamma != 0; use the degenerate path")
    flipped = p.gamma < 0
    spec = flow.spec.negated() if flipped else flow.spec
    gamma = abs(p.gamma)
    mu = p.mu
    reflected = mu < 0
    if reflected:
        spec = spec.reflected()
        mu = -mu
    pre = build_flow(spec)
    c_shift = pre.max_value
    shifted = build_flow(spec.shifted(-c_shift))
    return NormalizedProblem(
        flow=shifted,
        gamma=gamma,
        mu=mu,
        gamma_flipped=flipped,
        reflected=reflected,
        c_shift=c_shift,
        original_flow=flow,
        original_momentum=p,
    )


def flow_from_config(data: dict) -> FlowProfile:
    """Build a flow from a parsed config mapping (`preset` or cos/sin/offset)."""
    if "preset" in data:
        return preset_flow(str(data["preset"]))
    spec = FlowSpec(
        cos=tuple(data.get("cos", ())),
        sin=tuple(data.get("sin", ())),
        offset=float(data.get("offset", 0.0)),
    )
    return build_flow(spec)
