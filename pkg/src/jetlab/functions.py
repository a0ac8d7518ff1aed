"""Closed-form jets: the Cantor function, a one-sided mollifier, and the
fields whose boundary behavior the certificates exercise.

Evaluators are vectorized over point arrays of shape (..., dim).  The
certificate paths also need exact scalar values at awkward rationals such as
3^-n, so the Cantor function walks ternary digits in exact arithmetic and the
scalar entry points accept Fraction coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import domains
from .domains import DomainSpec
from .errors import PointOutsideRegionError
from .grid import GridMask, SampledJet, multi_indices

DEFAULT_PHI_DEPTH = 60

# Below this t the mollifier value underflows to zero anyway and the inverse
# powers would overflow, so everything is clamped to exact zero.
_MOLL_CUTOFF = 1.0 / 745.0


def cantor_phi(s, depth: int = DEFAULT_PHI_DEPTH) -> float:
    """Cantor-Lebesgue function by the ternary-to-binary digit map.

    Exact once a ternary digit 1 appears or the expansion terminates; after
    depth digits the remainder is truncated, an error of at most 2^-depth.
    Accepts float, int, or Fraction.
    """
    if s <= 0:
        return 0.0
    if s >= 1:
        return 1.0
    x = Fraction(s)
    value = Fraction(0)
    weight = Fraction(1, 2)
    for _ in range(depth):
        x *= 3
        digit = int(x)
        x -= digit
        if digit == 1:
            value += weight
            break
        if digit == 2:
            value += weight
        weight /= 2
        if x == 0:
            break
    return float(value)


def cantor_phi_array(values, depth: int = DEFAULT_PHI_DEPTH) -> np.ndarray:
    """Vectorized Cantor function; memoized over the distinct inputs."""
    vals = np.asarray(values, dtype=np.float64)
    uniq, inverse = np.unique(vals, return_inverse=True)
    table = np.array([cantor_phi(v, depth) for v in uniq], dtype=np.float64)
    return table[inverse].reshape(vals.shape)


# f(t) = exp(-1/t) for t > 0, continued by zero.  f^(k)(t) = f(t) * p_k(1/t).
_MOLL_POLYS = (
    ((0, 1.0),),
    ((2, 1.0),),
    ((4, 1.0), (3, -2.0)),
    ((6, 1.0), (5, -6.0), (4, 6.0)),
)


def mollifier_derivs(t, order: int) -> list[np.ndarray]:
    """Derivatives 0..order of exp(-1/t) (zero for t <= 0); order <= 3."""
    if order > 3:
        raise ValueError("mollifier derivatives implemented to order 3")
    t = np.asarray(t, dtype=np.float64)
    active = t > _MOLL_CUTOFF
    u = np.where(active, 1.0 / np.where(active, t, 1.0), 0.0)
    f = np.where(active, np.exp(-u), 0.0)
    out = []
    for k in range(order + 1):
        poly = np.zeros_like(t)
        for power, coeff in _MOLL_POLYS[k]:
            poly += coeff * u**power
        out.append(f * poly)
    return out


def mollifier(t: float) -> tuple[float, float]:
    """Value and first derivative of exp(-1/t), zero-continued at t <= 0."""
    val, der = mollifier_derivs(np.float64(t), 1)
    return float(val), float(der)


@dataclass(eq=False)
class AnalyticJet:
    """A field with closed-form partials, optionally tied to a region.

    evaluator(points, alpha) consumes an (..., dim) array and returns the
    alpha-partial at each point.  member(points), when present, is the exact
    region predicate; scalar evaluation outside it raises.
    """

    name: str
    order: int
    dim: int
    region: DomainSpec | None
    evaluator: Callable[[np.ndarray, tuple[int, ...]], np.ndarray]
    member: Callable[[np.ndarray], np.ndarray] | None = None

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if self.member is None:
            return np.ones(pts.shape[:-1], dtype=bool)
        return self.member(pts)

    def partial_many(self, points, alpha) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return np.asarray(self.evaluator(pts, tuple(alpha)), dtype=np.float64)

    def partial(self, point, alpha) -> float:
        pts = np.asarray(point, dtype=np.float64).reshape(1, self.dim)
        if self.member is not None and not bool(self.contains(pts)[0]):
            raise PointOutsideRegionError(
                f"{self.name} is not defined at {tuple(np.ravel(point))}"
            )
        return float(self.partial_many(pts, alpha)[0])

    def value(self, point) -> float:
        return self.partial(point, (0,) * self.dim)

    def sample(self, mask: GridMask, order: int | None = None) -> SampledJet:
        """Evaluate every component on the masked lattice points."""
        order = self.order if order is None else order
        if order > self.order:
            raise ValueError(f"{self.name} offers order {self.order} only")
        pts = mask.points()
        if self.member is not None and not bool(self.contains(pts).all()):
            bad = pts[~self.contains(pts)][0]
            raise PointOutsideRegionError(
                f"mask point {tuple(bad)} lies outside the region of {self.name}"
            )
        idx = np.nonzero(mask.member)
        components = {}
        for alpha in multi_indices(order, mask.grid.dim):
            arr = np.zeros(mask.grid.extents, dtype=np.float64)
            arr[idx] = self.partial_many(pts, alpha)
            components[alpha] = arr
        return SampledJet(order, mask.grid, mask, components)


def _falling(p: int, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


def polynomial_jet(name: str, terms: dict[tuple[int, ...], float], order: int,
                   dim: int = 2) -> AnalyticJet:
    """Jet of a polynomial given as {exponent tuple: coefficient}."""

    def evaluator(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        out = np.zeros(pts.shape[:-1], dtype=np.float64)
        for powers, coeff in terms.items():
            factor = coeff
            ok = True
            for a, p in zip(alpha, powers):
                if a > p:
                    ok = False
                    break
                factor *= _falling(p, a)
            if not ok:
                continue
            term = np.full(pts.shape[:-1], factor, dtype=np.float64)
            for axis, (a, p) in enumerate(zip(alpha, powers)):
                if p - a > 0:
                    term = term * pts[..., axis] ** (p - a)
            out += term
        return out

    return AnalyticJet(name, order, dim, None, evaluator)


def chi_jet(order: int = 1) -> AnalyticJet:
    """chi(s, t) = s t^2, the comb field's template."""
    return polynomial_jet("chi", {(1, 2): 1.0}, order)


def sum_st_jet(order: int = 1) -> AnalyticJet:
    return polynomial_jet("sum_st", {(1, 0): 1.0, (0, 1): 1.0}, order)


def sin_cos_jet(order: int = 3) -> AnalyticJet:
    """sin(s) cos(t) with partials of any requested order."""

    def evaluator(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        s = pts[..., 0]
        t = pts[..., 1]
        a, b = alpha
        s_cycle = (np.sin, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))
        t_cycle = (np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v), np.sin)
        return s_cycle[a % 4](s) * t_cycle[b % 4](t)

    return AnalyticJet("sin_cos", order, 2, None, evaluator)


def exp1d_jet(order: int = 3) -> AnalyticJet:
    """exp(s) on the line; every partial is exp itself."""

    def evaluator(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        return np.exp(pts[..., 0])

    return AnalyticJet("exp1d", order, 1, None, evaluator)


def _example3_eval(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
    """Comb field: chi(s, t) on the base, its shifted copy on each tooth."""
    s = pts[..., 0]
    t = pts[..., 1]
    a, b = alpha
    in_base = domains.comb_in_base(s, t)
    tooth_band = (s > 0.0) & (t > 0.0) & (t <= 1.0)
    tooth = domains.comb_tooth_index_array(np.where(tooth_band, s, -1.0))
    on_tooth = tooth_band & (tooth >= 0)
    # shifted abscissa: s on the base, s - a_n on tooth n
    n_safe = np.where(on_tooth, tooth, 0).astype(np.int32)
    shift = np.where(on_tooth, np.ldexp(0.75, -n_safe), 0.0)
    sloc = np.where(on_tooth, s - shift, s)
    region = in_base | on_tooth
    if a == 0 and b == 0:
        vals = sloc * t * t
    elif a == 1 and b == 0:
        vals = t * t
    elif a == 0 and b == 1:
        vals = 2.0 * sloc * t
    elif a == 1 and b == 1:
        vals = 2.0 * t
    elif a == 0 and b == 2:
        vals = 2.0 * sloc
    else:
        vals = np.zeros_like(sloc)
    return np.where(region, vals, 0.0)


def example3_jet(order: int = 1, n_teeth: int | None = None) -> AnalyticJet:
    """The comb counterexample field as an order-1 jet (order 2 available)."""
    if order > 2:
        raise ValueError("comb field jets are available to order 2")

    def member(pts: np.ndarray) -> np.ndarray:
        s = pts[..., 0]
        t = pts[..., 1]
        tooth_band = (s > 0.0) & (t > 0.0) & (t <= 1.0)
        tooth = domains.comb_tooth_index_array(np.where(tooth_band, s, -1.0))
        on_tooth = tooth_band & (tooth >= 0)
        if n_teeth is not None:
            on_tooth &= tooth <= n_teeth
        return domains.comb_in_base(s, t) | on_tooth

    region = domains.comb(n_teeth) if n_teeth is not None else None
    return AnalyticJet("example3", order, 2, region, _example3_eval, member)


def example3_value(s: float, t: float, alpha=(0, 0)) -> float:
    """Scalar comb field; exact for dyadic inputs."""
    pts = np.array([[s, t]], dtype=np.float64)
    return float(_example3_eval(pts, tuple(alpha))[0])


def _gap_segment_index_array(s: np.ndarray) -> np.ndarray:
    out = np.full(s.shape, -1, dtype=np.int64)
    out = np.where((s >= -1.0) & (s <= 0.0), 0, out)
    pos = (s > 0.0) & (s <= 0.75)
    if pos.any():
        sp = np.where(pos, s, 1.0)
        guess = np.floor(-np.log2(sp)).astype(np.int64)
        for offset in (0, 1):
            n = guess + offset
            valid = pos & (n >= 1) & (out < 0)
            n_safe = np.where(n >= 1, n, 1).astype(np.int32)
            s_n = np.ldexp(1.0, -n_safe)
            hit = valid & (s_n <= sp) & (sp <= 1.5 * s_n)
            out = np.where(hit, n, out)
    return out


def _gap1d_eval(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
    s = pts[..., 0]
    seg = _gap_segment_index_array(s)
    inside = seg >= 0
    (a,) = alpha
    if a == 0:
        n_safe = np.where(seg > 0, seg, 1).astype(np.int32)
        shift = np.where(seg > 0, np.ldexp(1.0, -n_safe), 0.0)
        vals = s - shift
    elif a == 1:
        vals = np.ones_like(s)
    else:
        vals = np.zeros_like(s)
    return np.where(inside, vals, 0.0)


def gap1d_jet(order: int = 1, n_segments: int | None = None) -> AnalyticJet:
    """Identity-slope staircase on [-1, 0] and the islands [2^-n, (3/2)2^-n]."""

    def member(pts: np.ndarray) -> np.ndarray:
        seg = _gap_segment_index_array(pts[..., 0])
        ok = seg >= 0
        if n_segments is not None:
            ok &= seg <= n_segments
        return ok

    region = domains.gap_intervals(n_segments) if n_segments is not None else None
    return AnalyticJet("gap1d", order, 1, region, _gap1d_eval, member)


def gap1d_value(s: float, alpha=(0,)) -> float:
    pts = np.array([[s]], dtype=np.float64)
    return float(_gap1d_eval(pts, tuple(alpha))[0])


def _example1_eval_factory(phi_depth: int):
    def evaluator(pts: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        s = pts[..., 0]
        t = pts[..., 1]
        a, b = alpha
        out = np.zeros(pts.shape[:-1], dtype=np.float64)
        if a >= 1:
            # every s-partial vanishes off the slit columns
            return out
        block = (s > 0.0) & (s <= 1.0) & (t > 0.0) & (t <= 1.0)
        if block.any():
            phi = cantor_phi_array(s[block], phi_depth)
            f = mollifier_derivs(t[block], b)[b]
            out[block] = phi * f
        return out

    return evaluator


def example1_jet(
    order: int = 1, depth: int = 4, phi_depth: int = DEFAULT_PHI_DEPTH
) -> AnalyticJet:
    """Slit-square field phi(s) exp(-1/t) on the open square minus the slits.

    Defined (with all partials) on the open set only; the slit columns of the
    level-depth cover are excluded by the membership predicate.
    """
    if order > 3:
        raise ValueError("t-derivatives of the mollifier stop at order 3")
    approx = domains.cantor_level(depth)

    def member(pts: np.ndarray) -> np.ndarray:
        s = pts[..., 0]
        t = pts[..., 1]
        open_square = (np.abs(s) < 1.0) & (np.abs(t) < 1.0)
        uniq, inverse = np.unique(s, return_inverse=True)
        in_cover = np.array([approx.contains(v) for v in uniq], dtype=bool)
        slit = in_cover[inverse].reshape(s.shape) & (t >= 0.0) & (t <= 1.0)
        return open_square & ~slit

    return AnalyticJet(
        "example1",
        order,
        2,
        domains.cantor_slit_square(depth),
        _example1_eval_factory(phi_depth),
        member,
    )


def example1_xbar(s, t, t_order: int = 0, phi_depth: int = DEFAULT_PHI_DEPTH) -> float:
    """The continuous closure extension of the slit-square field on Q.

    Exact-rational friendly: s may be a Fraction (needed at s = 3^-n where
    float rounding would disturb the ternary digits).  t_order selects a
    t-partial, 0..3.
    """
    if not (-1 <= s <= 1 and -1 <= t <= 1):
        raise PointOutsideRegionError(f"({s}, {t}) is outside the closed square")
    if not (0 < s <= 1 and 0 < t <= 1):
        return 0.0
    phi = cantor_phi(s, phi_depth)
    f = float(mollifier_derivs(np.float64(t), t_order)[t_order])
    return phi * f


_REGISTRY = {
    "example1": lambda order=1, depth=4: example1_jet(order=order, depth=depth),
    "example3": lambda order=1, **_: example3_jet(order=order),
    "gap1d": lambda order=1, **_: gap1d_jet(order=order),
    "chi": lambda order=1, **_: chi_jet(order=order),
    "sum_st": lambda order=1, **_: sum_st_jet(order=order),
    "sin_cos": lambda order=1, **_: sin_cos_jet(order=max(order, 3)),
    "exp1d": lambda order=1, **_: exp1d_jet(order=max(order, 3)),
}


def get_function(name: str, order: int = 1, depth: int = 4) -> AnalyticJet:
    """CLI-addressable field lookup."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown function {name!r}; choices: {sorted(_REGISTRY)}")
    return _REGISTRY[name](order=order, depth=depth)


def function_names() -> list[str]:
    return sorted(_REGISTRY)
