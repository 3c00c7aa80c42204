"""Cusum diagrams, convex minorants / concave majorants and step functions.

The minorant and majorant are computed with a single left-to-right stack pass
over the diagram points.  The quadratic maxmin formula and pool-adjacent
violators are kept as independent checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

SLOPE_TIE_TOL = 1e-12

RIGHT_CONTINUOUS = "right"
LEFT_CONTINUOUS = "left"


@dataclass(frozen=True)
class CusumDiagram:
    """Points ``(xs[j], ys[j])``, ``j = 0..m``, starting at the origin point.

    Parameters
    ----------
    xs : array-like of shape (m + 1,)
        Strictly increasing abscissae.
    ys : array-like of shape (m + 1,)
        Ordinates with ``ys[0] == 0``.
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ValidationError("xs and ys must be 1-d arrays of equal length")
        if len(xs) < 2:
            raise ValidationError("a diagram needs the origin and at least one point")
        if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
            raise ValidationError("diagram coordinates must be finite")
        if np.any(np.diff(xs) <= 0):
            raise ValidationError("diagram abscissae must be strictly increasing")
        if ys[0] != 0:
            raise ValidationError("diagram must start at ordinate 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def m(self):
        return len(self.xs) - 1

    @classmethod
    def from_increments(cls, dx, dy, x0=0.0):
        """Build a diagram from abscissa and ordinate increments."""
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        xs = np.concatenate(([x0], x0 + np.cumsum(dx)))
        ys = np.concatenate(([0.0], np.cumsum(dy)))
        return cls(xs, ys)

    def chord_slopes(self):
        return np.diff(self.ys) / np.diff(self.xs)


def _hull_vertices(xs, ys, lower):
    # indices of the lower (convex) or upper (concave) hull, left to right
    xl = xs.tolist()
    yl = ys.tolist() if lower else (-ys).tolist()
    stack = [0]
    for j in range(1, len(xl)):
        xj, yj = xl[j], yl[j]
        while len(stack) >= 2:
            i1 = stack[-1]
            i0 = stack[-2]
            s_prev = (yl[i1] - yl[i0]) / (xl[i1] - xl[i0])
            s_new = (yj - yl[i1]) / (xj - xl[i1])
            scale = max(1.0, abs(s_prev), abs(s_new))
            if s_prev >= s_new - SLOPE_TIE_TOL * scale:
                stack.pop()
            else:
                break
        stack.append(j)
    return np.asarray(stack)


def hull_vertices(diagram, lower=True):
    """Indices of the diagram points touched by the minorant (or majorant)."""
    return _hull_vertices(diagram.xs, diagram.ys, lower)


def _slopes_from_vertices(xs, ys, vertices):
    seg = np.diff(ys[vertices]) / np.diff(xs[vertices])
    return np.repeat(seg, np.diff(vertices))


def gcm_left_slopes(diagram):
    """Left derivative of the greatest convex minorant at ``xs[1:]``.

    Returns an array of length ``m``; entry ``i - 1`` is the slope of the
    minorant on ``(xs[i-1], xs[i]]``.
    """
    vertices = _hull_vertices(diagram.xs, diagram.ys, lower=True)
    slopes = _slopes_from_vertices(diagram.xs, diagram.ys, vertices)
    assert np.all(np.diff(slopes) >= -1e-9 * max(1.0, np.abs(slopes).max()))
    return slopes


def lcm_left_slopes(diagram):
    """Left derivative of the least concave majorant at ``xs[1:]`` (nonincreasing)."""
    vertices = _hull_vertices(diagram.xs, diagram.ys, lower=False)
    slopes = _slopes_from_vertices(diagram.xs, diagram.ys, vertices)
    assert np.all(np.diff(slopes) <= 1e-9 * max(1.0, np.abs(slopes).max()))
    return slopes


def minorant_values(diagram):
    """Ordinates of the convex minorant at every diagram abscissa."""
    vertices = _hull_vertices(diagram.xs, diagram.ys, lower=True)
    return np.interp(diagram.xs, diagram.xs[vertices], diagram.ys[vertices])


def majorant_values(diagram):
    vertices = _hull_vertices(diagram.xs, diagram.ys, lower=False)
    return np.interp(diagram.xs, diagram.xs[vertices], diagram.ys[vertices])


def maxmin_slope(diagram, index):
    """Max over ``k <= index`` of min over ``i >= index`` of chord slopes.

    ``(ys[i] - ys[k-1]) / (xs[i] - xs[k-1])``.  Equals the GCM left slope at
    ``index``; quadratic cost, intended as a cross-check.
    """
    m = diagram.m
    if not 1 <= index <= m:
        raise DomainError(f"index must lie in 1..{m}, got {index}")
    xs, ys = diagram.xs, diagram.ys
    left = np.arange(0, index)
    right = np.arange(index, m + 1)
    chords = (ys[right][None, :] - ys[left][:, None]) / (xs[right][None, :] - xs[left][:, None])
    return float(chords.min(axis=1).max())


def minmax_slope(diagram, index):
    """Min over ``k <= index`` of max over ``i >= index``: the LCM left slope."""
    m = diagram.m
    if not 1 <= index <= m:
        raise DomainError(f"index must lie in 1..{m}, got {index}")
    xs, ys = diagram.xs, diagram.ys
    left = np.arange(0, index)
    right = np.arange(index, m + 1)
    chords = (ys[right][None, :] - ys[left][:, None]) / (xs[right][None, :] - xs[left][:, None])
    return float(chords.max(axis=1).min())


def pava(values, weights, increasing=True):
    """Weighted isotonic regression by pooling adjacent violators.

    Applied to the chord slopes of a diagram with weights ``diff(xs)`` this
    reproduces :func:`gcm_left_slopes` (``increasing=True``) or
    :func:`lcm_left_slopes`.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    sign = 1.0 if increasing else -1.0
    means, wts, sizes = [], [], []
    for v, w in zip(sign * values, weights):
        means.append(v)
        wts.append(w)
        sizes.append(1)
        while len(means) > 1 and means[-2] >= means[-1]:
            w_new = wts[-2] + wts[-1]
            m_new = (means[-2] * wts[-2] + means[-1] * wts[-1]) / w_new
            s_new = sizes[-2] + sizes[-1]
            del means[-1], wts[-1], sizes[-1]
            means[-1], wts[-1], sizes[-1] = m_new, w_new, s_new
    return sign * np.repeat(means, sizes)


def blocks(values, tol=0.0):
    """Maximal runs of equal values as a list of ``(start, stop)`` index pairs."""
    values = np.asarray(values)
    if len(values) == 0:
        return []
    breaks = np.flatnonzero(np.abs(np.diff(values)) > tol) + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [len(values)]))
    return list(zip(starts.tolist(), stops.tolist()))


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant monotone function.

    ``RIGHT_CONTINUOUS`` functions (distribution functions) take ``values[k]``
    on ``[knots[k], knots[k+1])``, ``before`` to the left of the first knot and
    the last value after the last knot.

    ``LEFT_CONTINUOUS`` functions (densities) take ``values[k]`` on
    ``(knots[k-1], knots[k]]`` with ``knots[-1] := lower``, and are 0 outside
    ``(lower, knots[-1]]``.
    """

    knots: np.ndarray
    values: np.ndarray
    continuity: str = RIGHT_CONTINUOUS
    increasing: bool = True
    lower: float = 0.0
    domain: tuple = (-np.inf, np.inf)
    before: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or len(knots) == 0:
            raise ValidationError("knots and values must be non-empty 1-d arrays of equal length")
        if np.any(np.diff(knots) <= 0):
            raise ValidationError("knots must be strictly increasing")
        if self.continuity not in (RIGHT_CONTINUOUS, LEFT_CONTINUOUS):
            raise ValidationError(f"unknown continuity {self.continuity!r}")
        d = np.diff(values)
        tol = 1e-12 * max(1.0, float(np.abs(values).max()))
        if self.increasing and np.any(d < -tol):
            raise ValidationError("values of a nondecreasing step function decrease")
        if not self.increasing and np.any(d > tol):
            raise ValidationError("values of a nonincreasing step function increase")
        if self.continuity == LEFT_CONTINUOUS and knots[0] <= self.lower:
            raise ValidationError("first knot must lie to the right of the lower end")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return step_eval(self, t)

    @property
    def right_limit_at_lower(self):
        """``f(lower+)``; for densities the value on the first piece."""
        return float(self.values[0])

    def jumps(self):
        """Jump locations and sizes (including the drop to 0 for densities)."""
        if self.continuity == RIGHT_CONTINUOUS:
            sizes = np.diff(np.concatenate(([self.before], self.values)))
            return self.knots.copy(), sizes
        sizes = np.diff(np.concatenate((self.values, [0.0])))
        return self.knots.copy(), sizes


def step_eval(f, t):
    """Evaluate ``f`` at ``t`` (scalar or array) honouring its continuity side."""
    t_arr = np.asarray(t, dtype=float)
    lo, hi = f.domain
    if np.any(t_arr < lo) or np.any(t_arr > hi) or np.any(np.isnan(t_arr)):
        raise DomainError(f"evaluation point outside domain [{lo}, {hi}]")
    if f.continuity == RIGHT_CONTINUOUS:
        idx = np.searchsorted(f.knots, t_arr, side="right") - 1
        out = np.where(idx >= 0, f.values[np.clip(idx, 0, None)], f.before)
    else:
        idx = np.searchsorted(f.knots, t_arr, side="left")
        inside = (idx < len(f.knots)) & (t_arr > f.lower)
        out = np.where(inside, f.values[np.clip(idx, None, len(f.knots) - 1)], 0.0)
    return float(out) if out.ndim == 0 else out


def step_integral(f, a, b):
    """Exact integral of ``f`` over ``[a, b]``."""
    if a > b:
        raise DomainError("integration limits must satisfy a <= b")
    lo, hi = f.domain
    if a < lo or b > hi:
        raise DomainError(f"integration range outside domain [{lo}, {hi}]")
    if f.continuity == RIGHT_CONTINUOUS:
        # pieces [knot_k, knot_{k+1}), with outside values before/last
        edges = np.concatenate(([-np.inf], f.knots, [np.inf]))
        vals = np.concatenate(([f.before], f.values))
    else:
        edges = np.concatenate(([-np.inf, f.lower], f.knots, [np.inf]))
        vals = np.concatenate(([0.0], f.values, [0.0]))
    left = np.clip(edges[:-1], a, b)
    right = np.clip(edges[1:], a, b)
    lengths = right - left
    nz = lengths > 0
    return float(np.sum(vals[nz] * lengths[nz]))
