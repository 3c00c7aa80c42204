"""Grenander MLE of a decreasing density and its restricted versions.

The data are distinct observation points ``t_1 < ... < t_m`` with
multiplicities ``w_i`` and ``n = sum w_i``.  The MLE is the left slope of the
least concave majorant of ``(t_j, sum_{i<=j} w_i / n)``.  Under the side
condition ``f(t0) = a`` the abscissae are rescaled by ``1 + mu a`` and the
ordinates lifted by ``mu a`` from index ``i0`` on.  Pinning the value at zero
as well adds an abscissa shift ``alpha``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintInfeasibleError, DomainError, NumericError, ValidationError
from .isotonic import (
    LEFT_CONTINUOUS,
    CusumDiagram,
    StepFunction,
    hull_vertices,
    lcm_left_slopes,
)

BISECT_ITER = 200
CI_GRID_SIZE = 512
CI_REFINE_TOL = 1e-4
AGREEMENT_TOL = 1e-8


@dataclass(frozen=True)
class WeightedSample:
    """Distinct positive observation points with integer multiplicities."""

    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        weights = np.asarray(self.weights)
        if times.ndim != 1 or times.shape != weights.shape:
            raise ValidationError("times and weights must be 1-d arrays of equal length")
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise ValidationError("observation points must be positive and finite")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("observation points must be strictly increasing")
        if np.any(weights != np.round(weights)) or np.any(weights < 1):
            raise ValidationError("weights must be positive integers")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights.astype(np.int64))

    @property
    def m(self):
        return len(self.times)

    @property
    def n(self):
        return int(self.weights.sum())

    @classmethod
    def from_observations(cls, x):
        """Aggregate raw observations into distinct points and counts."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValidationError("observations must be a 1-d array")
        times, counts = np.unique(x, return_counts=True)
        return cls(times, counts)

    def cumulative(self):
        """Empirical distribution function at ``0, t_1, ..., t_m``."""
        return np.concatenate(([0.0], np.cumsum(self.weights) / self.n))


@dataclass(frozen=True)
class DensityRestrictedFit:
    """Restricted Grenander-type MLE.

    ``values`` holds the fitted density at ``t_1..t_m``; ``index`` is the
    1-based position ``i0`` with ``t0`` in ``(t_{i0-1}, t_{i0}]``.
    """

    fit: StepFunction
    mu: float
    lam: float
    alpha: float
    constraint_point: float
    constraint_value: float
    zero_value: float = None
    index: int = 0
    active: bool = True
    values: np.ndarray = field(default=None, repr=False)

    @property
    def lambda_(self):
        return self.lam


def _require_data(ws):
    if ws.m == 0:
        raise ValidationError("empty sample")


def _density_step(ws, values):
    return StepFunction(
        ws.times, values, continuity=LEFT_CONTINUOUS, increasing=False,
        lower=0.0, domain=(0.0, np.inf),
    )


def grenander_mle(ws):
    """Unrestricted MLE: LCM left slopes, a left-continuous decreasing density."""
    _require_data(ws)
    diagram = CusumDiagram(np.concatenate(([0.0], ws.times)), ws.cumulative())
    return _density_step(ws, lcm_left_slopes(diagram))


def _locate(ws, t0):
    if t0 <= 0:
        raise DomainError("the constraint point must be positive")
    i0 = int(np.searchsorted(ws.times, t0, side="left")) + 1
    if i0 > ws.m:
        raise ConstraintInfeasibleError(
            "constraint point beyond the last observation, where every fit vanishes"
        )
    return i0


def _check_single_feasible(ws, i0, a):
    if a <= 0:
        raise DomainError(f"constraint value must be positive, got {a}")
    if a * ws.times[i0 - 1] >= 1:
        raise ConstraintInfeasibleError(
            f"a decreasing density with value {a} at t={ws.times[i0 - 1]} has mass above 1"
        )
    if i0 == 1 and a * ws.times[-1] <= 1:
        raise ConstraintInfeasibleError(
            f"a density bounded by {a} cannot carry unit mass on (0, {ws.times[-1]}]"
        )


def _multiplier_from_slope(T, C, i0, a):
    """Root ``c = mu a`` of the minmax equation at ``i0``.

    With ``s = a(1 + c)`` the minmax slope of the lifted, rescaled diagram is
    at most ``a`` exactly when ``c <= H(s)``, where ``H(s)`` is the difference
    of the support functions of the points left of and right of ``i0``.  The
    difference ``H(s) - s/a + 1`` is decreasing in ``s`` and is bisected; the
    active point pair then yields ``c`` in closed form.
    """
    TL, CL = T[:i0], C[:i0]
    TR, CR = T[i0:], C[i0:]

    def gap(s):
        return float(np.max(CL - s * TL) - np.max(CR - s * TR)) - s / a + 1.0

    s_lo = s_hi = a
    g = gap(a)
    if g == 0:
        return 0.0
    if g > 0:
        while gap(s_hi) > 0:
            s_lo = s_hi
            s_hi *= 2.0
    else:
        while gap(s_lo) < 0:
            s_hi = s_lo
            s_lo *= 0.5
    for _ in range(BISECT_ITER):
        mid = 0.5 * (s_lo + s_hi)
        if mid <= s_lo or mid >= s_hi:
            break
        if gap(mid) > 0:
            s_lo = mid
        else:
            s_hi = mid

    best, best_res = 0.5 * (s_lo + s_hi) / a - 1.0, np.inf
    for s in (s_lo, s_hi):
        p = int(np.argmax(CL - s * TL))
        q = i0 + int(np.argmax(CR - s * TR))
        L = T[q] - T[p]
        denom = 1.0 - a * L
        if denom == 0:
            continue
        c = (a * L - (C[q] - C[p])) / denom
        if c <= -1:
            continue
        res = abs(gap(a * (1.0 + c)))
        if res < best_res:
            best, best_res = c, res
    return best


def _diagram_arrays(ws):
    return np.concatenate(([0.0], ws.times)), ws.cumulative()


def solve_mu_density(ws, i0, a):
    """Lagrange multiplier for the constraint ``f(t_{i0}) = a``.

    Solves ``min_{i<=i0} max_{j>=i0} (sum_{k=i}^j w_k/n + mu a 1{..}) /
    ((1 + mu a)(t_j - t_{i-1})) = a``, equivalently the unscaled form with
    right-hand side ``a(1 + mu a)``.
    """
    _require_data(ws)
    if not 1 <= i0 <= ws.m:
        raise DomainError(f"index must lie in 1..{ws.m}, got {i0}")
    _check_single_feasible(ws, i0, a)
    T, C = _diagram_arrays(ws)
    return _multiplier_from_slope(T, C, i0, a) / a


def _lifted_values(T, C, scale, shift, index, lift, a=None):
    """LCM slopes of ``(shift + scale T, C + lift 1{j >= index})``.

    The block containing ``index`` is snapped to ``a`` when given.
    """
    xs = shift + scale * T
    ys = C.copy()
    ys[index:] += lift
    # the shifted diagram starts at (0, 0) with the first point at shift + scale t_1
    xs = np.concatenate(([0.0], xs[1:])) if shift != 0 else xs
    diagram = CusumDiagram(xs, ys)
    vertices = hull_vertices(diagram, lower=False)
    seg = np.diff(ys[vertices]) / np.diff(xs[vertices])
    values = np.repeat(seg, np.diff(vertices))
    if a is not None:
        k = np.searchsorted(vertices, index, side="left")
        values[vertices[k - 1]:vertices[k]] = a
    return values


def restricted_mle_density(ws, t0, a, unrestricted=None):
    """MLE of a decreasing density under ``f(t0) = a``.

    ``t0`` is placed in ``(t_{i0-1}, t_{i0}]``; left continuity then gives
    ``f(t0) = f(t_{i0}) = a``.  The fit has no jump at ``t0`` itself.
    """
    _require_data(ws)
    i0 = _locate(ws, t0)
    if unrestricted is None:
        unrestricted = grenander_mle(ws)
    f_hat = unrestricted.values
    # the MLE's own value is feasible even when it sits on the mass bound
    if f_hat[i0 - 1] == a:
        return DensityRestrictedFit(
            unrestricted, 0.0, 1.0, 0.0, float(t0), a, None, i0, False, f_hat
        )
    _check_single_feasible(ws, i0, a)
    T, C = _diagram_arrays(ws)
    c = _multiplier_from_slope(T, C, i0, a)
    mu = c / a
    lam = 1.0 + mu * a
    values = _lifted_values(T, C, lam, 0.0, i0, c, a)
    return DensityRestrictedFit(
        _density_step(ws, values), mu, lam, 0.0, float(t0), a, None, i0, True, values
    )


# Bounded-slope solver shared by the zero-constrained fits.  Free stretches
# take the LCM slopes of their own sub-diagram divided by the multiplier
# ``lam`` of the mass constraint, clipped to their bounds; ``lam`` is fixed by
# unit mass.  The objective separates over the stretches once the boundary
# values are fixed, so the clipped slopes are exactly optimal.


def _stretch_slopes(T, C, start, stop):
    # indices start..stop (1-based, inclusive)
    xs = T[start - 1:stop + 1] - T[start - 1]
    ys = C[start - 1:stop + 1] - C[start - 1]
    return lcm_left_slopes(CusumDiagram(xs, ys))


def _bounded_solve(T, C, fixed, stretches):
    """Solve for the clipped-slope maximizer.

    Parameters
    ----------
    T, C : arrays
        Diagram abscissae and ordinates including the origin.
    fixed : dict
        1-based index to prescribed value.
    stretches : list of (start, stop, lower, upper)
        Free stretches of indices with value bounds.

    Returns
    -------
    values, lam
    """
    m = len(T) - 1
    dt = np.diff(T)
    values = np.empty(m)
    fixed_mass = 0.0
    for i, v in fixed.items():
        values[i - 1] = v
        fixed_mass += v * dt[i - 1]
    pieces = []
    lo_mass = hi_mass = fixed_mass
    for start, stop, lower, upper in stretches:
        if stop < start:
            continue
        s = _stretch_slopes(T, C, start, stop)
        d = dt[start - 1:stop]
        pieces.append((start, stop, lower, upper, s, d))
        lo_mass += lower * d.sum()
        hi_mass += upper * d.sum()
    if not lo_mass < 1.0 < hi_mass:
        if not pieces and abs(fixed_mass - 1.0) <= 1e-12:
            return values, 1.0
        raise ConstraintInfeasibleError(
            f"constraint values force total mass outside 1 (range {lo_mass:.6g}..{hi_mass:.6g})"
        )

    def mass(lam):
        total = fixed_mass
        for _, _, lower, upper, s, d in pieces:
            total += float(np.dot(np.clip(s / lam, lower, upper), d))
        return total

    lam_lo = lam_hi = 1.0
    if mass(1.0) >= 1.0:
        while mass(lam_hi) > 1.0:
            lam_lo = lam_hi
            lam_hi *= 2.0
    else:
        while mass(lam_lo) < 1.0:
            lam_hi = lam_lo
            lam_lo *= 0.5
    for _ in range(BISECT_ITER):
        mid = 0.5 * (lam_lo + lam_hi)
        if mid <= lam_lo or mid >= lam_hi:
            break
        if mass(mid) > 1.0:
            lam_lo = mid
        else:
            lam_hi = mid
    lam = 0.5 * (lam_lo + lam_hi)

    # polish: with the clipping pattern frozen the mass equation is linear in 1/lam
    free_num, clipped = 0.0, fixed_mass
    for _, _, lower, upper, s, d in pieces:
        raw = s / lam
        inside = (raw > lower) & (raw < upper)
        free_num += float(np.dot(s[inside], d[inside]))
        clipped += float(np.dot(np.clip(raw[~inside], lower, upper), d[~inside]))
    if free_num > 0 and clipped < 1.0:
        polished = free_num / (1.0 - clipped)
        if abs(mass(polished) - 1.0) <= abs(mass(lam) - 1.0):
            lam = polished
    for start, stop, lower, upper, s, _ in pieces:
        values[start - 1:stop] = np.clip(s / lam, lower, upper)
    return values, lam


def _zero_solution(ws, b):
    if b <= 0:
        raise DomainError(f"value at zero must be positive, got {b}")
    T, C = _diagram_arrays(ws)
    fixed = {1: b}
    stretches = [(2, ws.m, 0.0, b)]
    return T, C, _bounded_solve(T, C, fixed, stretches)


def zero_restricted_mle(ws, b):
    """MLE under ``f(0+) = b`` alone; the denominator of the doubly restricted LR."""
    _require_data(ws)
    T, C, (values, lam) = _zero_solution(ws, b)
    r = _first_block_end(values, b)
    alpha = C[r] / b - lam * T[r]
    return DensityRestrictedFit(
        _density_step(ws, values), 0.0, lam, alpha, 0.0, b, b, 1, True, values
    )


def _first_block_end(values, b):
    r = 1
    while r < len(values) and values[r] == b:
        r += 1
    return r


def double_restricted_mle(ws, t0, a, b):
    """MLE under ``f(0+) = b`` and ``f(t0) = a``.

    The optimum is found by the bounded-slope solver; the multipliers are then
    read off its blocks (``alpha`` from the block at zero, ``mu`` from the
    block at ``t0``) and the fit is recomputed as the LCM of the diagram
    ``(alpha + lam t_j, sum_{i<=j} w_i/n + mu a 1{j >= i0})`` as a check.
    """
    _require_data(ws)
    if a <= 0:
        raise DomainError(f"constraint value must be positive, got {a}")
    if b < a:
        raise ConstraintInfeasibleError("the value at zero must be at least the value at t0")
    i0 = _locate(ws, t0)
    T, C = _diagram_arrays(ws)
    if i0 > 1 and a * ws.times[i0 - 1] < 1:
        single = restricted_mle_density(ws, t0, a)
        if abs(single.values[0] - b) <= 1e-12 * b:
            # the value at zero is not binding: the single-constraint multipliers apply
            values = single.values.copy()
            values[values == single.values[0]] = b
            return DensityRestrictedFit(
                _density_step(ws, values), single.mu, single.lam, 0.0, float(t0), a, b,
                i0, single.active, values,
            )
    if i0 == 1:
        fixed = {1: b}
        if b != a:
            raise ConstraintInfeasibleError(
                "t0 precedes the first observation, so f(t0) and f(0+) coincide"
            )
        stretches = [(2, ws.m, 0.0, a)]
    else:
        fixed = {1: b, i0: a}
        stretches = [(2, i0 - 1, a, b), (i0 + 1, ws.m, 0.0, a)]
    values, lam = _bounded_solve(T, C, fixed, stretches)

    if b == a:
        # the multipliers are not unique here; take the smallest admissible shift
        alpha = float(np.max(C[1:i0] / a - lam * T[1:i0])) if i0 > 1 else 0.0
        lift = lam - 1.0 + alpha * b
    else:
        r = _first_block_end(values, b)
        alpha = C[r] / b - lam * T[r]
        # the block of value a around i0 fixes the ordinate lift
        lo = i0 - 1
        while lo > 0 and values[lo - 1] == a:
            lo -= 1
        hi = i0
        while hi < ws.m and values[hi] == a:
            hi += 1
        lift = a * lam * (T[hi] - T[lo]) - (C[hi] - C[lo])
    mu = lift / a
    identity_gap = abs(lift - (lam - 1.0 + alpha * b))

    check = _lifted_values(T, C, lam, alpha, i0, lift)
    err = float(np.max(np.abs(check - values)))
    if err > AGREEMENT_TOL * max(1.0, b) or identity_gap > AGREEMENT_TOL:
        raise NumericError(
            "multiplier diagram does not reproduce the constrained optimum",
            residuals={"max_abs_diff": err, "identity_gap": identity_gap},
        )
    active = not (alpha == 0.0 and mu == 0.0)
    return DensityRestrictedFit(
        _density_step(ws, values), mu, lam, alpha, float(t0), a, b, i0, active, values
    )


def _log_lr_values(w, f_hat, f0):
    diff = f_hat != f0
    if not np.any(diff):
        return 0.0
    val = 2.0 * float(np.sum(w[diff] * np.log(f_hat[diff] / f0[diff])))
    return max(val, 0.0)


def log_lr_density(ws, t0, a, b=None):
    """Twice the log likelihood ratio for ``f(t0) = a``.

    With ``b`` given both numerator and denominator additionally fix
    ``f(0+) = b``.
    """
    if a <= 0:
        raise DomainError(f"constraint value must be positive, got {a}")
    if b is None:
        f_hat = grenander_mle(ws)
        f0 = restricted_mle_density(ws, t0, a, unrestricted=f_hat)
        return _log_lr_values(ws.weights, f_hat.values, f0.values)
    num = zero_restricted_mle(ws, b)
    den = double_restricted_mle(ws, t0, a, b)
    return _log_lr_values(ws.weights, num.values, den.values)


def lr_ci_density(ws, t0, level, q, exhaustive=False):
    """Pointwise confidence interval for ``f(t0)`` by LR inversion.

    Candidate values form a 512-point grid on the open feasible range
    ``(lower, 1/t_{i0})``, with ``lower = 1/t_m`` when ``t0 <= t_1`` and 0
    otherwise.  The accepted set is hulled with ``f_hat(t0)`` and each
    boundary refined by bisection to ``1e-4``; ``exhaustive`` as in
    :func:`isoconf.current_status.lr_ci`.
    """
    from .current_status import _invert

    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    _require_data(ws)
    i0 = _locate(ws, t0)
    f_hat = grenander_mle(ws)
    T, C = _diagram_arrays(ws)
    upper = 1.0 / ws.times[i0 - 1]
    lower = 1.0 / ws.times[-1] if i0 == 1 else 0.0
    grid = np.linspace(lower, upper, CI_GRID_SIZE + 2)[1:-1]
    point = float(f_hat.values[i0 - 1])

    def stat(a):
        if a == point:
            return 0.0
        c = _multiplier_from_slope(T, C, i0, a)
        f0 = _lifted_values(T, C, 1.0 + c, 0.0, i0, c, a)
        return _log_lr_values(ws.weights, f_hat.values, f0)

    return _invert(stat, (point, point), grid, q, exhaustive)


def survival_ratio(fit, t):
    """``fit(t) / fit(0+)``, the survival function in the current-duration model.

    ``fit`` is any callable density estimate; a :class:`StepFunction` uses its
    value on the first piece as ``fit(0+)``.
    """
    if isinstance(fit, StepFunction):
        g0 = fit.right_limit_at_lower
    else:
        g0 = float(fit(0.0))
    if not g0 > 0:
        raise DomainError("the density estimate vanishes at zero")
    t_arr = np.asarray(t, dtype=float)
    vals = np.where(t_arr <= 0, g0, fit(np.maximum(t_arr, 1e-300)))
    out = np.clip(vals / g0, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
