"""Distribution-function MLE from current status data and LR intervals.

Observations are pairs ``(t_i, delta_i)`` with ``delta_i = 1{X_i <= t_i}``.
The unrestricted MLE is the left slope of the greatest convex minorant of the
cusum diagram ``(i, sum_{j<=i} delta_j)``; the MLE restricted to the value
``a`` at ``t0`` is the same construction on a diagram lifted by a Lagrange
jump at the index of the last inspection time not exceeding ``t0``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DomainError, ValidationError
from .isotonic import (
    RIGHT_CONTINUOUS,
    CusumDiagram,
    StepFunction,
    gcm_left_slopes,
    hull_vertices,
)

CI_GRID_SIZE = 512
CI_REFINE_TOL = 1e-4


@dataclass(frozen=True)
class CurrentStatusSample:
    """Sorted inspection times with status indicators.

    Ties are rejected unless ``allow_ties`` is set (bootstrap resamples); only
    :func:`mle` and the smoothing routines accept tied samples.
    """

    times: np.ndarray
    indicators: np.ndarray
    allow_ties: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        ind = np.asarray(self.indicators)
        if times.ndim != 1 or times.shape != ind.shape:
            raise ValidationError("times and indicators must be 1-d arrays of equal length")
        if not np.all(np.isfinite(times)):
            raise ValidationError("inspection times must be finite")
        if not np.all((ind == 0) | (ind == 1)):
            raise ValidationError("indicators must be 0 or 1")
        d = np.diff(times)
        if np.any(d < 0):
            raise ValidationError("inspection times must be sorted")
        if not self.allow_ties and np.any(d == 0):
            raise ValidationError(
                "tied inspection times; aggregate or jitter them before fitting"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "indicators", ind.astype(np.int64))

    @property
    def n(self):
        return len(self.times)

    @property
    def has_ties(self):
        return bool(np.any(np.diff(self.times) == 0))

    @classmethod
    def from_unsorted(cls, times, indicators, allow_ties=False):
        times = np.asarray(times, dtype=float)
        indicators = np.asarray(indicators)
        order = np.lexsort((indicators, times))
        return cls(times[order], indicators[order], allow_ties=allow_ties)

    def aggregated(self):
        """Distinct times with observation counts and counts of ``delta = 1``."""
        uniq, start, counts = np.unique(self.times, return_index=True, return_counts=True)
        ones = np.add.reduceat(self.indicators, start) if len(start) else np.zeros(0, int)
        return uniq, counts, ones


@dataclass(frozen=True)
class RestrictedFit:
    """Restricted MLE ``F0`` with ``F0(t0) = a``.

    ``values`` are the fitted values at the inspection times, ``index`` the
    1-based position of the Lagrange jump in the cusum diagram.
    """

    fit: StepFunction
    mu: float
    constraint_point: float
    constraint_value: float
    active: bool
    index: int
    values: np.ndarray = field(repr=False)


def _require_data(sample):
    if sample.n == 0:
        raise DegenerateDataError("empty sample")


def _require_distinct(sample):
    if sample.has_ties:
        raise ValidationError("restricted fits need strictly increasing inspection times")


def mle(sample):
    """Unrestricted MLE as a right-continuous step function on the distinct times.

    Tied times are pooled: each distinct time advances the diagram abscissa by
    its count and the ordinate by its number of ``delta = 1``.
    """
    _require_data(sample)
    uniq, counts, ones = sample.aggregated()
    diagram = CusumDiagram.from_increments(counts, ones)
    values = _snap_unit(gcm_left_slopes(diagram))
    return StepFunction(uniq, values, continuity=RIGHT_CONTINUOUS, increasing=True)


def _snap_unit(values, tol=1e-12):
    # pooled slopes of all-one or all-zero blocks can miss 0 or 1 by rounding
    values[values < tol] = 0.0
    values[values > 1.0 - tol] = 1.0
    return values


def _cusum(sample):
    return np.concatenate(([0.0], np.cumsum(sample.indicators, dtype=float)))


class _Context:
    """Quantities shared by all restricted fits at one point ``t0``."""

    def __init__(self, sample, t0, unrestricted=None):
        _require_data(sample)
        _require_distinct(sample)
        self.sample = sample
        self.t0 = float(t0)
        self.n = sample.n
        self.P = _cusum(sample)
        self.x = np.arange(self.n + 1, dtype=float)
        if unrestricted is None:
            unrestricted = mle(sample)
        self.F_hat = unrestricted.values
        self.unrestricted = unrestricted
        # last inspection time <= t0; 0 when t0 precedes all of them
        self.i0 = int(np.searchsorted(sample.times, self.t0, side="right"))
        self.index = max(self.i0, 1)
        self.at_knot = self.i0 >= 1 and sample.times[self.i0 - 1] == self.t0
        self.lo = self.F_hat[self.i0 - 1] if self.i0 >= 1 else 0.0
        if self.at_knot:
            # no room for an extra knot: F(t0) is the value at t_{i0} itself
            self.hi = self.lo
        else:
            self.hi = self.F_hat[self.i0] if self.i0 < self.n else 1.0


def _check_level(a):
    if not 0.0 < a < 1.0:
        raise DomainError(f"constraint value must lie in (0, 1), got {a}")


def _lagrange_jump(P, x, index, a):
    # closed-form root of the maxmin equation at the penalty index
    left = P[:index] - a * x[:index]
    right = P[index:] - a * x[index:]
    return float(left.min() - right.min())


def solve_mu(sample, i0, a):
    """Lagrange multiplier for the constraint ``F_{i0} = a``.

    The left slope at ``i0`` of the lifted diagram,
    ``max_{k<=i0} min_{i>=i0} (sum_{j=k}^i delta_j + n mu a(1-a)) / (i-k+1)``,
    is continuous and increasing in ``mu``.  Writing ``c = n mu a(1-a)``, it is
    at least ``a`` exactly when ``c >= min_{x<i0}(P_x - a x) - min_{x>=i0}(P_x - a x)``,
    so the root is available in closed form.
    """
    _check_level(a)
    _require_data(sample)
    _require_distinct(sample)
    n = sample.n
    if not 1 <= i0 <= n:
        raise DomainError(f"penalty index must lie in 1..{n}, got {i0}")
    c = _lagrange_jump(_cusum(sample), np.arange(n + 1, dtype=float), i0, a)
    return c / (n * a * (1.0 - a))


def _restricted_values(ctx, a):
    """Return (values, mu, active) of the restricted MLE at the observations."""
    if ctx.lo <= a <= ctx.hi:
        return ctx.F_hat, 0.0, False
    c = _lagrange_jump(ctx.P, ctx.x, ctx.index, a)
    ys = ctx.P.copy()
    ys[ctx.index:] += c
    diagram = CusumDiagram(ctx.x, ys)
    vertices = hull_vertices(diagram, lower=True)
    seg = np.diff(ys[vertices]) / np.diff(ctx.x[vertices])
    values = np.repeat(seg, np.diff(vertices))
    k = np.searchsorted(vertices, ctx.index, side="left")
    values[vertices[k - 1]:vertices[k]] = a
    _snap_unit(values)
    return values, c / (ctx.n * a * (1.0 - a)), True


def _restricted_fit(ctx, a):
    values, mu, active = _restricted_values(ctx, a)
    times = ctx.sample.times
    if ctx.at_knot:
        knots, vals = times, values
    else:
        pos = ctx.i0
        knots = np.insert(times, pos, ctx.t0)
        vals = np.insert(values, pos, a)
    fit = StepFunction(knots, vals, continuity=RIGHT_CONTINUOUS, increasing=True)
    return RestrictedFit(fit, mu, ctx.t0, a, active, ctx.index, values)


def restricted_mle(sample, t0, a, unrestricted=None):
    """MLE under the side condition ``F(t0) = a``.

    When ``F_hat(t_{i0}) <= a <= F_hat(t_{i0+1})`` the constraint is inactive
    and the unrestricted values are returned with ``a`` attached at ``t0``.
    Otherwise the value at ``t_{i0}`` is pinned to ``a`` through the Lagrange
    jump of :func:`solve_mu`.  For ``t0`` before the first inspection time the
    jump is placed at the first index.  For ``t0`` equal to an inspection time
    the fit has no room for an extra knot, so the constraint pins that
    observation's value and is inactive only when ``F_hat(t0) = a``.
    """
    _check_level(a)
    return _restricted_fit(_Context(sample, t0, unrestricted), a)


def _log_lr_from_values(delta, F_hat, F0):
    diff = F_hat != F0
    if not np.any(diff):
        return 0.0
    d = delta[diff]
    fh = F_hat[diff]
    f0 = F0[diff]
    with np.errstate(divide="ignore"):
        terms = np.where(d == 1, np.log(fh / f0), np.log((1.0 - fh) / (1.0 - f0)))
    return max(2.0 * float(terms.sum()), 0.0)


def _log_lr(ctx, a):
    F0, _, active = _restricted_values(ctx, a)
    if not active:
        return 0.0
    return _log_lr_from_values(ctx.sample.indicators, ctx.F_hat, F0)


def log_lr(sample, t0, a):
    """Twice the log likelihood ratio of the unrestricted versus restricted MLE."""
    _check_level(a)
    return _log_lr(_Context(sample, t0), a)


def log_likelihood(delta, F):
    """Current status log likelihood of values ``F`` at the inspection times."""
    delta = np.asarray(delta)
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(delta == 1, np.log(F), np.log1p(-F))
    return float(terms.sum())


def _first_accepted(points, accept):
    # points ordered so that acceptance is monotone: rejected ... accepted
    lo, hi = 0, len(points)
    while lo < hi:
        mid = (lo + hi) // 2
        if accept(points[mid]):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _invert(stat, bracket, grid, q, exhaustive=False):
    """Hull of ``{a : stat(a) <= q}`` on ``grid`` and the bracket, ends bisected.

    The LR statistic is convex in the constraint value (the profile log
    likelihood is concave), so the accepted grid points form a run that is
    found by binary search on each side of the bracket.  ``exhaustive``
    evaluates every grid point instead.
    """
    if q < 0:
        raise DegenerateDataError("every candidate value was rejected")

    def accept(a):
        return stat(a) <= q

    lo, hi = bracket
    below = grid[grid < lo]
    above = grid[grid > hi]
    if exhaustive:
        acc_below = below[[accept(a) for a in below]] if len(below) else below
        acc_above = above[[accept(a) for a in above]] if len(above) else above
        if len(acc_below):
            lo = acc_below[0]
        if len(acc_above):
            hi = acc_above[-1]
    else:
        i = _first_accepted(below, accept)
        if i < len(below):
            lo = below[i]
        j = _first_accepted(above[::-1], accept)
        if j < len(above):
            hi = above[len(above) - 1 - j]

    rejected = grid[grid < lo]
    if len(rejected):
        rej, acc = rejected[-1], lo
        while acc - rej > CI_REFINE_TOL:
            mid = 0.5 * (rej + acc)
            if accept(mid):
                acc = mid
            else:
                rej = mid
        lo = acc
    rejected = grid[grid > hi]
    if len(rejected):
        acc, rej = hi, rejected[0]
        while rej - acc > CI_REFINE_TOL:
            mid = 0.5 * (rej + acc)
            if accept(mid):
                acc = mid
            else:
                rej = mid
        hi = acc
    return float(lo), float(hi)


def lr_ci(sample, t0, level, q, exhaustive=False):
    """Pointwise confidence interval for ``F(t0)`` by inverting the LR test.

    Parameters
    ----------
    sample : CurrentStatusSample
    t0 : float
    level : float
        Nominal coverage; the interval itself is determined by ``q``.
    q : float
        Critical value, the ``level`` quantile of the limit distribution of
        the LR statistic (see :mod:`isoconf.limit_dist`).

    Returns
    -------
    (lo, hi) : tuple of float
        Hull of the accepted constraint values on a grid of 512 points in
        ``(1/(2n), 1 - 1/(2n))``, widened to the bracket of the MLE at ``t0``
        and refined by bisection to ``1e-4`` at each end.  ``exhaustive``
        scans the whole grid rather than binary searching it.
    """
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    ctx = _Context(sample, t0)
    eps = 1.0 / (2 * ctx.n)
    grid = np.linspace(eps, 1.0 - eps, CI_GRID_SIZE)
    return _invert(lambda a: _log_lr(ctx, a), (ctx.lo, ctx.hi), grid, q, exhaustive)


@dataclass(frozen=True)
class FenchelReport:
    ok: bool
    max_violation: float

    def __bool__(self):
        return self.ok


def verify_fenchel(sample, fit, tol=1e-8):
    """Check the Fenchel optimality conditions of a (restricted) MLE.

    ``fit`` is a :class:`RestrictedFit` or, for the unrestricted MLE, a step
    function.  Observations where the fit is 0 or 1 are stripped first; they
    must agree with the indicator.
    """
    delta = sample.indicators.astype(float)
    n = sample.n
    if isinstance(fit, RestrictedFit):
        F = np.asarray(fit.values, dtype=float)
        a = fit.constraint_value
        c = n * fit.mu * a * (1.0 - a)
        index = fit.index
    else:
        F = np.asarray(fit(sample.times), dtype=float)
        c, index = 0.0, 1
    interior = (F > 0.0) & (F < 1.0)
    boundary_mismatch = np.any(~interior & (np.abs(delta - F) > 0.5))
    if boundary_mismatch:
        return FenchelReport(False, np.inf)
    num = delta - F
    num[index - 1] += c
    g = np.zeros(n)
    g[interior] = num[interior] / (F[interior] * (1.0 - F[interior]))
    suffix = np.cumsum(g[::-1])[::-1]
    ineq = max(float(suffix.max()), 0.0)
    eq = abs(float(np.sum(delta - F) + c))
    violation = max(ineq, eq)
    return FenchelReport(violation <= tol, violation)
