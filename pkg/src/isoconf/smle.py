"""Smoothed MLEs with reflection boundary correction on ``[0, b]``.

Integrals against the step-function MLEs are finite sums over their pieces,
so no quadrature is involved.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, ValidationError
from .isotonic import RIGHT_CONTINUOUS, StepFunction


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric kernel density on ``[-1, 1]`` given by a polynomial.

    ``density`` is the polynomial restricted to the support; the integrated
    kernels are its exact antiderivatives.
    """

    name: str
    density: Polynomial

    def __post_init__(self):
        anti = self.density.integ()
        object.__setattr__(self, "_anti", anti - anti(-1.0))

    def K(self, u):
        u = np.asarray(u, dtype=float)
        out = np.where(np.abs(u) <= 1.0, self.density(np.clip(u, -1.0, 1.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def half_odd(self, u):
        """``IK_cdf(u) - 1/2``: odd in ``u``, constant ``+-1/2`` outside the support."""
        u = np.asarray(u, dtype=float)
        c = np.clip(u, -1.0, 1.0)
        # the density is even, so its centred antiderivative has only odd powers
        out = np.where(u >= 1.0, 0.5, np.where(u <= -1.0, -0.5, self._odd(c)))
        return float(out) if out.ndim == 0 else out

    def _odd(self, c):
        # evaluated on |c| with the sign restored, so oddness holds bit for bit
        coef = (self._anti - 0.5).coef
        a = np.abs(c)
        acc = np.zeros_like(a)
        for k in range(len(coef) - 1, -1, -1):
            if k % 2 == 1:
                acc = acc + coef[k] * a ** k
        return np.copysign(acc, c)

    def IK_cdf(self, u):
        return 0.5 + self.half_odd(u)

    def IK_surv(self, u):
        return 0.5 - self.half_odd(u)

    def second_moment(self):
        p = Polynomial([0, 0, 1]) * self.density
        q = p.integ()
        return float(q(1.0) - q(-1.0))

    def tail_moment(self, v):
        """``int_v^1 (u - v)^2 K(u) du`` for ``v`` in ``[0, 1]``."""
        p = Polynomial([-v, 1]) ** 2 * self.density
        q = p.integ()
        return float(q(1.0) - q(v))


TRIWEIGHT = KernelSpec("triweight", 35.0 / 32.0 * Polynomial([1.0, 0.0, -1.0]) ** 3)


def kernel_values(spec, u):
    """Kernel density and integrated kernel at ``u``."""
    return spec.K(u), spec.IK_cdf(u)


def second_moment(spec):
    return spec.second_moment()


@dataclass(frozen=True)
class SmoothEstimate:
    """Smooth estimate on ``[0, b]``; call it with a point or an array."""

    func: object = field(repr=False)
    h: float
    b: float
    source: StepFunction = field(repr=False)
    kind: str = "cdf"

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > self.b) or np.any(np.isnan(t_arr)):
            raise DomainError(f"smooth estimate is defined on [0, {self.b}]")
        out = self.func(np.atleast_1d(t_arr))
        return float(out[0]) if t_arr.ndim == 0 else out


def _check_bandwidth(h, b):
    if not b > 0:
        raise DomainError("the domain endpoint b must be positive")
    if not 0 < h < b:
        raise DomainError(f"bandwidth must lie in (0, b) = (0, {b}), got {h}")


def _cdf_levels(mle, b):
    """Jump points and levels of ``mle``; leftover mass becomes an atom at ``b``."""
    if mle.continuity != RIGHT_CONTINUOUS:
        raise ValidationError("smle_cdf needs a right-continuous distribution function")
    knots = mle.knots
    levels = np.clip(mle.values, 0.0, 1.0)
    if knots[0] < 0:
        raise DomainError("distribution function has mass below 0")
    keep = np.diff(np.concatenate(([0.0], levels))) > 0
    x, levels = knots[keep], levels[keep]
    if len(x) and x[-1] > b:
        raise DomainError(f"distribution function has mass beyond b = {b}")
    if len(levels) == 0 or levels[-1] < 1.0:
        if len(x) and x[-1] == b:
            levels[-1] = 1.0
        else:
            x = np.append(x, b)
            levels = np.append(levels, 1.0)
    return x, levels


def _reflected_ik(kernel, t, x, h, b):
    """Boundary-corrected integrated kernel ``G(t, x)`` on a ``t`` by ``x`` grid.

    ``G = IK((t-x)/h) + IK((t+x)/h) - IK((2b-t-x)/h)``, summed in the order
    that makes ``G(0, x) = 0`` and ``G(b, x) = 1`` hold exactly.
    """
    t = t[:, None]
    u = kernel.half_odd((t - x) / h)
    v = kernel.half_odd((t + x) / h)
    w = kernel.half_odd((2 * b - t - x) / h)
    left = t <= 0.5 * b
    return np.where(left, 0.5 + (u + v) - w, 0.5 + v + (u - w))


def smle_cdf(mle, h, b, kernel=TRIWEIGHT):
    """Smoothed MLE of a distribution function on ``[0, b]``.

    ``F(t) = int {IK((t-x)/h) + IK((t+x)/h) - IK((2b-t-x)/h)} dF_hat(x)``.  Mass
    the MLE leaves undistributed is placed at ``b``, so ``F(0) = 0`` and
    ``F(b) = 1`` hold exactly.
    """
    _check_bandwidth(h, b)
    x, levels = _cdf_levels(mle, b)

    def func(t):
        G = _reflected_ik(kernel, t, x, h, b)
        # summation by parts against the levels keeps the end values exact
        dG = G[:, :-1] - G[:, 1:]
        out = G[:, -1] + dG @ levels[:-1]
        return np.clip(out, 0.0, 1.0)

    return SmoothEstimate(func, float(h), float(b), mle, "cdf")


def smle_density(gren, h, b, kernel=TRIWEIGHT):
    """Smoothed Grenander estimator with reflection at 0 and ``b``.

    ``g(t) = int {K_h(t-x) + K_h(t+x) + K_h(2b-t-x)} g_hat(x) dx``, evaluated
    exactly on each piece of ``g_hat`` through integrated kernels.
    """
    _check_bandwidth(h, b)
    knots = gren.knots
    if knots[-1] > b:
        raise DomainError(f"density has mass beyond b = {b}")
    left = np.concatenate(([gren.lower], knots[:-1]))
    right = knots
    c = gren.values

    def func(t):
        t = t[:, None]
        F = kernel.IK_cdf
        direct = F((t - left) / h) - F((t - right) / h)
        near = F((t + right) / h) - F((t + left) / h)
        far = F((2 * b - t - left) / h) - F((2 * b - t - right) / h)
        out = (direct + near + far) @ c
        return np.maximum(out, 0.0)

    return SmoothEstimate(func, float(h), float(b), gren, "density")


def reflected_kernel(t, x, h, b, kernel=TRIWEIGHT):
    """``K_h(t - x) - K_h(t + x) - K_h(2b - t - x)`` on a ``t`` by ``x`` grid."""
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    x = np.asarray(x, dtype=float)[None, :]
    K = kernel.K
    return (K((t - x) / h) - K((t + x) / h) - K((2 * b - t - x) / h)) / h


def studentized_sd(sample, mle, t, h, b, kernel=TRIWEIGHT):
    """Plug-in standard deviation ``S_nh(t)`` of the SMLE.

    ``S^2 = n^-2 sum {K_h(t-T_i) - K_h(t+T_i) - K_h(2b-t-T_i)}^2 (Delta_i - F_hat(T_i))^2``.
    Returns a float for scalar ``t`` and an array otherwise.
    """
    _check_bandwidth(h, b)
    resid = sample.indicators - mle(sample.times)
    kern = reflected_kernel(t, sample.times, h, b, kernel)
    s = np.sqrt((kern ** 2) @ (resid ** 2)) / sample.n
    return float(s[0]) if np.ndim(t) == 0 else s


def asymptotic_bias_truncexp(t, h, b=2.0, kernel=TRIWEIGHT):
    """Asymptotic bias of the SMLE for the exponential truncated to ``[0, b]``.

    In the interior ``[h, b-h]`` it is ``f0'(t) h^2 m2 / 2``; within ``h`` of
    either end ``m2`` is replaced by ``m2 - 2 int_v^1 (u-v)^2 K(u) du`` with
    ``v`` the scaled distance to that end.
    """
    if not 0.0 <= t <= b:
        raise DomainError(f"t must lie in [0, {b}]")
    if h <= 0:
        raise DomainError("bandwidth must be positive")
    m2 = kernel.second_moment()
    if t < h:
        m2 -= 2.0 * kernel.tail_moment(t / h)
    elif t > b - h:
        m2 -= 2.0 * kernel.tail_moment((b - t) / h)
    return -(h ** 2) * np.exp(-t) * m2 / (2.0 * (1.0 - np.exp(-b)))


def estimation_bandwidth(b, n):
    """Default bandwidth ``b n^(-1/5)`` for estimation."""
    return b * n ** (-0.2)


def ci_bandwidth(b, n):
    """Undersmoothed bandwidth ``b n^(-1/4)`` for confidence intervals."""
    return b * n ** (-0.25)
