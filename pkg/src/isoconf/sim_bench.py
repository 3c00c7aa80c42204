"""Data generators and the coverage, multiplier-rate and null-distribution experiments."""

import math
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import (
    METHOD_BOOT,
    METHOD_BOOT_BIAS,
    METHOD_LR,
    BootstrapConfig,
    ci_type1,
    ci_type2,
    replication_rngs,
)
from .current_status import CurrentStatusSample, lr_ci, restricted_mle
from .current_status import log_lr as log_lr_cs
from .errors import DomainError, ValidationError
from .grenander import WeightedSample, log_lr_density, restricted_mle_density
from .smle import asymptotic_bias_truncexp, ci_bandwidth

CURRENT_STATUS = "current-status"
MONOTONE_DENSITY = "density"
CURRENT_DURATION = "current-duration"

UNIFORM02 = "uniform"
TRUNCEXP02 = "truncexp"
EXPONENTIAL = "exponential"
POINT_MASS = "point-mass"

_EXP2 = 1.0 - math.exp(-2.0)


@dataclass(frozen=True)
class Truth:
    """A distribution with ``cdf``, decreasing ``density`` and inverse-cdf sampler."""

    name: str
    cdf: object = field(repr=False)
    density: object = field(repr=False)
    sample: object = field(repr=False)
    upper: float = 2.0
    mean: float = None


def _uniform02():
    return Truth(
        UNIFORM02,
        cdf=lambda t: np.clip(np.asarray(t, float) / 2.0, 0.0, 1.0),
        density=lambda t: np.where((np.asarray(t) >= 0) & (np.asarray(t) <= 2), 0.5, 0.0),
        sample=lambda rng, n: rng.uniform(0.0, 2.0, n),
        upper=2.0,
        mean=1.0,
    )


def _truncexp02():
    return Truth(
        TRUNCEXP02,
        cdf=lambda t: (1.0 - np.exp(-np.clip(np.asarray(t, float), 0.0, 2.0))) / _EXP2,
        density=lambda t: np.where(
            (np.asarray(t) >= 0) & (np.asarray(t) <= 2), np.exp(-np.asarray(t, float)) / _EXP2, 0.0
        ),
        sample=lambda rng, n: -np.log1p(-rng.uniform(0.0, 1.0, n) * _EXP2),
        upper=2.0,
        mean=(1.0 - 3.0 * math.exp(-2.0)) / _EXP2,
    )


def _exponential():
    return Truth(
        EXPONENTIAL,
        cdf=lambda t: -np.expm1(-np.maximum(np.asarray(t, float), 0.0)),
        density=lambda t: np.where(np.asarray(t) >= 0, np.exp(-np.asarray(t, float)), 0.0),
        sample=lambda rng, n: rng.exponential(1.0, n),
        upper=math.inf,
        mean=1.0,
    )


def point_mass(c):
    """Degenerate truth at ``c > 0``, for the current-duration generator."""
    if not c > 0:
        raise DomainError("point mass must sit at a positive location")
    return Truth(
        POINT_MASS,
        cdf=lambda t: np.where(np.asarray(t, float) >= c, 1.0, 0.0),
        density=None,
        sample=lambda rng, n: np.full(n, float(c)),
        upper=float(c),
        mean=float(c),
    )


TRUTHS = {UNIFORM02: _uniform02(), TRUNCEXP02: _truncexp02(), EXPONENTIAL: _exponential()}


def get_truth(truth):
    if isinstance(truth, Truth):
        return truth
    try:
        return TRUTHS[truth]
    except KeyError:
        raise ValidationError(f"unknown truth {truth!r}; choose from {sorted(TRUTHS)}") from None


@dataclass(frozen=True)
class DesignSpec:
    """Data model, truth, sample size and (current status only) inspection law."""

    model: str
    truth: object
    n: int
    observation: object = UNIFORM02

    def __post_init__(self):
        if self.model not in (CURRENT_STATUS, MONOTONE_DENSITY, CURRENT_DURATION):
            raise ValidationError(f"unknown model {self.model!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("n must be a positive integer")
        truth = get_truth(self.truth)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "observation", get_truth(self.observation))
        if self.model == MONOTONE_DENSITY and truth.density is None:
            raise ValidationError("the monotone density model needs a truth with a density")


def gen_current_status(spec, rng):
    """Sorted ``(T_i, 1{X_i <= T_i})`` with independent ``X ~ truth`` and ``T ~ observation``."""
    if spec.model != CURRENT_STATUS:
        raise ValidationError("design is not a current status design")
    T = spec.observation.sample(rng, spec.n)
    X = spec.truth.sample(rng, spec.n)
    order = np.argsort(T, kind="stable")
    return CurrentStatusSample(T[order], (X[order] <= T[order]).astype(np.int64), allow_ties=True)


def gen_monotone_density(spec, rng):
    """Inverse-cdf draws from the truth, aggregated into a weighted sample."""
    if spec.model != MONOTONE_DENSITY:
        raise ValidationError("design is not a monotone density design")
    return WeightedSample.from_observations(spec.truth.sample(rng, spec.n))


def gen_current_duration(spec, rng):
    """Raw current durations ``X = U Z`` with ``Z`` drawn from the length-biased truth.

    For the exponential truth the length-biased law is Gamma(2, 1); for a point
    mass it is the same point mass.
    """
    if spec.model != CURRENT_DURATION:
        raise ValidationError("design is not a current duration design")
    truth = spec.truth
    if truth.mean is None or not 0 < truth.mean < math.inf:
        raise DomainError("the truth needs a finite nonzero mean")
    if truth.name == EXPONENTIAL:
        Z = rng.gamma(2.0, 1.0, spec.n)
    elif truth.name == POINT_MASS:
        Z = truth.sample(rng, spec.n)
    else:
        Z = _length_biased(truth, rng, spec.n)
    return rng.uniform(0.0, 1.0, spec.n) * Z


def _length_biased(truth, rng, n):
    # rejection from the truth with acceptance probability x / upper
    if not math.isfinite(truth.upper):
        raise DomainError("length-biased sampling needs a bounded truth")
    out = np.empty(0)
    while len(out) < n:
        x = truth.sample(rng, 2 * n)
        out = np.concatenate((out, x[rng.uniform(0.0, truth.upper, 2 * n) < x]))
    return out[:n]


def coverage_grid(b=2.0):
    """``t = b k / 100`` for ``k = 1..99`` (0.02..1.98 on [0, 2])."""
    return b * np.arange(1, 100) / 100.0


@dataclass(frozen=True)
class Profile:
    n: int
    R: int
    B: int


DESK = Profile(n=200, R=300, B=200)
PAPER = Profile(n=1000, R=1000, B=1000)


@dataclass
class CoverageReport:
    """Per-point non-coverage proportions per method."""

    t: np.ndarray
    noncoverage: dict
    reps: int
    meta: dict = field(default_factory=dict)

    def rows(self):
        for method, props in self.noncoverage.items():
            for t, p in zip(self.t, props):
                yield float(t), method, float(p), self.reps


def coverage_experiment(design, methods, replications, seed, t_grid=None, level=0.95,
                        q=None, B=200, bandwidth=None, tighten=None):
    """Non-coverage of pointwise intervals for a current status design.

    Parameters
    ----------
    design : DesignSpec
    methods : iterable of str
        Any of ``"lr"``, ``"smle-boot"``, ``"smle-boot-biascorr"``.
    replications : int
    seed : int
    t_grid : array-like, optional
        Defaults to the 99-point grid on ``[0, b]``.
    q : float, optional
        LR critical value; required for ``"lr"``.
    B : int
        Bootstrap replications per sample.
    bandwidth : float, optional
        SMLE bandwidth; defaults to the undersmoothed ``b n^(-1/4)``.
    tighten : float, optional
        Smaller ``alpha'`` for the bootstrap percentiles.
    """
    methods = list(methods)
    unknown = set(methods) - {METHOD_LR, METHOD_BOOT, METHOD_BOOT_BIAS}
    if unknown:
        raise ValidationError(f"unknown methods {sorted(unknown)}")
    if METHOD_LR in methods and q is None:
        raise ValidationError("the LR method needs a critical value q")
    if METHOD_BOOT_BIAS in methods and design.truth.name != TRUNCEXP02:
        raise ValidationError("the bias-corrected method is only defined for the truncated exponential")
    b = design.truth.upper
    t_grid = coverage_grid(b) if t_grid is None else np.asarray(t_grid, dtype=float)
    truth = design.truth.cdf(t_grid)
    misses = {m: np.zeros(len(t_grid), dtype=int) for m in methods}
    for r, rng in enumerate(replication_rngs(seed, replications)):
        sample = gen_current_status(design, rng)
        if METHOD_LR in methods:
            distinct = CurrentStatusSample(sample.times, sample.indicators)
            for j, t0 in enumerate(t_grid):
                lo, hi = lr_ci(distinct, t0, level, q)
                misses[METHOD_LR][j] += not (lo <= truth[j] <= hi)
        boot_seed = int(rng.integers(2**63 - 1))
        config = BootstrapConfig(B=B, level=level, tighten=tighten, bandwidth=bandwidth,
                                 seed=boot_seed, upper=b)
        if METHOD_BOOT in methods:
            band = ci_type1(sample, t_grid, config)
            misses[METHOD_BOOT] += ~band.covers(truth)
        if METHOD_BOOT_BIAS in methods:
            h = bandwidth if bandwidth is not None else ci_bandwidth(b, design.n)
            band = ci_type2(sample, t_grid, config, lambda t: asymptotic_bias_truncexp(t, h, b))
            misses[METHOD_BOOT_BIAS] += ~band.covers(truth)
    noncov = {m: misses[m] / replications for m in methods}
    meta = {"seed": seed, "n": design.n, "B": B, "level": level, "q": q,
            "bandwidth": bandwidth, "tighten": tighten}
    return CoverageReport(t_grid, noncov, replications, meta)


def _null_stat(design, rng, t0, a):
    if design.model == CURRENT_STATUS:
        s = gen_current_status(design, rng)
        s = CurrentStatusSample(s.times, s.indicators)
        return s, restricted_mle, log_lr_cs
    ws = gen_monotone_density(design, rng)
    return ws, restricted_mle_density, log_lr_density


def mu_scaling_experiment(design_model, truth, n_list, replications, seed, t0=1.0):
    """Median ``|mu_n|`` of the multiplier under the true value at ``t0``, per ``n``."""
    truth = get_truth(truth)
    a = float(truth.cdf(t0) if design_model == CURRENT_STATUS else truth.density(t0))
    medians = []
    for k, n in enumerate(n_list):
        design = DesignSpec(design_model, truth, n)
        mus = np.empty(replications)
        for r, rng in enumerate(replication_rngs([seed, k], replications)):
            data, fit_fn, _ = _null_stat(design, rng, t0, a)
            mus[r] = abs(fit_fn(data, t0, a).mu)
        medians.append(float(np.median(mus)))
    return np.array(medians)


def lr_null_distribution_experiment(design, replications, seed, t0=1.0):
    """Draws of ``2 log LR`` with the constraint at the true value at ``t0``."""
    truth = design.truth
    a = float(truth.cdf(t0) if design.model == CURRENT_STATUS else truth.density(t0))
    out = np.empty(replications)
    for r, rng in enumerate(replication_rngs(seed, replications)):
        data, _, stat_fn = _null_stat(design, rng, t0, a)
        out[r] = stat_fn(data, t0, a)
    return out
