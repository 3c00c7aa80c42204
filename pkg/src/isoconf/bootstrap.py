"""Bootstrap confidence bands around the smoothed MLEs.

Replication ``r`` draws from its own Philox stream spawned from the seed, so
results do not depend on the order in which replications are evaluated.
"""

from dataclasses import dataclass, field

import numpy as np

from .current_status import CurrentStatusSample, mle
from .errors import DegenerateDataError, DomainError, ValidationError
from .grenander import WeightedSample, grenander_mle
from .smle import ci_bandwidth, smle_cdf, smle_density, studentized_sd

METHOD_LR = "lr"
METHOD_BOOT = "smle-boot"
METHOD_BOOT_BIAS = "smle-boot-biascorr"
METHOD_RATIO = "density-ratio"


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings shared by the bootstrap intervals.

    Parameters
    ----------
    B : int
        Bootstrap replications.
    level : float
        Nominal coverage ``1 - alpha``.
    tighten : float, optional
        ``alpha' < alpha`` used for the percentiles instead of ``alpha``.
    bandwidth : float or None
        ``None`` selects the undersmoothed default ``b n^(-1/4)``.
    seed : int or None
    upper : float or None
        Right end ``b`` of the support; defaults to the largest observation.
    """

    B: int = 1000
    level: float = 0.95
    tighten: float = None
    bandwidth: float = None
    seed: int = None
    upper: float = None

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ValidationError("B must be a positive integer")
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must lie in (0, 1)")
        if self.tighten is not None and not 0.0 < self.tighten <= self.alpha:
            raise DomainError("the tightened alpha must lie in (0, alpha]")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")

    @property
    def alpha(self):
        return 1.0 - self.level

    @property
    def percentile_alpha(self):
        return self.alpha if self.tighten is None else self.tighten


@dataclass(frozen=True)
class ConfidenceBand:
    t: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    estimate: np.ndarray
    method: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValidationError("band lower end exceeds upper end")

    def covers(self, truth):
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)


def replication_rngs(seed, count):
    """Independent generators, one per replication."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def resample(sample, rng):
    """Draw ``n`` pairs with replacement and sort them by time."""
    if sample.n < 1:
        raise DegenerateDataError("cannot resample an empty sample")
    idx = rng.integers(0, sample.n, size=sample.n)
    return CurrentStatusSample.from_unsorted(
        sample.times[idx], sample.indicators[idx], allow_ties=True
    )


def order_statistic_percentile(values, p):
    """``k``-th smallest of ``values`` with ``k = round(len(values) p)``, clamped to 1..len."""
    v = np.sort(np.asarray(values, dtype=float))
    k = int(np.clip(np.round(len(v) * p), 1, len(v)))
    return float(v[k - 1])


def _percentiles(Z, a):
    """Order-statistic percentiles ``a/2`` and ``1 - a/2`` per column, ignoring NaN."""
    lo = np.empty(Z.shape[1])
    hi = np.empty(Z.shape[1])
    invalid = np.zeros(Z.shape[1], dtype=int)
    for j in range(Z.shape[1]):
        col = Z[:, j]
        ok = col[~np.isnan(col)]
        invalid[j] = len(col) - len(ok)
        if len(ok) == 0:
            raise DegenerateDataError("every bootstrap statistic was degenerate")
        lo[j] = order_statistic_percentile(ok, a / 2)
        hi[j] = order_statistic_percentile(ok, 1 - a / 2)
    return lo, hi, invalid


def _check_B(config):
    if config.B * config.percentile_alpha / 2 < 1:
        raise ValidationError(
            f"B={config.B} is too small for the {config.percentile_alpha / 2:g} percentile"
        )


def _upper(config, times):
    b = config.upper if config.upper is not None else float(np.max(times))
    if np.max(times) > b:
        raise DomainError("observations beyond the upper end b")
    return b


def z_star(t, boot_sample, orig_smle_value, h, b):
    """Studentized bootstrap statistic at ``t`` (scalar or array).

    The denominator uses the ordinary MLE of the bootstrap sample.  A zero
    denominator yields NaN.
    """
    F_star = mle(boot_sample)
    num = smle_cdf(F_star, h, b)(t) - np.asarray(orig_smle_value)
    den = studentized_sd(boot_sample, F_star, t, h, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return float(z) if np.ndim(z) == 0 else z


def smle_bootstrap(sample, t_grid, config):
    """SMLE, its standard deviation and the ``B`` by ``len(t_grid)`` matrix of ``Z*``."""
    _check_B(config)
    t_grid = np.asarray(t_grid, dtype=float)
    b = _upper(config, sample.times)
    h = config.bandwidth if config.bandwidth is not None else ci_bandwidth(b, sample.n)
    F_hat = mle(sample)
    est = smle_cdf(F_hat, h, b)(t_grid)
    sd = studentized_sd(sample, F_hat, t_grid, h, b)
    Z = np.empty((config.B, len(t_grid)))
    for r, rng in enumerate(replication_rngs(config.seed, config.B)):
        Z[r] = z_star(t_grid, resample(sample, rng), est, h, b)
    return est, sd, Z, h, b


def _studentized_band(sample, t_grid, config, shift, method):
    est, sd, Z, h, b = smle_bootstrap(sample, t_grid, config)
    u_lo, u_hi, invalid = _percentiles(Z, config.percentile_alpha)
    centre = est - shift
    lower = np.clip(centre - u_hi * sd, 0.0, 1.0)
    upper = np.clip(centre - u_lo * sd, 0.0, 1.0)
    meta = {"h": h, "b": b, "B": config.B, "invalid": invalid}
    return ConfidenceBand(np.asarray(t_grid, float), lower, upper, est, method, meta)


def ci_type1(sample, t_grid, config):
    """Studentized bootstrap interval ``[F - U*_{1-a/2} S, F - U*_{a/2} S]``, clipped to [0, 1]."""
    return _studentized_band(sample, t_grid, config, 0.0, METHOD_BOOT)


def ci_type2(sample, t_grid, config, bias_fn):
    """Type 1 interval shifted by ``-beta(t)``; ``bias_fn`` gives the true asymptotic bias."""
    t_grid = np.asarray(t_grid, dtype=float)
    shift = np.array([bias_fn(t) for t in t_grid], dtype=float)
    return _studentized_band(sample, t_grid, config, shift, METHOD_BOOT_BIAS)


def _ratio(raw, t_grid, h, b):
    g = smle_density(grenander_mle(WeightedSample.from_observations(raw)), h, b)
    # one evaluation pass so that a grid point at zero gives exactly 1
    vals = g(np.concatenate(([0.0], t_grid)))
    if not vals[0] > 0:
        return None
    return vals[1:] / vals[0]


def density_ratio_ci(raw_times, t_grid, config):
    """Percentile band for the survival ratio ``g(t)/g(0)`` of the smoothed density.

    The bootstrap statistic is the plain difference of ratios; the band is
    ``[r - U*_{1-a/2}, r - U*_{a/2}]`` clipped to [0, 1].
    """
    _check_B(config)
    raw = np.asarray(raw_times, dtype=float)
    if raw.ndim != 1 or len(raw) == 0:
        raise DegenerateDataError("empty sample")
    t_grid = np.asarray(t_grid, dtype=float)
    b = _upper(config, raw)
    h = config.bandwidth if config.bandwidth is not None else ci_bandwidth(b, len(raw))
    est = _ratio(raw, t_grid, h, b)
    if est is None:
        raise DegenerateDataError("smoothed density vanishes at zero")
    D = np.empty((config.B, len(t_grid)))
    for r, rng in enumerate(replication_rngs(config.seed, config.B)):
        boot = raw[rng.integers(0, len(raw), size=len(raw))]
        star = _ratio(boot, t_grid, h, b)
        D[r] = np.nan if star is None else star - est
    u_lo, u_hi, invalid = _percentiles(D, config.percentile_alpha)
    lower = np.clip(est - u_hi, 0.0, 1.0)
    upper = np.clip(est - u_lo, 0.0, 1.0)
    meta = {"h": h, "b": b, "B": config.B, "invalid": invalid}
    return ConfidenceBand(t_grid, lower, upper, est, METHOD_RATIO, meta)
