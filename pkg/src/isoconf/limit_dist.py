"""Monte Carlo for the limit distribution ``D`` of the LR statistic.

``D = int {S(t)^2 - S0(t)^2} dt`` where ``S`` is the slope of the concave
majorant of ``X(t) = W(t) - t^2`` for a two-sided Brownian motion ``W`` and
``S0`` is the slope of the majorants of ``X`` on ``(-inf, 0]`` and ``[0, inf)``
separately, clamped at 0 from below on the left and from above on the right.
The processes are simulated on a grid over ``[-c, c]``.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import CacheError, DomainError, ValidationError

CACHE_VERSION = 1
DEFAULT_LEVELS = (0.8, 0.9, 0.95, 0.975, 0.99)


@dataclass(frozen=True)
class LimitProcessConfig:
    """Horizon ``c``, grid step ``delta``, replications ``R`` and seed."""

    c: float = 3.0
    delta: float = 0.005
    R: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0 or not self.delta > 0:
            raise ValidationError("horizon and grid step must be positive")
        if int(self.R) != self.R or self.R < 1:
            raise ValidationError("R must be a positive integer")
        if round(self.c / self.delta) < 1:
            raise ValidationError("grid step exceeds the horizon")

    @property
    def steps(self):
        """Grid steps on each side of 0."""
        return int(round(self.c / self.delta))


def path_rngs(seed, count):
    """Per-path (right, left) generators.

    Each side has its own stream, so a longer horizon extends the same paths.
    """
    out = []
    for child in np.random.SeedSequence(seed).spawn(count):
        right, left = child.spawn(2)
        out.append((np.random.Generator(np.random.Philox(right)),
                    np.random.Generator(np.random.Philox(left))))
    return out


def brownian_increments(config, rngs):
    """Increments of ``W`` on ``[0, c]`` and on ``[-c, 0]`` read outward from 0."""
    right_rng, left_rng = rngs
    K = config.steps
    sd = math.sqrt(config.delta)
    return sd * right_rng.standard_normal(K), sd * left_rng.standard_normal(K)


def _thin(incr, thin):
    K = (len(incr) // thin) * thin
    return incr[:K].reshape(-1, thin).sum(axis=1)


def slope_pair(right_incr, left_incr, delta):
    """Unconstrained and constrained slopes on the grid intervals, left to right.

    Parameters
    ----------
    right_incr, left_incr : ndarray
        Increments of ``W`` moving away from 0 on each side.
    delta : float
        Grid step.

    Returns
    -------
    S, S0 : ndarray of length ``2K``
        Slopes on the intervals ``[t_{k-1}, t_k]`` from ``-c`` to ``c``.
    """
    K = len(right_incr)
    k = np.arange(1, K + 1)
    # drift increments of -t^2 over [(k-1)delta, k delta] on either side
    drift = -(2 * k - 1) * delta * delta
    right_chord = (right_incr + drift) / delta
    # on the left, walking from -c up to 0
    left_chord = (-(left_incr + drift) / delta)[::-1]
    chord = np.concatenate((left_chord, right_chord))
    S = isotonic_regression(chord, increasing=False).x
    S_left = isotonic_regression(left_chord, increasing=False).x
    S_right = isotonic_regression(right_chord, increasing=False).x
    S0 = np.concatenate((np.maximum(S_left, 0.0), np.minimum(S_right, 0.0)))
    return S, S0


def simulate_slope_pair(config, rngs):
    """One draw of ``(S, S0)`` on the grid of ``config``."""
    right, left = brownian_increments(config, rngs)
    return slope_pair(right, left, config.delta)


def path_D(S, S0, delta):
    """``int (S^2 - S0^2) dt`` for slopes constant on grid intervals."""
    # the constrained slope solves a projection onto a smaller cone, so the
    # integral is nonnegative; clip rounding noise
    return max(float(delta * np.sum(S * S - S0 * S0)), 0.0)


def sample_D(config, thin=1):
    """``R`` draws of ``D``.

    ``thin > 1`` evaluates every path on a grid ``thin`` times coarser,
    reusing the same Brownian paths.
    """
    if int(thin) != thin or thin < 1:
        raise ValidationError("thin must be a positive integer")
    delta = config.delta * thin
    out = np.empty(config.R)
    for r, rngs in enumerate(path_rngs(config.seed, config.R)):
        right, left = brownian_increments(config, rngs)
        if thin > 1:
            right, left = _thin(right, thin), _thin(left, thin)
        S, S0 = slope_pair(right, left, delta)
        out[r] = path_D(S, S0, delta)
    return out


def quantile(samples, p):
    """Order-statistic quantile: the ``ceil(p R)``-th smallest draw.

    ``samples`` may also be a :class:`QuantileTable`, in which case ``p`` must
    be one of its levels.
    """
    if not 0.0 < p < 1.0:
        raise DomainError("probability level must lie in (0, 1)")
    if isinstance(samples, QuantileTable):
        return samples.lookup(p)
    v = np.sort(np.asarray(samples, dtype=float))
    if len(v) == 0:
        raise ValidationError("no samples")
    k = max(int(math.ceil(p * len(v) - 1e-9)), 1)
    return float(v[k - 1])


@dataclass(frozen=True)
class QuantileTable:
    levels: tuple
    quantiles: tuple
    c: float
    delta: float
    R: int
    seed: int
    version: int = CACHE_VERSION

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        quantiles = tuple(float(x) for x in self.quantiles)
        if len(levels) != len(quantiles) or not levels:
            raise ValidationError("levels and quantiles must be non-empty and aligned")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValidationError("levels must be strictly increasing")
        if any(b < a for a, b in zip(quantiles, quantiles[1:])):
            raise ValidationError("quantiles must be nondecreasing in the level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "quantiles", quantiles)

    def lookup(self, p):
        for level, q in zip(self.levels, self.quantiles):
            if abs(level - p) <= 1e-12:
                return q
        raise DomainError(f"level {p} not in the table {self.levels}; rerun the quantile command")

    def payload(self):
        d = asdict(self)
        d["levels"] = list(self.levels)
        d["quantiles"] = list(self.quantiles)
        return d


def build_table(config, levels=DEFAULT_LEVELS):
    draws = sample_D(config)
    levels = tuple(sorted(levels))
    qs = tuple(quantile(draws, p) for p in levels)
    return QuantileTable(levels, qs, config.c, config.delta, config.R, config.seed)


def _checksum(payload):
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def cache_dumps(table):
    payload = table.payload()
    payload["checksum"] = _checksum(table.payload())
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def cache_loads(text):
    try:
        payload = json.loads(text)
        checksum = payload.pop("checksum")
    except (json.JSONDecodeError, KeyError, AttributeError) as exc:
        raise CacheError(f"unreadable quantile cache: {exc}") from exc
    if _checksum(payload) != checksum:
        raise CacheError("quantile cache checksum mismatch")
    if payload.get("version") != CACHE_VERSION:
        raise CacheError(f"unsupported cache version {payload.get('version')}")
    try:
        return QuantileTable(**payload)
    except (TypeError, ValidationError) as exc:
        raise CacheError(f"malformed quantile cache: {exc}") from exc


def cache_write(path, table):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cache_dumps(table))


def cache_read(path):
    with open(path, encoding="utf-8") as fh:
        return cache_loads(fh.read())


def reference_table():
    """Quantile table shipped with the package (default configuration, seed 0)."""
    text = resources.files("isoconf").joinpath("data/quantiles.json").read_text()
    return cache_loads(text)
