"""Maximum-likelihood fits of the candidate families plus KS goodness of fit.

Parameter conventions (stored in ``DistributionFit.params``):

=============  ===========================================
family         params
=============  ===========================================
weibull        (scale, shape)
normal         (mu, sigma)
lognormal      (mu, sigma) of ln(x)
laplace        (loc, scale)
exponential    (scale,)
rayleigh       (sigma,)
rician         (nu, sigma)
=============  ===========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DegenerateSampleError, InvalidArgumentError

FAMILIES = ("weibull", "normal", "lognormal", "laplace", "exponential", "rayleigh", "rician")
POSITIVE_FAMILIES = frozenset({"weibull", "lognormal", "exponential", "rayleigh", "rician"})
MIN_SAMPLES = 8
KS_ALPHA = 0.05


def ks_critical_value(n: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic one-sample Kolmogorov-Smirnov critical value."""
    return float(special.kolmogi(alpha) / math.sqrt(n))


def frozen(family: str, params):
    """scipy frozen distribution for ``family`` with our parameter convention."""
    p = tuple(float(v) for v in params)
    if family == "weibull":
        return stats.weibull_min(p[1], scale=p[0])
    if family == "normal":
        return stats.norm(p[0], p[1])
    if family == "lognormal":
        return stats.lognorm(p[1], scale=math.exp(p[0]))
    if family == "laplace":
        return stats.laplace(p[0], p[1])
    if family == "exponential":
        return stats.expon(scale=p[0])
    if family == "rayleigh":
        return stats.rayleigh(scale=p[0])
    if family == "rician":
        return stats.rice(p[0] / p[1], scale=p[1])
    raise InvalidArgumentError(f"unknown family {family!r}")


@dataclass(frozen=True)
class DistributionFit:
    family: str
    params: tuple
    ks_statistic: float = math.nan
    ks_pass: bool = False
    n: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def dist(self):
        return frozen(self.family, self.params)

    def cdf(self, x):
        return self.dist.cdf(x)

    def mean(self) -> float:
        return float(self.dist.mean())

    def sample(self, size, rng):
        return self.dist.rvs(size=size, random_state=rng)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "ks_statistic": self.ks_statistic,
            "ks_pass": self.ks_pass,
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionFit":
        return cls(d["family"], tuple(d["params"]), float(d["ks_statistic"]), bool(d["ks_pass"]), int(d["n"]))


def _mle(x, family):
    if family == "normal":
        return (x.mean(), x.std())
    if family == "lognormal":
        y = np.log(x)
        return (y.mean(), y.std())
    if family == "laplace":
        med = float(np.median(x))
        return (med, float(np.mean(np.abs(x - med))))
    if family == "exponential":
        return (x.mean(),)
    if family == "rayleigh":
        return (math.sqrt(np.mean(x * x) / 2.0),)
    if family == "weibull":
        shape, _, scale = stats.weibull_min.fit(x, floc=0.0)
        return (scale, shape)
    if family == "rician":
        b, _, scale = stats.rice.fit(x, floc=0.0)
        return (b * scale, scale)
    raise InvalidArgumentError(f"unknown family {family!r}")


def fit_distribution(samples, family: str) -> DistributionFit:
    """ML fit of ``family`` and the KS statistic against the fitted CDF."""
    if family not in FAMILIES:
        raise InvalidArgumentError(f"unknown family {family!r}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("samples contain non-finite values")
    if family in POSITIVE_FAMILIES and np.any(x <= 0):
        raise InvalidArgumentError(f"{family} needs strictly positive samples")
    if np.ptp(x) == 0.0:
        raise DegenerateSampleError("samples are constant")
    params = _mle(x, family)
    d = ks_statistic(x, frozen(family, params).cdf)
    return DistributionFit(family, params, float(d), bool(d <= ks_critical_value(x.size)), int(x.size))


def select_best_fit(samples, families=FAMILIES) -> DistributionFit:
    """Fit every family whose support holds the samples; lowest KS statistic wins."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    positive = bool(np.all(x > 0))
    best = None
    for fam in families:
        if fam in POSITIVE_FAMILIES and not positive:
            continue
        fit = fit_distribution(x, fam)
        if best is None or fit.ks_statistic < best.ks_statistic:
            best = fit
    if best is None:
        raise InvalidArgumentError("no candidate family supports these samples")
    return best


def ks_statistic(samples, cdf) -> float:
    """sup |F_n - F| checked at both one-sided limits of every jump.

    Matches the usual statistic for continuous ``cdf`` and stays exact for
    step functions such as an empirical CDF.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise InvalidArgumentError("no samples")
    u, counts = np.unique(x, return_counts=True)
    hi = np.cumsum(counts) / x.size
    lo = hi - counts / x.size
    f = np.asarray(cdf(u), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(u, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(hi - f)), np.max(np.abs(lo - f_left))))
