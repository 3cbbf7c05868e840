"""Inter-cluster models: delay vs index, power vs delay, occurrence probability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .distributions import DistributionFit, fit_distribution
from .errors import (
    DegenerateSampleError,
    DomainError,
    FitFailureError,
    InvalidArgumentError,
)

POWER_DOMAIN_NS = (25.0, 550.0)


@dataclass(frozen=True)
class DoubleExponentialFit:
    """``y = a1*exp(b1*x) + a2*exp(b2*x)``."""

    a1: float
    b1: float
    a2: float
    b2: float
    rmse: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = self.a1 * np.exp(self.b1 * x) + self.a2 * np.exp(self.b2 * x)
        return float(y) if y.ndim == 0 else y

    @property
    def coefficients(self) -> tuple:
        return (self.a1, self.b1, self.a2, self.b2)

    def to_dict(self) -> dict:
        return {"a1": self.a1, "b1": self.b1, "a2": self.a2, "b2": self.b2, "rmse": self.rmse}

    @classmethod
    def from_dict(cls, d) -> "DoubleExponentialFit":
        return cls(float(d["a1"]), float(d["b1"]), float(d["a2"]), float(d["b2"]), float(d.get("rmse", 0.0)))


# cluster delay (ns) against x = k - 1
DELAY_INDEX_FIT = DoubleExponentialFit(29.38, 0.183, 0.0113, 1.106)
# cluster power (dB) against cluster delay (ns)
POWER_DELAY_FIT = DoubleExponentialFit(100.9, -0.07998, -23.3, 0.00015)


def delay_from_index(k, fit: DoubleExponentialFit = DELAY_INDEX_FIT):
    """Cluster delay in ns for 1-based cluster index ``k``."""
    k = np.asarray(k)
    if np.any(k < 1):
        raise InvalidArgumentError("cluster index must be >= 1")
    return fit(k - 1)


def power_from_delay(tau, fit: DoubleExponentialFit = POWER_DELAY_FIT, domain=POWER_DOMAIN_NS):
    """Cluster mean power in dB at cluster delay ``tau`` (ns)."""
    t = np.asarray(tau, dtype=float)
    lo, hi = domain
    if np.any((t < lo) | (t > hi)) or not np.all(np.isfinite(t)):
        raise DomainError(f"cluster delay outside calibrated domain [{lo}, {hi}] ns")
    return fit(t)


def fit_double_exponential(xs, ys, init: DoubleExponentialFit | None = None, max_nfev: int = 20000) -> DoubleExponentialFit:
    """Damped Gauss-Newton (Levenberg-Marquardt) least squares from ``init``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError("xs and ys must be 1-D and the same length")
    if x.size < 6:
        raise InvalidArgumentError("need at least 6 points")
    if np.unique(x).size != x.size:
        raise InvalidArgumentError("xs must be distinct")
    if init is None:
        init = DELAY_INDEX_FIT
    p0 = np.array(init.coefficients, dtype=float)

    def resid(p):
        with np.errstate(over="ignore", invalid="ignore"):
            r = p[0] * np.exp(p[1] * x) + p[2] * np.exp(p[3] * x) - y
        return np.where(np.isfinite(r), r, 1e150)

    res = optimize.least_squares(
        resid, p0, method="lm", x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=max_nfev
    )
    rmse = float(math.sqrt(np.mean(res.fun**2)))
    fit = DoubleExponentialFit(*map(float, res.x), rmse=rmse)
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitFailureError(f"double-exponential fit did not converge: {res.message}", best=fit)
    return fit


@dataclass(frozen=True)
class OccurrenceModel:
    """Probability 1 up to ``knee``, then ``max(0, slope*k + intercept)``.

    A model fitted to data where every index is always present has no line;
    ``slope``/``intercept`` are then ``None`` and indices past the knee get 0.
    """

    slope: float | None = -0.115
    intercept: float | None = 1.361
    knee: int = 4

    @property
    def zero_crossing(self) -> float:
        if self.slope is None or self.slope == 0:
            return math.inf
        return -self.intercept / self.slope

    @property
    def degenerate(self) -> bool:
        return self.slope is None

    def probability(self, k) -> float:
        if k < 1:
            raise InvalidArgumentError("cluster index must be >= 1")
        if k <= self.knee:
            return 1.0
        if self.slope is None:
            return 0.0
        return float(min(1.0, max(0.0, self.slope * k + self.intercept)))

    @property
    def max_index(self) -> int:
        """Largest index with non-zero probability."""
        if self.slope is None or self.slope >= 0:
            return self.knee
        k = self.knee
        while self.probability(k + 1) > 0.0:
            k += 1
        return k

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "knee": self.knee}

    @classmethod
    def from_dict(cls, d) -> "OccurrenceModel":
        s, i = d.get("slope"), d.get("intercept")
        return cls(None if s is None else float(s), None if i is None else float(i), int(d["knee"]))


def occurrence_probability(k: int, model: OccurrenceModel = OccurrenceModel()) -> float:
    return model.probability(k)


def fit_occurrence(counts, n_snapshots: int) -> OccurrenceModel:
    """Least-squares occurrence line from per-index presence counts.

    ``counts[k-1]`` is the number of snapshots (out of ``n_snapshots``) in
    which cluster ``k`` exists. The knee is the end of the leading run of
    indices that are always present; the line is fitted over indices with
    empirical probability strictly between 0 and 1.
    """
    c = np.asarray(counts, dtype=float)
    if n_snapshots <= 0:
        raise InvalidArgumentError("n_snapshots must be > 0")
    if c.size < 10:
        raise InvalidArgumentError("presence counts must span at least indices 1..10")
    if np.any(c < 0) or np.any(c > n_snapshots):
        raise InvalidArgumentError("counts must lie in [0, n_snapshots]")
    prob = c / n_snapshots
    k = np.arange(1, c.size + 1)
    full = prob >= 1.0
    knee = int(np.argmin(full)) if not full.all() else int(c.size)
    if knee == c.size:
        return OccurrenceModel(None, None, knee)
    sel = (k > knee) & (prob > 0.0) & (prob < 1.0)
    if sel.sum() < 2:
        raise InvalidArgumentError("fewer than two partially present indices past the knee")
    slope, intercept = np.polyfit(k[sel], prob[sel], 1)
    return OccurrenceModel(float(slope), float(intercept), knee)


@dataclass(frozen=True)
class CountStats:
    """Normal summary of per-snapshot optimal cluster counts."""

    mu: float
    sigma: float
    n: int
    degenerate: bool
    fit: DistributionFit | None = None


def cluster_count_stats(k_sequence) -> CountStats:
    k = np.asarray(k_sequence, dtype=float)
    if k.size < 8:
        raise InvalidArgumentError("need at least 8 snapshots")
    try:
        fit = fit_distribution(k, "normal")
    except DegenerateSampleError:
        return CountStats(float(k[0]), 0.0, int(k.size), True, None)
    return CountStats(fit.params[0], fit.params[1], int(k.size), False, fit)
