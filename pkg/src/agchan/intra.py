"""Per-cluster descriptors: rectangles, K-factor, RMS delay spread, delay offsets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .clustering import ClusterSet
from .core import Snapshot
from .errors import DegenerateClusterError, InvalidArgumentError, UndefinedKFactorError


@dataclass(frozen=True)
class ClusterRectangle:
    """Bounding box of a cluster in the (delay, power) plane.

    ``slope_a`` is the decay rate from the box extremes and ``intercept_b``
    places the line ``P = -a*tau + b`` through the cluster mean point.
    ``ls_slope`` is the negated least-squares slope over the members, kept
    for diagnostics only.
    """

    tau_min: float
    tau_max: float
    p_min: float
    p_max: float
    slope_a: float
    intercept_b: float
    area_b: float
    ray_unit_area: float
    member_count: int
    mean_delay: float
    mean_power_db: float
    ls_slope: float

    @property
    def delay_range(self) -> float:
        return self.tau_max - self.tau_min

    def to_dict(self) -> dict:
        return asdict(self)


def _arrays(members):
    if len(members) == 0:
        raise InvalidArgumentError("cluster has no members")
    tau = np.array([m.delay_ns for m in members], dtype=float)
    p_db = np.array([m.power_db for m in members], dtype=float)
    return tau, p_db


def rectangle(members) -> ClusterRectangle:
    tau, p = _arrays(members)
    if len(members) < 2 or np.ptp(tau) == 0.0:
        raise DegenerateClusterError("rectangle needs at least two members with distinct delays")
    t0, t1 = float(tau.min()), float(tau.max())
    p0, p1 = float(p.min()), float(p.max())
    a = (p1 - p0) / (t1 - t0)
    mean_t, mean_p = float(tau.mean()), float(p.mean())
    area = (t1 - t0) * (p1 - p0)
    dt = tau - mean_t
    ss = float(np.dot(dt, dt))
    # subnormal delay spans underflow the sum of squares
    ls = -float(np.dot(dt, p - mean_p)) / ss if ss > 0 else math.nan
    return ClusterRectangle(
        tau_min=t0,
        tau_max=t1,
        p_min=p0,
        p_max=p1,
        slope_a=a,
        intercept_b=mean_p + a * mean_t,
        area_b=area,
        ray_unit_area=area / len(members),
        member_count=len(members),
        mean_delay=mean_t,
        mean_power_db=mean_p,
        ls_slope=ls,
    )


def k_factor_db(powers) -> float:
    """Strongest-to-rest power ratio in dB (linear powers in)."""
    p = np.asarray(powers, dtype=float)
    if p.size < 2:
        raise UndefinedKFactorError("K-factor needs at least two components")
    top = p.max()
    rest = p.sum() - top
    if rest <= 0.0:
        raise UndefinedKFactorError("all power sits in a single component")
    return float(10.0 * math.log10(top / rest))


def cluster_k_factor(members) -> float:
    return k_factor_db([m.power for m in members])


def mean_delay(delays, powers) -> float:
    w = np.asarray(powers, dtype=float)
    return float(np.sum(w * np.asarray(delays, dtype=float)) / w.sum())


def delay_spread(delays, powers) -> float:
    """Power-weighted RMS delay spread (linear powers)."""
    tau = np.asarray(delays, dtype=float)
    w = np.asarray(powers, dtype=float)
    if tau.size == 0:
        raise InvalidArgumentError("no components")
    mu = np.sum(w * tau) / w.sum()
    var = np.sum(w * (tau - mu) ** 2) / w.sum()
    return float(math.sqrt(max(var, 0.0)))


def rms_delay_spread(members) -> float:
    if len(members) == 0:
        raise InvalidArgumentError("cluster has no members")
    return delay_spread([m.delay_ns for m in members], [m.power for m in members])


def delay_offsets(clusters: ClusterSet, snapshot: Snapshot, min_members: int = 2) -> np.ndarray:
    """Member delay minus the unweighted mean delay of its cluster, pooled.

    Clusters with fewer than ``min_members`` members are skipped.
    """
    tau = snapshot.delays
    labels = np.asarray(clusters.labels)
    out = []
    for c in range(1, clusters.k + 1):
        t = tau[labels == c]
        if t.size >= min_members:
            out.append(t - t.mean())
    return np.concatenate(out) if out else np.empty(0)
