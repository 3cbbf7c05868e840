"""Clustering-based tracking: associate clusters across snapshots into trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterSet
from .core import FLOOR_DB, MAX_DELAY_NS, SPEED_OF_LIGHT_M_PER_NS, Snapshot
from .distributions import DistributionFit, fit_distribution
from .errors import DegenerateSampleError, InvalidArgumentError, UndefinedSlopeError

DEFAULT_LINK_THRESHOLD = 0.1


@dataclass(frozen=True)
class TrackingWeights:
    w_d: float
    w_p: float
    w_tau: float

    def __post_init__(self):
        ws = (self.w_d, self.w_p, self.w_tau)
        if any(not (0.0 <= w <= 1.0) for w in ws):
            raise InvalidArgumentError("tracking weights must lie in [0, 1]")
        if not any(ws):
            raise InvalidArgumentError("tracking weights cannot all be zero")

    @classmethod
    def preset(cls, name: str) -> "TrackingWeights":
        try:
            return PRESETS[name]
        except KeyError:
            raise InvalidArgumentError(f"unknown weight preset {name!r}; choose from {sorted(PRESETS)}") from None

    def heuristic_slope(self) -> float:
        """Rough |a_dd| scale implied by the weights (diagnostic only)."""
        return math.inf if self.w_tau == 0 else self.w_d / self.w_tau


PRESETS = {
    "3d": TrackingWeights(0.05, 0.95, 0.95),
    "delay": TrackingWeights(0.05, 0.0, 0.95),
    "power": TrackingWeights(0.05, 0.95, 0.0),
}


@dataclass(frozen=True)
class ClusterFeature:
    """One cluster of one snapshot. ``norm_*`` fields are in [0, 1];
    ``delay_ns``/``power_db`` keep the raw values for slope diagnostics."""

    snapshot_index: int
    link_distance_m: float
    norm_distance: float
    norm_power: float
    norm_delay: float
    cluster_id: int
    delay_ns: float = math.nan
    power_db: float = math.nan

    def __post_init__(self):
        for name in ("norm_distance", "norm_power", "norm_delay"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidArgumentError(f"{name}={v} is not normalized to [0, 1]")

    @property
    def key(self) -> tuple:
        return (self.snapshot_index, self.cluster_id)

    def vector(self) -> np.ndarray:
        return np.array([self.norm_distance, self.norm_power, self.norm_delay])


def normalize_power(power_db, floor_db: float = FLOOR_DB):
    p = (np.asarray(power_db, dtype=float) - floor_db) / -floor_db
    return np.clip(p, 0.0, 1.0)


def make_features(
    snapshot_indices,
    link_distances,
    delays_ns,
    powers_db,
    cluster_ids=None,
    max_delay_ns: float = MAX_DELAY_NS,
    floor_db: float = FLOOR_DB,
) -> list:
    """Normalize raw per-cluster values into features.

    Distance is min-max scaled over the given distances; a record at a single
    distance maps every feature to 0.
    """
    idx = np.asarray(snapshot_indices, dtype=int)
    d = np.asarray(link_distances, dtype=float)
    tau = np.asarray(delays_ns, dtype=float)
    p = np.asarray(powers_db, dtype=float)
    n = idx.size
    if not (d.size == tau.size == p.size == n):
        raise InvalidArgumentError("feature arrays differ in length")
    if np.any(tau < 0) or np.any(tau > max_delay_ns):
        raise InvalidArgumentError(f"cluster delays must lie in [0, {max_delay_ns}] ns")
    if cluster_ids is None:
        cluster_ids = np.ones(n, dtype=int)
    cid = np.asarray(cluster_ids, dtype=int)
    span = float(np.ptp(d)) if n else 0.0
    nd = (d - d.min()) / span if span > 0 else np.zeros(n)
    npow = normalize_power(p, floor_db)
    return [
        ClusterFeature(int(idx[i]), float(d[i]), float(nd[i]), float(npow[i]), float(tau[i] / max_delay_ns),
                       int(cid[i]), float(tau[i]), float(p[i]))
        for i in range(n)
    ]


def build_features(pairs, max_delay_ns: float = MAX_DELAY_NS, floor_db: float = FLOOR_DB) -> list:
    """Features from ``(snapshot, ClusterSet)`` pairs.

    Cluster delay is the power-weighted centroid; cluster power is the summed
    member power in dB.
    """
    idx, dist, tau, pw, cid = [], [], [], [], []
    for snap, cs in pairs:
        if not isinstance(cs, ClusterSet) or not isinstance(snap, Snapshot):
            raise InvalidArgumentError("expected (Snapshot, ClusterSet) pairs")
        labels = np.asarray(cs.labels)
        lin = snap.powers
        for c in range(1, cs.k + 1):
            idx.append(snap.index)
            dist.append(snap.link_distance_m)
            tau.append(float(cs.centroids[c - 1]))
            pw.append(10.0 * math.log10(lin[labels == c].sum()))
            cid.append(c)
    return make_features(idx, dist, tau, pw, cid, max_delay_ns, floor_db)


def weighted_distance(a: ClusterFeature, b: ClusterFeature, w: TrackingWeights) -> float:
    return math.sqrt(
        w.w_d * (a.norm_distance - b.norm_distance) ** 2
        + w.w_p * (a.norm_power - b.norm_power) ** 2
        + w.w_tau * (a.norm_delay - b.norm_delay) ** 2
    )


def distance_matrix(features, w: TrackingWeights) -> np.ndarray:
    x = np.array([f.vector() for f in features]).reshape(-1, 3)
    sw = np.sqrt([w.w_d, w.w_p, w.w_tau])
    y = x * sw
    diff = y[:, None, :] - y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class Trajectory:
    members: tuple

    @property
    def survival_length_m(self) -> float:
        return self.members[-1].link_distance_m - self.members[0].link_distance_m

    @property
    def snapshot_indices(self) -> list:
        return [m.snapshot_index for m in self.members]

    def __len__(self):
        return len(self.members)


def track(features, w: TrackingWeights, link_threshold: float = DEFAULT_LINK_THRESHOLD) -> list:
    """Greedy globally-closest-pair association.

    Every cluster starts as its own trajectory. Candidate links join the last
    member of one trajectory to the first member of another whose snapshots
    all come later, so at most one member per snapshot survives any merge.
    Links are accepted in ascending distance while below ``link_threshold``;
    distances equal to 12 decimals tie and go to the lower
    (snapshot, cluster_id) pair. Snapshot gaps are allowed.
    """
    feats = list(features)
    if len({f.snapshot_index for f in feats}) < 2:
        raise InvalidArgumentError("tracking needs clusters from at least two snapshots")
    if len({f.key for f in feats}) != len(feats):
        raise InvalidArgumentError("duplicate (snapshot_index, cluster_id) in features")
    feats.sort(key=lambda f: f.key)
    n = len(feats)
    snap = np.array([f.snapshot_index for f in feats])
    D = distance_matrix(feats, w)
    iu, ju = np.triu_indices(n, k=1)
    dist = D[iu, ju]
    keep = (dist < link_threshold) & (snap[iu] != snap[ju])
    iu, ju, dist = iu[keep], ju[keep], dist[keep]
    # features are sorted by key, so (iu, ju) order is the tie-break
    pair_order = np.lexsort((ju, iu, np.round(dist, 12)))

    traj_of = list(range(n))
    chains = {i: [i] for i in range(n)}
    for p in pair_order:
        a, b = int(iu[p]), int(ju[p])
        if snap[a] > snap[b]:
            a, b = b, a
        ta, tb = traj_of[a], traj_of[b]
        if ta == tb:
            continue
        ca, cb = chains[ta], chains[tb]
        if ca[-1] != a or cb[0] != b:
            continue
        ca.extend(cb)
        for i in cb:
            traj_of[i] = ta
        del chains[tb]
    trajs = [Trajectory(tuple(feats[i] for i in c)) for c in chains.values()]
    trajs.sort(key=lambda t: t.members[0].key)
    return trajs


def slope_dd(traj: Trajectory) -> float:
    """Least-squares slope of raw cluster delay against link distance (ns/m)."""
    d = np.array([m.link_distance_m for m in traj.members])
    tau = np.array([m.delay_ns for m in traj.members])
    if d.size < 2 or np.ptp(d) == 0.0:
        raise UndefinedSlopeError("trajectory has no link-distance span")
    if not np.all(np.isfinite(tau)):
        raise InvalidArgumentError("trajectory members carry no raw delays")
    dc = d - d.mean()
    return float(np.dot(dc, tau - tau.mean()) / np.dot(dc, dc))


def ground_reflection_geometry(horizontal_m, h_a: float = 30.0, h_g: float = 0.5):
    """Direct link distance and ground-reflected path length for horizontal range D."""
    D = np.asarray(horizontal_m, dtype=float)
    d = np.sqrt((h_a - h_g) ** 2 + D**2)
    l = np.sqrt((h_a + h_g) ** 2 + D**2)
    return d, l


def ground_reflection_slope(d1: float, l1: float, d2: float, l2: float) -> float:
    """Excess-delay slope of the ground reflection between two positions (ns/m)."""
    if d2 == d1:
        raise UndefinedSlopeError("equal link distances")
    return ((l2 - l1) / (d2 - d1) - 1.0) / SPEED_OF_LIGHT_M_PER_NS


@dataclass(frozen=True)
class SurvivalSummary:
    lengths: np.ndarray
    fit: DistributionFit

    @property
    def mean_length(self) -> float:
        return float(self.lengths.mean())


def survival_lengths(trajectories) -> SurvivalSummary:
    """Per-trajectory survival lengths and a Weibull fit over the positive ones."""
    trajs = list(trajectories)
    if not trajs:
        raise InvalidArgumentError("no trajectories")
    s = np.array([t.survival_length_m for t in trajs], dtype=float)
    pos = s[s > 0]
    if pos.size == 0:
        raise DegenerateSampleError("every trajectory is a singleton")
    return SurvivalSummary(s, fit_distribution(pos, "weibull"))


def trajectory_rows(trajectories) -> list:
    """Flat rows for the trajectory report."""
    rows = []
    for n, t in enumerate(trajectories):
        try:
            a = slope_dd(t)
        except (UndefinedSlopeError, InvalidArgumentError):
            a = None
        rows.append(
            {
                "trajectory": n,
                "members": [[m.snapshot_index, m.cluster_id] for m in t.members],
                "survival_length_m": t.survival_length_m,
                "slope_dd_ns_per_m": a,
            }
        )
    return rows
