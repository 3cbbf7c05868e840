"""K-Power-Means clustering of snapshot MPCs in the delay domain.

Distances are multipath component distances (MCD) restricted to delay::

    MCD(tau_i, tau_j) = zeta * |tau_i - tau_j| / dtau_max * tau_std / dtau_max

with ``dtau_max`` the delay span of the snapshot and ``tau_std`` the
population standard deviation of its delays. Assignment minimises the
power-weighted MCD to each centroid; centroids are power-weighted mean delays.

A K-Means baseline on the (delay ns, power dB) plane, the Davies-Bouldin and
Silhouette validity indices and a K sweep complete the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import Snapshot
from .errors import DegenerateClusteringError, DegenerateSnapshotError, InvalidArgumentError


@dataclass(frozen=True)
class DelayStats:
    delta_tau_max: float
    tau_std: float
    zeta: float = 1.0

    def __post_init__(self):
        if self.tau_std < 0:
            raise InvalidArgumentError("tau_std must be >= 0")

    @classmethod
    def from_delays(cls, delays, zeta: float = 1.0) -> "DelayStats":
        d = np.asarray(delays, dtype=float)
        if d.size == 0:
            raise InvalidArgumentError("no delays")
        return cls(float(d.max() - d.min()), float(d.std()), float(zeta))

    @property
    def scale(self) -> float:
        """Factor turning ``|tau_i - tau_j|`` (ns) into MCD."""
        if not self.delta_tau_max > 0:
            raise DegenerateSnapshotError("all delays are identical; MCD is undefined")
        return self.zeta * self.tau_std / self.delta_tau_max**2


def mcd_delay(tau_i, tau_j, stats: DelayStats):
    """Delay-domain MCD between two delays (broadcasts over arrays)."""
    out = stats.scale * np.abs(np.asarray(tau_i, dtype=float) - np.asarray(tau_j, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ClusterSet:
    """Clustering of one snapshot.

    ``labels[i]`` is the cluster id (1..k) of the i-th MPC in snapshot order;
    ids are ordered by ascending centroid delay.
    """

    snapshot_index: int
    labels: tuple
    centroids: tuple
    path_ids: tuple
    objective: float = math.nan
    method: str = "kpm"
    centroid_powers_db: tuple = ()
    histories: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", tuple(float(c) for c in self.centroids))
        object.__setattr__(self, "path_ids", tuple(int(p) for p in self.path_ids))
        k = len(self.centroids)
        if len(labels) != len(self.path_ids):
            raise InvalidArgumentError("labels and path_ids differ in length")
        if set(labels) != set(range(1, k + 1)):
            raise InvalidArgumentError("every cluster id 1..k must own at least one MPC")

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def assignments(self) -> dict:
        return dict(zip(self.path_ids, self.labels))

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.labels) == cluster_id)

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.labels), minlength=self.k + 1)[1:]


def cluster_members(snapshot: Snapshot, clusters: ClusterSet) -> list:
    """MPC lists per cluster, in id order."""
    return [[snapshot.mpcs[i] for i in clusters.members(c)] for c in range(1, clusters.k + 1)]


def exclude_los(snapshot: Snapshot, margin_db: float = 5.0):
    """Split off the LOS path if the strongest MPC dominates the runner-up by ``margin_db``.

    Returns ``(snapshot_without_los, los_mpc_or_None)``.
    """
    if len(snapshot.mpcs) < 2:
        return snapshot, None
    p = snapshot.powers_db
    order = np.argsort(p)[::-1]
    if p[order[0]] - p[order[1]] >= margin_db:
        i = int(order[0])
        rest = [m for j, m in enumerate(snapshot.mpcs) if j != i]
        return snapshot.with_mpcs(rest), snapshot.mpcs[i]
    return snapshot, None


def _check_k(snapshot, k):
    n = len(snapshot.mpcs)
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    if k > n:
        raise InvalidArgumentError(f"k={k} exceeds the number of MPCs ({n})")


def _seed_centroids(points, weights, k, rng):
    """Power-weighted k-means++ seeding over distinct points (rows of ``points``)."""
    uniq = np.unique(points, axis=0)
    if uniq.shape[0] < k:
        raise InvalidArgumentError(f"only {uniq.shape[0]} distinct MPCs for k={k}")
    # weight of a distinct point = total weight of MPCs sitting on it
    idx = np.unique(points, axis=0, return_inverse=True)[1].ravel()
    wu = np.bincount(idx, weights=weights, minlength=uniq.shape[0])
    chosen = [int(rng.choice(uniq.shape[0], p=wu / wu.sum()))]
    d2 = np.sum((uniq - uniq[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        prob = wu * d2
        prob[chosen] = 0.0
        if prob.sum() <= 0.0:
            free = np.setdiff1d(np.arange(uniq.shape[0]), chosen)
            nxt = int(rng.choice(free))
        else:
            nxt = int(rng.choice(uniq.shape[0], p=prob / prob.sum()))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((uniq - uniq[nxt]) ** 2, axis=1))
    return uniq[chosen]


def _repair_empty(labels, cost, k, moved=None):
    """Hand each empty cluster the MPC that is worst served by its own cluster.

    ``moved`` collects ``(cluster, mpc)`` pairs so callers can reseed centroids.
    """
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        own = cost[np.arange(labels.size), labels].copy()
        own[sizes[labels] < 2] = -np.inf
        i = int(np.argmax(own))
        labels[i] = j
        if moved is not None:
            moved.append((j, i))
    return labels


def _kpm_run(x, w, c0, scale, max_iter):
    c = np.sort(c0)
    k = c.size
    history = []
    labels = None
    for _ in range(max_iter):
        dist = scale * np.abs(x[:, None] - c[None, :])
        cost = w[:, None] * dist
        moved = []
        labels = _repair_empty(np.argmin(cost, axis=1), cost, k, moved)
        if moved:
            # reseeding on the moved MPC zeroes its cost, keeping the descent
            c = c.copy()
            for j, i in moved:
                c[j] = x[i]
        history.append(_objective(x, w, c, labels, scale))
        sw = np.bincount(labels, weights=w, minlength=k)
        new_c = np.bincount(labels, weights=w * x, minlength=k) / sw
        if np.array_equal(new_c, c):
            break
        order = np.argsort(new_c, kind="stable")
        c = new_c[order]
    else:
        cost = w[:, None] * scale * np.abs(x[:, None] - c[None, :])
        labels = _repair_empty(np.argmin(cost, axis=1), cost, k)
    return labels, c, _objective(x, w, c, labels, scale), history


def _objective(x, w, c, labels, scale):
    # power-weighted squared MCD: the quantity the mean-update iteration descends
    return float(np.sum(w * (scale * (x - c[labels])) ** 2))


def kpm_cluster(
    snapshot: Snapshot,
    k: int,
    seed: int = 0,
    restarts: int = 10,
    zeta: float = 1.0,
    max_iter: int = 300,
) -> ClusterSet:
    """K-Power-Means clustering under the delay MCD.

    MPCs go to the centroid with the smallest power-weighted MCD and
    centroids move to the power-weighted mean delay of their members,
    until the centroids stop moving. That iteration is a descent on
    ``sum_l P_l * MCD(x_l, c)^2``, which is reported as ``objective``; each
    run's objective after every assignment step is kept in
    ``ClusterSet.histories`` and the best of ``restarts`` runs wins.
    """
    _check_k(snapshot, k)
    x = snapshot.delays
    w = snapshot.powers
    stats = DelayStats.from_delays(x, zeta)
    scale = stats.scale
    best = None
    histories = []
    for child in np.random.SeedSequence(seed).spawn(max(1, restarts)):
        rng = np.random.default_rng(child)
        c0 = _seed_centroids(x[:, None], w, k, rng)[:, 0]
        labels, c, obj, hist = _kpm_run(x, w, c0, scale, max_iter)
        histories.append(tuple(hist))
        if best is None or obj < best[2]:
            best = (labels, c, obj)
    labels, c, obj = best
    return ClusterSet(
        snapshot_index=snapshot.index,
        labels=tuple(labels + 1),
        centroids=tuple(c),
        path_ids=tuple(m.path_id for m in snapshot.mpcs),
        objective=obj,
        method="kpm",
        histories=tuple(histories),
    )


def km_cluster(snapshot: Snapshot, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> ClusterSet:
    """Plain K-Means on (delay ns, power dB) with unweighted 2-D Euclidean distance."""
    _check_k(snapshot, k)
    X = np.column_stack([snapshot.delays, snapshot.powers_db])
    if np.ptp(X[:, 0]) == 0.0:
        raise DegenerateSnapshotError("all delays are identical")
    ones = np.ones(X.shape[0])
    best = None
    for child in np.random.SeedSequence(seed).spawn(max(1, restarts)):
        rng = np.random.default_rng(child)
        c = _seed_centroids(X, ones, k, rng)
        for _ in range(max_iter):
            cost = np.sqrt(((X[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
            labels = _repair_empty(np.argmin(cost, axis=1), cost, k)
            new_c = np.array([X[labels == j].mean(axis=0) for j in range(k)])
            if np.array_equal(new_c, c):
                break
            c = new_c
        cost = np.sqrt(((X[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
        obj = float(cost[np.arange(X.shape[0]), labels].sum())
        if best is None or obj < best[2]:
            best = (labels, c, obj)
    labels, c, obj = best
    order = np.lexsort((c[:, 1], c[:, 0]))
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(k)
    return ClusterSet(
        snapshot_index=snapshot.index,
        labels=tuple(remap[labels] + 1),
        centroids=tuple(c[order, 0]),
        path_ids=tuple(m.path_id for m in snapshot.mpcs),
        objective=obj,
        method="km",
        centroid_powers_db=tuple(c[order, 1]),
    )


def _index_inputs(snapshot, clusters, zeta):
    if clusters.k < 2:
        raise InvalidArgumentError("validity indices need k >= 2")
    if len(clusters.labels) != len(snapshot.mpcs):
        raise InvalidArgumentError("clustering does not match snapshot")
    x = snapshot.delays
    stats = DelayStats.from_delays(x, zeta)
    return x, np.asarray(clusters.labels), np.asarray(clusters.centroids), stats


def db_index(snapshot: Snapshot, clusters: ClusterSet, zeta: float = 1.0) -> float:
    """Davies-Bouldin index under the delay MCD (lower is better)."""
    x, labels, c, stats = _index_inputs(snapshot, clusters, zeta)
    k = clusters.k
    S = np.array([mcd_delay(x[labels == i + 1], c[i], stats).mean() for i in range(k)])
    d = mcd_delay(c[:, None], c[None, :], stats)
    off = ~np.eye(k, dtype=bool)
    if np.any(d[off] == 0.0):
        raise DegenerateClusteringError("two cluster centroids coincide")
    ratio = np.where(off, (S[:, None] + S[None, :]) / np.where(off, d, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


def silhouette_index(snapshot: Snapshot, clusters: ClusterSet, zeta: float = 1.0) -> float:
    """Mean silhouette under the delay MCD; MPCs in singleton clusters score 0."""
    x, labels, _, stats = _index_inputs(snapshot, clusters, zeta)
    D = mcd_delay(x[:, None], x[None, :], stats)
    k = clusters.k
    sizes = np.bincount(labels, minlength=k + 1)
    # sums[l, j] = total distance from MPC l to members of cluster j+1
    onehot = labels[:, None] == np.arange(1, k + 1)[None, :]
    sums = D @ onehot
    own = sizes[labels]
    a = sums[np.arange(x.size), labels - 1] / np.maximum(own - 1, 1)
    mean_other = np.where(onehot, np.inf, sums / sizes[1:][None, :])
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


@dataclass
class KSweep:
    """KPM runs and validity indices for every candidate K of one snapshot."""

    snapshot_index: int
    clusterings: dict
    db: dict
    silhouette: dict

    @property
    def k_values(self):
        return sorted(self.clusterings)

    def select(self, criterion: str = "db", db_rule: str = "min") -> int:
        ks = self.k_values
        if len(ks) == 1:
            return ks[0]
        if criterion == "db":
            if db_rule not in ("min", "max"):
                raise InvalidArgumentError(f"db_rule must be 'min' or 'max', got {db_rule!r}")
            vals = np.array([self.db[k] for k in ks])
            vals = vals if db_rule == "min" else -vals
        elif criterion == "silhouette":
            vals = -np.array([self.silhouette[k] for k in ks])
        else:
            raise InvalidArgumentError(f"unknown criterion {criterion!r}")
        vals = np.where(np.isfinite(vals), vals, np.inf)
        return ks[int(np.argmin(vals))]


def sweep_k(
    snapshot: Snapshot,
    k_min: int = 4,
    k_max: int = 10,
    seed: int = 0,
    restarts: int = 10,
    zeta: float = 1.0,
) -> KSweep:
    if not 1 <= k_min <= k_max:
        raise InvalidArgumentError(f"need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max > len(snapshot.mpcs):
        raise InvalidArgumentError(f"k_max={k_max} exceeds the number of MPCs ({len(snapshot.mpcs)})")
    clusterings, db, sil = {}, {}, {}
    for k in range(k_min, k_max + 1):
        cs = kpm_cluster(snapshot, k, seed=_k_seed(seed, k), restarts=restarts, zeta=zeta)
        clusterings[k] = cs
        if k_min == k_max or k < 2:
            db[k] = sil[k] = math.nan
        else:
            db[k] = db_index(snapshot, cs, zeta)
            sil[k] = silhouette_index(snapshot, cs, zeta)
    return KSweep(snapshot.index, clusterings, db, sil)


def _k_seed(seed, k):
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0])


def optimal_k(
    snapshot: Snapshot,
    k_min: int = 4,
    k_max: int = 10,
    criterion: str = "db",
    seed: int = 0,
    restarts: int = 10,
    db_rule: str = "min",
) -> int:
    """Cluster count chosen by DB (argmin by default) or Silhouette (argmax)."""
    if k_min == k_max:
        _check_k(snapshot, k_min)
        return k_min
    return sweep_k(snapshot, k_min, k_max, seed=seed, restarts=restarts).select(criterion, db_rule)
