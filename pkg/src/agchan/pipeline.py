"""Record-level orchestration: estimate, cluster, characterize, fit parameters."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterSet, KSweep, cluster_members, exclude_los, sweep_k
from .core import FLOOR_DB, ChannelRecord, Snapshot, normalize_mpcs
from .distributions import DistributionFit, fit_distribution
from .errors import (
    AgChanError,
    DegenerateClusterError,
    InvalidArgumentError,
    NumericError,
    UndefinedKFactorError,
)
from .inter import (
    DELAY_INDEX_FIT,
    POWER_DELAY_FIT,
    CountStats,
    DoubleExponentialFit,
    OccurrenceModel,
    cluster_count_stats,
    fit_double_exponential,
    fit_occurrence,
)
from .intra import ClusterRectangle, cluster_k_factor, delay_offsets, rectangle, rms_delay_spread
from .params import ModelParameters
from .sage import EstimatorConfig, estimate_mpcs

log = logging.getLogger(__name__)


def estimate_record(cirs, distances, cfg: EstimatorConfig | None = None, metadata=None) -> ChannelRecord:
    """Run the estimator on every CIR and normalize each snapshot to its peak."""
    cfg = cfg or EstimatorConfig()
    if len(cirs) != len(distances):
        raise InvalidArgumentError("one link distance per CIR is required")
    snaps = []
    for i, (h, d) in enumerate(zip(cirs, distances)):
        mpcs = normalize_mpcs(estimate_mpcs(h, cfg), cfg.prune_floor_db)
        snaps.append(Snapshot(i, float(d), tuple(mpcs)))
    return ChannelRecord(
        tuple(snaps),
        max_delay_ns=(len(cirs[0]) - 1) * cfg.tap_spacing_ns if len(cirs) else 550.0,
        max_paths=cfg.max_paths,
        metadata=dict(metadata or {}),
    )


@dataclass
class SnapshotClustering:
    snapshot: Snapshot
    los: object
    sweep: KSweep | None
    k_db: int | None
    k_silhouette: int | None
    clusters: ClusterSet | None
    error: str | None = None

    @property
    def index(self) -> int:
        return self.snapshot.index


def cluster_snapshot(
    snapshot: Snapshot,
    k_min: int = 4,
    k_max: int = 10,
    criterion: str = "db",
    seed: int = 0,
    restarts: int = 10,
    db_rule: str = "min",
    los_margin_db: float = 5.0,
    zeta: float = 1.0,
) -> SnapshotClustering:
    """LOS split, K sweep and the clustering at the selected K.

    ``k_max`` is lowered to the number of available MPCs; a snapshot with
    fewer than ``k_min`` MPCs is reported with ``error`` set.
    """
    rest, los = exclude_los(snapshot, los_margin_db)
    hi = min(k_max, len(rest.mpcs))
    if hi < k_min:
        return SnapshotClustering(rest, los, None, None, None, None, f"only {len(rest.mpcs)} MPCs for k_min={k_min}")
    try:
        sw = sweep_k(rest, k_min, hi, seed=seed, restarts=restarts, zeta=zeta)
        kd = sw.select("db", db_rule)
        ks = sw.select("silhouette")
    except NumericError as exc:
        return SnapshotClustering(rest, los, None, None, None, None, str(exc))
    chosen = kd if criterion == "db" else ks
    return SnapshotClustering(rest, los, sw, kd, ks, sw.clusterings[chosen])


def cluster_record(record: ChannelRecord, **kw) -> list:
    seed = int(kw.pop("seed", 0))
    out = []
    for snap in record.snapshots:
        s = int(np.random.SeedSequence([seed, snap.index]).generate_state(1)[0])
        out.append(cluster_snapshot(snap, seed=s, **kw))
    return out


@dataclass
class ClusterRecord:
    """Descriptors of one cluster; fields are nan/None where undefined."""

    snapshot_index: int
    cluster_id: int
    member_count: int
    mean_delay_ns: float
    mean_power_db: float
    rectangle: ClusterRectangle | None
    k_factor_db: float
    rms_ds_ns: float

    def to_dict(self) -> dict:
        return {
            "snapshot_index": self.snapshot_index,
            "cluster_id": self.cluster_id,
            "member_count": self.member_count,
            "mean_delay_ns": self.mean_delay_ns,
            "mean_power_db": self.mean_power_db,
            "rectangle": None if self.rectangle is None else self.rectangle.to_dict(),
            "k_factor_db": None if math.isnan(self.k_factor_db) else self.k_factor_db,
            "rms_ds_ns": self.rms_ds_ns,
        }


def describe_clusters(sc: SnapshotClustering) -> list:
    out = []
    if sc.clusters is None:
        return out
    for cid, members in enumerate(cluster_members(sc.snapshot, sc.clusters), start=1):
        try:
            rect = rectangle(members)
        except DegenerateClusterError:
            rect = None
        try:
            kf = cluster_k_factor(members)
        except UndefinedKFactorError:
            kf = math.nan
        out.append(
            ClusterRecord(
                sc.index,
                cid,
                len(members),
                float(np.mean([m.delay_ns for m in members])),
                float(np.mean([m.power_db for m in members])),
                rect,
                kf,
                rms_delay_spread(members),
            )
        )
    return out


@dataclass
class Characterization:
    clusters: list
    samples: dict
    fits: dict
    k_db: list
    k_silhouette: list
    skipped: list = field(default_factory=list)

    def table(self) -> list:
        """Rows of (name, family, params, ks_statistic, ks_pass)."""
        return [
            {"name": n, **f.to_dict()} if isinstance(f, DistributionFit) else {"name": n, **f}
            for n, f in self.fits.items()
        ]

    def to_dict(self) -> dict:
        return {
            "clusters": [c.to_dict() for c in self.clusters],
            "table": self.table(),
            "samples": {k: list(map(float, v)) for k, v in self.samples.items()},
            "k_db": self.k_db,
            "k_silhouette": self.k_silhouette,
            "skipped": self.skipped,
        }


PARAMETER_FAMILIES = {
    "ray_unit_area": "weibull",
    "intra_decay": "weibull",
    "cluster_kf": "normal",
    "cluster_rms_ds": "lognormal",
    "delay_offset": "laplace",
}


def _try_fit(samples, family):
    try:
        return fit_distribution(samples, family)
    except (InvalidArgumentError, NumericError) as exc:
        log.warning("fit %s skipped: %s", family, exc)
        return None


def characterize(clusterings) -> Characterization:
    """Pool per-cluster descriptors over a record and fit the intra-cluster families."""
    recs, offsets, skipped = [], [], []
    kd, ks = [], []
    for sc in clusterings:
        if sc.clusters is None:
            skipped.append({"snapshot_index": sc.index, "reason": sc.error})
            continue
        kd.append(sc.k_db)
        ks.append(sc.k_silhouette)
        recs.extend(describe_clusters(sc))
        offsets.append(delay_offsets(sc.clusters, sc.snapshot))
    rects = [r.rectangle for r in recs if r.rectangle is not None]
    samples = {
        "ray_unit_area": np.array([r.ray_unit_area for r in rects if r.ray_unit_area > 0]),
        "intra_decay": np.array([r.slope_a for r in rects if r.slope_a > 0]),
        "cluster_kf": np.array([r.k_factor_db for r in recs if math.isfinite(r.k_factor_db)]),
        "cluster_rms_ds": np.array([r.rms_ds_ns for r in recs if r.rms_ds_ns > 0]),
        "delay_offset": np.concatenate(offsets) if offsets else np.empty(0),
        "rays_per_cluster": np.array([r.member_count for r in recs], dtype=float),
    }
    fits = {}
    for name, fam in PARAMETER_FAMILIES.items():
        f = _try_fit(samples[name], fam)
        if f is not None:
            fits[name] = f
    if samples["rays_per_cluster"].size:
        fits["rays_per_cluster"] = {"family": "mean", "params": [float(samples["rays_per_cluster"].mean())]}
    return Characterization(recs, samples, fits, kd, ks, skipped)


@dataclass
class InterFit:
    delay_index: DoubleExponentialFit | None
    power_delay: DoubleExponentialFit | None
    occurrence: OccurrenceModel | None
    count_db: CountStats | None
    count_silhouette: CountStats | None

    def to_dict(self) -> dict:
        def cs(c):
            return None if c is None else {"mu": c.mu, "sigma": c.sigma, "n": c.n, "degenerate": c.degenerate}

        return {
            "delay_index_fit": None if self.delay_index is None else self.delay_index.to_dict(),
            "power_delay_fit": None if self.power_delay is None else self.power_delay.to_dict(),
            "occurrence": None if self.occurrence is None else self.occurrence.to_dict(),
            "cluster_count_db": cs(self.count_db),
            "cluster_count_silhouette": cs(self.count_silhouette),
        }


def _guard(fn, *a):
    try:
        return fn(*a)
    except AgChanError as exc:
        log.warning("%s skipped: %s", getattr(fn, "__name__", fn), exc)
        return None


def fit_inter(ch: Characterization, kmax_index: int = 10) -> InterFit:
    """Inter-cluster fits from per-snapshot clusters ordered by delay.

    Cluster ``k`` of a snapshot is its k-th cluster in delay order; delay and
    power are averaged per index across snapshots.
    """
    by_index = {}
    n_snap = len(ch.k_db)
    for r in ch.clusters:
        by_index.setdefault(r.cluster_id, []).append((r.mean_delay_ns, r.mean_power_db))
    ks = sorted(by_index)
    tau = np.array([np.mean([t for t, _ in by_index[k]]) for k in ks])
    pw = np.array([np.mean([p for _, p in by_index[k]]) for k in ks])
    di = _guard(fit_double_exponential, np.array(ks, float) - 1.0, tau, DELAY_INDEX_FIT) if len(ks) >= 6 else None
    pd = _guard(fit_double_exponential, tau, pw, POWER_DELAY_FIT) if len(ks) >= 6 else None
    counts = np.zeros(max(kmax_index, max(ks, default=0)))
    for r in ch.clusters:
        counts[r.cluster_id - 1] += 1
    occ = _guard(fit_occurrence, counts, n_snap) if n_snap else None
    cdb = _guard(cluster_count_stats, ch.k_db)
    csi = _guard(cluster_count_stats, ch.k_silhouette)
    return InterFit(di, pd, occ, cdb, csi)


def fit_model_parameters(ch: Characterization, inter: InterFit | None = None, survival=None,
                         base: ModelParameters | None = None) -> ModelParameters:
    """Parameter document from fitted values; anything not fitted keeps ``base``."""
    base = base or ModelParameters()
    kw = base.to_dict()
    for name in PARAMETER_FAMILIES:
        f = ch.fits.get(name)
        if isinstance(f, DistributionFit):
            kw[name] = {"family": f.family, "params": list(f.params)}
    rays = ch.fits.get("rays_per_cluster")
    if rays:
        kw["rays_per_cluster_db"] = rays["params"][0]
    if inter is not None:
        if inter.delay_index is not None:
            kw["delay_index_fit"] = inter.delay_index.to_dict()
        if inter.power_delay is not None:
            kw["power_delay_fit"] = inter.power_delay.to_dict()
        if inter.occurrence is not None and not inter.occurrence.degenerate:
            kw["occurrence"] = inter.occurrence.to_dict()
        for attr, name in (("count_db", "cluster_count_db"), ("count_silhouette", "cluster_count_silhouette")):
            c = getattr(inter, attr)
            if c is not None:
                kw[name] = {"family": "normal", "params": [c.mu, c.sigma]}
    if survival is not None:
        kw["survival_length"] = {"family": "weibull", "params": list(survival.params)}
    return ModelParameters.from_dict(kw)

