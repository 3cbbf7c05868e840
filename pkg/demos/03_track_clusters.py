"""Follow clusters across a synthetic flight and look at how long they live.

Clusters are taken straight from the generator labels, so the tracker is
exercised without any estimation error upstream.

Run: python demos/03_track_clusters.py
"""

import numpy as np

from agchan.synthesis import ScenarioConfig, synthesize_record
from agchan.tracking import (
    TrackingWeights,
    make_features,
    survival_lengths,
    track,
    trajectory_rows,
)

sr = synthesize_record(cfg=ScenarioConfig(n_snapshots=120, rng_seed=4, los_present=False))

idx, dist, tau, pw, cid = [], [], [], [], []
for snap, labels in zip(sr.record.snapshots, sr.cluster_labels):
    d, p = snap.delays, snap.powers
    for k in np.unique(labels[labels > 0]):
        sel = labels == k
        idx.append(snap.index)
        dist.append(snap.link_distance_m)
        tau.append(float(np.average(d[sel], weights=p[sel])))
        pw.append(float(10 * np.log10(p[sel].sum())))
        cid.append(int(k))

feats = make_features(idx, dist, tau, pw, cid)
print(f"{len(feats)} cluster observations over {len(sr.record.snapshots)} snapshots")

for name in ("3d", "delay", "power"):
    trajs = track(feats, TrackingWeights.preset(name))
    surv = survival_lengths(trajs)
    print(f"weights {name:5s}: {len(trajs):4d} trajectories, mean survival {surv.mean_length:5.2f} m,"
          f" Weibull {np.round(surv.fit.params, 2).tolist()}")

rows = trajectory_rows(track(feats, TrackingWeights.preset("3d")))
longest = sorted(rows, key=lambda r: -r["survival_length_m"])[:5]
for r in longest:
    slope = "n/a" if r["slope_dd_ns_per_m"] is None else f"{r['slope_dd_ns_per_m']:+.3f} ns/m"
    print(f"trajectory {r['trajectory']:3d}: {len(r['members']):3d} snapshots,"
          f" {r['survival_length_m']:5.2f} m, delay slope {slope}")
