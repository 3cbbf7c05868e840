"""Readers and writers for the JSON documents and CDL CSV tables.

Every document carries a ``format`` tag and a ``version``. Non-finite
floats are written as ``null``. Writes go to a temporary file in the
target directory and are renamed into place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ChannelRecord, MultipathComponent, Snapshot
from .distributions import DistributionFit
from .errors import AgChanError, ParseError
from .params import ModelParameters
from .synthesis import cdl_from_csv, cdl_to_csv

VERSION = 1
FMT_RECORD = "agchan.snapshot_record"
FMT_CIR = "agchan.raw_cir"
FMT_CLUSTERING = "agchan.clustering_result"
FMT_CHARACTERIZATION = "agchan.characterization_report"
FMT_TRAJECTORY = "agchan.trajectory_report"
FMT_PARAMETERS = "agchan.model_parameters"
FMT_VALIDATION = "agchan.validation_report"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=1, allow_nan=False) + "\n"


def write_json(path, doc) -> None:
    atomic_write_text(path, dumps(doc))


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(path, "<file>", f"cannot read: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(path, "<root>", "expected a JSON object")
    return doc


class _Reader:
    """Field access that reports the dotted location of any problem."""

    def __init__(self, source):
        self.source = str(source)

    def fail(self, where, msg):
        raise ParseError(self.source, where, msg)

    def get(self, d, key, where):
        if not isinstance(d, dict):
            self.fail(where, "expected an object")
        if key not in d:
            self.fail(f"{where}.{key}" if where else key, "missing field")
        return d[key]

    def num(self, d, key, where, allow_null=False):
        v = self.get(d, key, where)
        loc = f"{where}.{key}" if where else key
        if v is None and allow_null:
            return math.nan
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(loc, f"expected a number, got {type(v).__name__}")
        return float(v)

    def int_(self, d, key, where, allow_null=False):
        v = self.get(d, key, where)
        loc = f"{where}.{key}" if where else key
        if v is None and allow_null:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(loc, f"expected an integer, got {type(v).__name__}")
        return int(v)

    def list_(self, d, key, where):
        v = self.get(d, key, where)
        if not isinstance(v, list):
            self.fail(f"{where}.{key}" if where else key, "expected a list")
        return v

    def header(self, doc, fmt):
        got = self.get(doc, "format", "")
        if got != fmt:
            self.fail("format", f"expected {fmt!r}, got {got!r}")
        ver = self.int_(doc, "version", "")
        if ver != VERSION:
            self.fail("version", f"unsupported version {ver}")


def _guard(source, build):
    try:
        return build()
    except ParseError:
        raise
    except (AgChanError, ValueError, TypeError, KeyError) as exc:
        raise ParseError(source, "<document>", str(exc)) from None


# ------------------------------------------------------------ snapshot record

def record_to_doc(rec: ChannelRecord) -> dict:
    return {
        "format": FMT_RECORD,
        "version": VERSION,
        "frequency_hz": rec.frequency_hz,
        "bandwidth_hz": rec.bandwidth_hz,
        "max_delay_ns": rec.max_delay_ns,
        "max_paths": rec.max_paths,
        "metadata": rec.metadata,
        "snapshots": [
            {
                "index": s.index,
                "distance_m": s.link_distance_m,
                "mpcs": [
                    {"delay_ns": m.delay_ns, "power_db": m.power_db, "phase_rad": m.phase_rad, "path_id": m.path_id}
                    for m in s.mpcs
                ],
            }
            for s in rec.snapshots
        ],
    }


def record_from_doc(doc: dict, source="<memory>") -> ChannelRecord:
    r = _Reader(source)
    r.header(doc, FMT_RECORD)
    snaps = []
    for i, s in enumerate(r.list_(doc, "snapshots", "")):
        w = f"snapshots[{i}]"
        mpcs = []
        for j, m in enumerate(r.list_(s, "mpcs", w)):
            mw = f"{w}.mpcs[{j}]"
            pid = m.get("path_id", j) if isinstance(m, dict) else j
            mpcs.append(
                _guard(source, lambda m=m, mw=mw, pid=pid: MultipathComponent.from_power_db(
                    r.num(m, "delay_ns", mw), r.num(m, "power_db", mw), r.num(m, "phase_rad", mw), pid))
            )
        snaps.append(_guard(source, lambda s=s, w=w, mpcs=mpcs: Snapshot(
            r.int_(s, "index", w), r.num(s, "distance_m", w), tuple(mpcs))))
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        r.fail("metadata", "expected an object")
    return _guard(source, lambda: ChannelRecord(
        tuple(snaps),
        frequency_hz=r.num(doc, "frequency_hz", ""),
        bandwidth_hz=r.num(doc, "bandwidth_hz", ""),
        max_delay_ns=r.num(doc, "max_delay_ns", ""),
        max_paths=r.int_(doc, "max_paths", "", allow_null=True),
        metadata=meta,
    ))


def write_record(path, rec: ChannelRecord) -> None:
    write_json(path, record_to_doc(rec))


def read_record(path) -> ChannelRecord:
    return record_from_doc(read_json(path), path)


# -------------------------------------------------------------------- raw CIR

@dataclass
class RawCir:
    tap_spacing_ns: float
    indices: list
    distances: list
    taps: list
    metadata: dict = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, RawCir)
            and self.tap_spacing_ns == other.tap_spacing_ns
            and list(self.indices) == list(other.indices)
            and list(self.distances) == list(other.distances)
            and len(self.taps) == len(other.taps)
            and all(np.array_equal(a, b) for a, b in zip(self.taps, other.taps))
            and self.metadata == other.metadata
        )


def cir_to_doc(c: RawCir) -> dict:
    return {
        "format": FMT_CIR,
        "version": VERSION,
        "tap_spacing_ns": c.tap_spacing_ns,
        "metadata": c.metadata,
        "snapshots": [
            {"index": i, "distance_m": d, "taps": [{"re": float(z.real), "im": float(z.imag)} for z in h]}
            for i, d, h in zip(c.indices, c.distances, c.taps)
        ],
    }


def cir_from_doc(doc: dict, source="<memory>") -> RawCir:
    r = _Reader(source)
    r.header(doc, FMT_CIR)
    ts = r.num(doc, "tap_spacing_ns", "")
    if not ts > 0:
        r.fail("tap_spacing_ns", "must be > 0")
    idx, dist, taps = [], [], []
    for i, s in enumerate(r.list_(doc, "snapshots", "")):
        w = f"snapshots[{i}]"
        idx.append(r.int_(s, "index", w))
        dist.append(r.num(s, "distance_m", w))
        h = [complex(r.num(t, "re", f"{w}.taps[{j}]"), r.num(t, "im", f"{w}.taps[{j}]"))
             for j, t in enumerate(r.list_(s, "taps", w))]
        taps.append(np.array(h, dtype=complex))
    return RawCir(ts, idx, dist, taps, dict(doc.get("metadata", {})))


def write_cir(path, c: RawCir) -> None:
    write_json(path, cir_to_doc(c))


def read_cir(path) -> RawCir:
    return cir_from_doc(read_json(path), path)


# ---------------------------------------------------------- clustering result

@dataclass
class ClusteringEntry:
    snapshot_index: int
    k: int | None
    k_db: int | None
    k_silhouette: int | None
    db: dict
    silhouette: dict
    labels: list
    path_ids: list
    centroids: list
    los_path_id: int | None = None
    error: str | None = None


def clustering_entries(results) -> list:
    """Flatten :class:`agchan.pipeline.SnapshotClustering` values."""
    out = []
    for sc in results:
        cs = sc.clusters
        out.append(
            ClusteringEntry(
                sc.index,
                None if cs is None else cs.k,
                sc.k_db,
                sc.k_silhouette,
                {} if sc.sweep is None else {int(k): float(v) for k, v in sc.sweep.db.items()},
                {} if sc.sweep is None else {int(k): float(v) for k, v in sc.sweep.silhouette.items()},
                [] if cs is None else list(cs.labels),
                [] if cs is None else list(cs.path_ids),
                [] if cs is None else list(cs.centroids),
                None if sc.los is None else sc.los.path_id,
                sc.error,
            )
        )
    return out


def clustering_to_doc(entries, metadata=None) -> dict:
    return {
        "format": FMT_CLUSTERING,
        "version": VERSION,
        "metadata": metadata or {},
        "snapshots": [e.__dict__ for e in entries],
    }


def clustering_from_doc(doc: dict, source="<memory>") -> tuple:
    r = _Reader(source)
    r.header(doc, FMT_CLUSTERING)
    out = []
    for i, s in enumerate(r.list_(doc, "snapshots", "")):
        w = f"snapshots[{i}]"

        def kdict(key):
            v = r.get(s, key, w)
            if not isinstance(v, dict):
                r.fail(f"{w}.{key}", "expected an object")
            try:
                return {int(k): (math.nan if x is None else float(x)) for k, x in v.items()}
            except (TypeError, ValueError):
                r.fail(f"{w}.{key}", "expected integer keys and numeric values")

        labels = r.list_(s, "labels", w)
        pids = r.list_(s, "path_ids", w)
        cents = r.list_(s, "centroids", w)
        if len(labels) != len(pids):
            r.fail(f"{w}.labels", "labels and path_ids differ in length")
        out.append(
            ClusteringEntry(
                r.int_(s, "snapshot_index", w),
                r.int_(s, "k", w, allow_null=True),
                r.int_(s, "k_db", w, allow_null=True),
                r.int_(s, "k_silhouette", w, allow_null=True),
                kdict("db"),
                kdict("silhouette"),
                [int(v) for v in labels],
                [int(v) for v in pids],
                [float(v) for v in cents],
                r.int_(s, "los_path_id", w, allow_null=True),
                s.get("error"),
            )
        )
    return out, dict(doc.get("metadata", {}))


def write_clustering(path, entries, metadata=None) -> None:
    write_json(path, clustering_to_doc(entries, metadata))


def read_clustering(path) -> tuple:
    return clustering_from_doc(read_json(path), path)


# --------------------------------------------------------- trajectory report

@dataclass
class TrajectoryReport:
    rows: list
    fit: DistributionFit | None
    weights: dict
    link_threshold: float
    metadata: dict = field(default_factory=dict)


def trajectory_to_doc(rep: TrajectoryReport) -> dict:
    return {
        "format": FMT_TRAJECTORY,
        "version": VERSION,
        "weights": rep.weights,
        "link_threshold": rep.link_threshold,
        "metadata": rep.metadata,
        "survival_fit": None if rep.fit is None else rep.fit.to_dict(),
        "trajectories": rep.rows,
    }


def trajectory_from_doc(doc: dict, source="<memory>") -> TrajectoryReport:
    r = _Reader(source)
    r.header(doc, FMT_TRAJECTORY)
    rows = []
    for i, t in enumerate(r.list_(doc, "trajectories", "")):
        w = f"trajectories[{i}]"
        members = r.list_(t, "members", w)
        for j, m in enumerate(members):
            if not (isinstance(m, list) and len(m) == 2 and all(isinstance(x, int) for x in m)):
                r.fail(f"{w}.members[{j}]", "expected [snapshot_index, cluster_id]")
        slope = t.get("slope_dd_ns_per_m")
        rows.append({
            "trajectory": r.int_(t, "trajectory", w),
            "members": members,
            "survival_length_m": r.num(t, "survival_length_m", w),
            "slope_dd_ns_per_m": None if slope is None else r.num(t, "slope_dd_ns_per_m", w),
        })
    fit = doc.get("survival_fit")
    fit = None if fit is None else _guard(source, lambda: DistributionFit.from_dict(fit))
    weights = r.get(doc, "weights", "")
    return TrajectoryReport(rows, fit, weights, r.num(doc, "link_threshold", ""), dict(doc.get("metadata", {})))


def trajectory_to_csv(rep: TrajectoryReport) -> str:
    lines = ["trajectory,snapshot_index,cluster_id,survival_length_m,slope_dd_ns_per_m"]
    for t in rep.rows:
        slope = "" if t["slope_dd_ns_per_m"] is None else repr(t["slope_dd_ns_per_m"])
        for s, c in t["members"]:
            lines.append(f"{t['trajectory']},{s},{c},{t['survival_length_m']!r},{slope}")
    return "\n".join(lines) + "\n"


def write_trajectory(path, rep: TrajectoryReport) -> None:
    write_json(path, trajectory_to_doc(rep))


def read_trajectory(path) -> TrajectoryReport:
    return trajectory_from_doc(read_json(path), path)


# ------------------------------------------------------- parameter document

def parameters_to_doc(p: ModelParameters) -> dict:
    return {"format": FMT_PARAMETERS, "version": VERSION, "parameters": p.to_dict()}


def parameters_from_doc(doc: dict, source="<memory>") -> ModelParameters:
    r = _Reader(source)
    r.header(doc, FMT_PARAMETERS)
    body = r.get(doc, "parameters", "")
    if not isinstance(body, dict):
        r.fail("parameters", "expected an object")
    try:
        return ModelParameters.from_dict(body)
    except KeyError as exc:
        r.fail(f"parameters.{exc.args[0]}", "missing field")
    except (AgChanError, ValueError, TypeError) as exc:
        r.fail("parameters", str(exc))


def write_parameters(path, p: ModelParameters) -> None:
    write_json(path, parameters_to_doc(p))


def read_parameters(path) -> ModelParameters:
    return parameters_from_doc(read_json(path), path)


# ------------------------------------------------------------------ CDL CSV

def write_cdl(path, entries) -> None:
    atomic_write_text(path, cdl_to_csv(entries))


def read_cdl(path) -> list:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(path, "<file>", f"cannot read: {exc.strerror or exc}") from None
    return cdl_from_csv(text, str(path))

