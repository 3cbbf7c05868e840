"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid argument, 3 malformed input
file, 4 numeric or degenerate data, 5 validation failure. On failure a
one-line JSON error record is written to stderr. Log verbosity comes from
the ``AGCHAN_LOG_LEVEL`` environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import io as aio
from .clustering import ClusterSet
from .core import Snapshot
from .errors import AgChanError, InvalidArgumentError, NumericError, ParseError, ValidationFailure
from .params import DEFAULT_PARAMETERS
from .pipeline import (
    SnapshotClustering,
    characterize,
    cluster_record,
    estimate_record,
    fit_inter,
    fit_model_parameters,
)
from .sage import EstimatorConfig
from .synthesis import LOS_EXCESS_DB, ScenarioConfig, cdl_report, emit_cdl, synthesize_record, validate
from .tracking import PRESETS, TrackingWeights, build_features, survival_lengths, track, trajectory_rows

log = logging.getLogger("agchan")

DEFAULT_SEED = 1
EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4, 5
COMMANDS = ("estimate", "cluster", "characterize", "track", "fit", "synthesize", "cdl", "validate")


@dataclass(frozen=True)
class Option:
    flag: str
    dest: str
    type: object
    default: object
    help: str
    choices: tuple | None = None
    required: bool = False
    action: str | None = None


_IN = Option("--input", "input", Path, None, "input file", required=True)
_OUT = Option("--output", "output", Path, None, "output file", required=True)
_SEED = Option("--seed", "seed", int, DEFAULT_SEED, "random seed, recorded in output metadata")
_CLUSTERING = Option("--clustering", "clustering", Path, None,
                     "clustering result from `cluster`; clusters afresh when omitted")
_CLUSTER_OPTS = (
    Option("--k-min", "k_min", int, 4, "smallest candidate cluster count"),
    Option("--k-max", "k_max", int, 10, "largest candidate cluster count"),
    Option("--criterion", "criterion", str, "db", "validity index selecting K", choices=("db", "silhouette")),
    Option("--db-rule", "db_rule", str, "min", "Davies-Bouldin selection rule", choices=("min", "max")),
    Option("--restarts", "restarts", int, 10, "KPM restarts per candidate K"),
    Option("--los-margin-db", "los_margin_db", float, 5.0, "LOS split margin over the runner-up MPC (dB)"),
)
_TRACK_OPTS = (
    Option("--weights", "weights", str, "3d", "tracking weight preset", choices=tuple(PRESETS)),
    Option("--w-d", "w_d", float, None, "override link-distance weight"),
    Option("--w-p", "w_p", float, None, "override power weight"),
    Option("--w-tau", "w_tau", float, None, "override delay weight"),
    Option("--threshold", "threshold", float, 0.1, "association threshold (normalized units)"),
)

SCHEMA = {
    "estimate": (
        _IN, _OUT,
        Option("--max-paths", "max_paths", int, 50, "paths per snapshot"),
        Option("--floor-db", "floor_db", float, -30.0, "prune floor relative to the strongest path (dB)"),
        Option("--max-iterations", "max_iterations", int, 50, "estimator sweeps"),
    ),
    "cluster": (_IN, _OUT, _SEED) + _CLUSTER_OPTS,
    "characterize": (_IN, _OUT, _SEED, _CLUSTERING) + _CLUSTER_OPTS,
    "track": (_IN, _OUT, _SEED, _CLUSTERING) + _CLUSTER_OPTS + _TRACK_OPTS + (
        Option("--csv", "csv", Path, None, "also write the trajectory table as CSV"),
    ),
    "fit": (_IN, _OUT, _SEED, _CLUSTERING) + _CLUSTER_OPTS + _TRACK_OPTS,
    "synthesize": (
        _OUT, _SEED,
        Option("--params", "params", Path, None, "model parameter document (defaults built in)"),
        Option("--cir-output", "cir_output", Path, None, "also write rebuilt CIRs"),
        Option("--n-snapshots", "n_snapshots", int, 100, "snapshots along the route"),
        Option("--d-start", "d_start", float, 10.0, "first link distance (m)"),
        Option("--d-end", "d_end", float, 50.0, "last link distance (m)"),
        Option("--los-excess-db", "los_excess_db", float, LOS_EXCESS_DB, "LOS power above the first cluster (dB)"),
        Option("--no-los", "no_los", bool, False, "omit the LOS path", action="store_true"),
        Option("--criterion", "criterion", str, "db", "parameter set for rays per cluster", choices=("db", "silhouette")),
        Option("--untruncated", "untruncated", bool, False, "do not truncate delay offsets", action="store_true"),
    ),
    "cdl": (
        _OUT,
        Option("--params", "params", Path, None, "model parameter document (defaults built in)"),
        Option("--n-clusters", "n_clusters", int, 10, "cluster rows"),
        Option("--los-excess-db", "los_excess_db", float, LOS_EXCESS_DB, "LOS power above the first cluster (dB)"),
        Option("--report", "report", Path, None, "comparison report against the reference table"),
    ),
    "validate": (_IN, Option("--output", "output", Path, None, "report file (stdout when omitted)")),
}


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    output: Path | None = None
    seed: int = DEFAULT_SEED
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgumentError(f"unknown command {self.command!r}")
        if self.input is not None and not Path(self.input).exists():
            raise InvalidArgumentError(f"input file {self.input} does not exist")

    def opt(self, name):
        if name in self.options:
            return self.options[name]
        for o in SCHEMA[self.command]:
            if o.dest == name:
                return o.default
        raise KeyError(name)


EPILOG = "exit codes: 0 success, 2 usage/invalid argument, 3 parse error, 4 numeric/degenerate, 5 validation failure"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agchan", description="Cluster-based air-to-ground channel toolkit.", epilog=EPILOG)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "estimate": "estimate MPCs from raw CIRs",
        "cluster": "cluster MPCs of every snapshot",
        "characterize": "intra-cluster descriptors and distribution fits",
        "track": "associate clusters across snapshots",
        "fit": "fit a model parameter document from a record",
        "synthesize": "generate a synthetic record",
        "cdl": "emit a clustered delay line table",
        "validate": "whole-link K-factor and delay-spread check",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name], description=helps[name], epilog=EPILOG)
        for o in SCHEMA[name]:
            if o.action:
                sp.add_argument(o.flag, dest=o.dest, action=o.action, help=o.help)
            else:
                sp.add_argument(o.flag, dest=o.dest, type=o.type, default=o.default, choices=o.choices,
                                required=o.required, help=o.help + ("" if o.required else " (default: %(default)s)"))
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = dict(vars(ns))
    cmd = d.pop("command")
    inp, out, seed = d.pop("input", None), d.pop("output", None), d.pop("seed", DEFAULT_SEED)
    return RunConfig(cmd, inp, out, seed, d)


def _clusterings(cfg: RunConfig, record):
    path = cfg.opt("clustering")
    if path is None:
        return cluster_record(
            record,
            seed=cfg.seed,
            k_min=cfg.opt("k_min"),
            k_max=cfg.opt("k_max"),
            criterion=cfg.opt("criterion"),
            restarts=cfg.opt("restarts"),
            db_rule=cfg.opt("db_rule"),
            los_margin_db=cfg.opt("los_margin_db"),
        )
    entries, _ = aio.read_clustering(path)
    by_index = {s.index: s for s in record.snapshots}
    out = []
    for e in entries:
        snap = by_index.get(e.snapshot_index)
        if snap is None:
            raise ParseError(path, f"snapshot_index={e.snapshot_index}", "not present in the record")
        los = None
        if e.los_path_id is not None:
            los = next((m for m in snap.mpcs if m.path_id == e.los_path_id), None)
        rest = Snapshot(snap.index, snap.link_distance_m, tuple(m for m in snap.mpcs if m is not los))
        cs = None
        if e.k is not None:
            pos = {m.path_id: i for i, m in enumerate(rest.mpcs)}
            try:
                labels = [0] * len(rest.mpcs)
                for pid, lab in zip(e.path_ids, e.labels):
                    labels[pos[pid]] = lab
            except KeyError as exc:
                raise ParseError(path, f"snapshots[{e.snapshot_index}].path_ids", f"unknown path id {exc.args[0]}") from None
            cs = ClusterSet(snap.index, tuple(labels), tuple(e.centroids), tuple(m.path_id for m in rest.mpcs))
        out.append(SnapshotClustering(rest, los, None, e.k_db, e.k_silhouette, cs, e.error))
    return out


def _weights(cfg: RunConfig) -> TrackingWeights:
    base = TrackingWeights.preset(cfg.opt("weights"))
    return TrackingWeights(
        *(base_v if cfg.opt(n) is None else cfg.opt(n) for n, base_v in
          (("w_d", base.w_d), ("w_p", base.w_p), ("w_tau", base.w_tau)))
    )


def _tracking(cfg, record, clusterings):
    pairs = [(sc.snapshot, sc.clusters) for sc in clusterings if sc.clusters is not None]
    w = _weights(cfg)
    trajs = track(build_features(pairs, record.max_delay_ns), w, cfg.opt("threshold"))
    return w, trajs


def _meta(cfg: RunConfig, **extra) -> dict:
    return {"command": cfg.command, "seed": cfg.seed, "input": None if cfg.input is None else str(cfg.input), **extra}


def _params(cfg):
    path = cfg.opt("params")
    return DEFAULT_PARAMETERS if path is None else aio.read_parameters(path)


def cmd_estimate(cfg: RunConfig) -> int:
    raw = aio.read_cir(cfg.input)
    est = EstimatorConfig(
        max_paths=cfg.opt("max_paths"),
        prune_floor_db=cfg.opt("floor_db"),
        max_iterations=cfg.opt("max_iterations"),
        tap_spacing_ns=raw.tap_spacing_ns,
    )
    rec = estimate_record(raw.taps, raw.distances, est, _meta(cfg))
    rec = type(rec)(
        tuple(Snapshot(i, s.link_distance_m, s.mpcs) for i, s in zip(raw.indices, rec.snapshots)),
        rec.frequency_hz, 1e9 / raw.tap_spacing_ns, rec.max_delay_ns, rec.max_paths, rec.metadata,
    )
    aio.write_record(cfg.output, rec)
    return EXIT_OK


def cmd_cluster(cfg: RunConfig) -> int:
    rec = aio.read_record(cfg.input)
    res = _clusterings(RunConfig(cfg.command, cfg.input, cfg.output, cfg.seed, {**cfg.options, "clustering": None}), rec)
    aio.write_clustering(cfg.output, aio.clustering_entries(res), _meta(cfg))
    return EXIT_OK


def cmd_characterize(cfg: RunConfig) -> int:
    rec = aio.read_record(cfg.input)
    ch = characterize(_clusterings(cfg, rec))
    inter = fit_inter(ch)
    doc = {"format": aio.FMT_CHARACTERIZATION, "version": aio.VERSION, "metadata": _meta(cfg),
           **ch.to_dict(), "inter": inter.to_dict()}
    aio.write_json(cfg.output, doc)
    return EXIT_OK


def cmd_track(cfg: RunConfig) -> int:
    rec = aio.read_record(cfg.input)
    w, trajs = _tracking(cfg, rec, _clusterings(cfg, rec))
    try:
        fit = survival_lengths(trajs).fit
    except (NumericError, InvalidArgumentError) as exc:
        log.warning("no survival fit: %s", exc)
        fit = None
    rep = aio.TrajectoryReport(trajectory_rows(trajs), fit, w.__dict__, cfg.opt("threshold"),
                               _meta(cfg, heuristic_slope_ns_per_m=w.heuristic_slope()))
    aio.write_trajectory(cfg.output, rep)
    if cfg.opt("csv") is not None:
        aio.atomic_write_text(cfg.opt("csv"), aio.trajectory_to_csv(rep))
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    rec = aio.read_record(cfg.input)
    cl = _clusterings(cfg, rec)
    ch = characterize(cl)
    _, trajs = _tracking(cfg, rec, cl)
    try:
        surv = survival_lengths(trajs).fit
    except (NumericError, InvalidArgumentError) as exc:
        log.warning("survival length not fitted: %s", exc)
        surv = None
    aio.write_parameters(cfg.output, fit_model_parameters(ch, fit_inter(ch), surv))
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig) -> int:
    sc = ScenarioConfig(
        d_start_m=cfg.opt("d_start"),
        d_end_m=cfg.opt("d_end"),
        n_snapshots=cfg.opt("n_snapshots"),
        los_present=not cfg.opt("no_los"),
        los_excess_db=cfg.opt("los_excess_db"),
        rng_seed=cfg.seed,
        criterion=cfg.opt("criterion"),
        truncate_offsets=not cfg.opt("untruncated"),
    )
    syn = synthesize_record(_params(cfg), sc)
    aio.write_record(cfg.output, syn.record)
    if cfg.opt("cir_output") is not None:
        raw = aio.RawCir(sc.tap_spacing_ns, [s.index for s in syn.record.snapshots],
                         list(syn.record.link_distances), syn.cirs(), {"seed": cfg.seed})
        aio.write_cir(cfg.opt("cir_output"), raw)
    return EXIT_OK


def cmd_cdl(cfg: RunConfig) -> int:
    entries = emit_cdl(_params(cfg), cfg.opt("n_clusters"), cfg.opt("los_excess_db"))
    aio.write_cdl(cfg.output, entries)
    rep = cdl_report(entries)
    if rep.diverges:
        log.warning("generated cluster delays diverge from the reference table")
    if cfg.opt("report") is not None:
        aio.write_json(cfg.opt("report"), rep.to_dict())
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    rec = aio.read_record(cfg.input)
    rep = validate(rec, seed=rec.metadata.get("seed"))
    doc = {"format": aio.FMT_VALIDATION, "version": aio.VERSION, **rep.to_dict()}
    if cfg.output is None:
        sys.stdout.write(aio.dumps(doc))
    else:
        aio.write_json(cfg.output, doc)
    if not rep.passed:
        raise ValidationFailure(
            f"mean K-factor {rep.mean_k_factor_db:.2f} dB (pass={rep.k_pass}), "
            f"mean RMS DS {rep.mean_rms_ds_ns:.2f} ns (pass={rep.ds_pass})"
        )
    return EXIT_OK


HANDLERS = {
    "estimate": cmd_estimate,
    "cluster": cmd_cluster,
    "characterize": cmd_characterize,
    "track": cmd_track,
    "fit": cmd_fit,
    "synthesize": cmd_synthesize,
    "cdl": cmd_cdl,
    "validate": cmd_validate,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, ValidationFailure):
        return EXIT_VALIDATION
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_USAGE


def _error_record(exc: BaseException, code: int) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ParseError):
        rec.update(path=exc.path, field=exc.field)
    return json.dumps(rec)


def run(cfg: RunConfig) -> int:
    try:
        return HANDLERS[cfg.command](cfg)
    except AgChanError as exc:
        code = exit_code_for(exc)
        print(_error_record(exc, code), file=sys.stderr)
        return code


def main(argv=None) -> int:
    level = os.environ.get("AGCHAN_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
    except AgChanError as exc:
        code = exit_code_for(exc)
        print(_error_record(exc, code), file=sys.stderr)
        return code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
