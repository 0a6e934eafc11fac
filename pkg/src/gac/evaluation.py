"""Accuracy metrics, energy/accuracy sweeps and GeoJSON export.

RMSE pairs estimates with the true location at the same instant.  Each
synchronization window contributes its first ``N = floor(T_Gsync / T)``
estimates (the sync-instant estimate included); squared haversine errors are
pooled over all windows of a run before the square root.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Iterable, Mapping, Sequence, Union

from .energy import PowerProfile, SchemeKind, average_current_mA
from .errors import DomainError
from .estimators import (
    EstimatorConfig,
    LocationEstimate,
    Source,
    run_enloc,
    run_gac,
    run_gps_only,
)
from .geodesy import GeoPoint, haversine_distance_m
from .synth import GroundTruth, NoiseModel, Scenario, generate_truth, render_trace
from .traces import GpsFix, Trace

DEFAULT_TGSYNC_S = (10.0, 20.0, 30.0, 60.0, 120.0, 240.0, 480.0)

TruthLike = Union[GroundTruth, Mapping[int, GeoPoint], Sequence[GpsFix]]


@dataclass(frozen=True)
class ErrorSample:
    t_ms: int
    h_m: float
    since_sync_ms: int = 0


@dataclass(frozen=True, order=True)
class SweepRecord:
    scheme: str
    T_Gsync_s: float
    seed: int
    rmse_m: float
    avg_current_mA: float


def _truth_map(truth: TruthLike) -> Mapping[int, GeoPoint]:
    if isinstance(truth, GroundTruth):
        return truth.by_time()
    if isinstance(truth, Mapping):
        return truth
    return {f.t_ms: f.pos for f in truth}


def sync_windows(
    estimates: Iterable[LocationEstimate], T_Gsync_s: float, T_s: float
) -> list[list[LocationEstimate]]:
    """Split estimates into synchronization windows of at most N estimates.

    Where several estimates share a timestamp the GPS-sync one wins, then the
    latest emitted.  Estimates before the first sync are not scored.
    """
    n = math.floor(T_Gsync_s / T_s + 1e-9)
    if n < 1:
        raise DomainError(f"T_Gsync_s={T_Gsync_s} shorter than T_s={T_s}")
    span_ms = round(n * T_s * 1000.0)
    at: dict[int, LocationEstimate] = {}
    for e in estimates:
        cur = at.get(e.t_ms)
        if cur is None or cur.source is not Source.GPS_SYNC or e.source is Source.GPS_SYNC:
            at[e.t_ms] = e
    times = sorted(at)
    starts = [t for t in times if at[t].source is Source.GPS_SYNC]
    windows = []
    j = 0
    for k, t0 in enumerate(starts):
        end = t0 + span_ms
        if k + 1 < len(starts):
            end = min(end, starts[k + 1])
        while j < len(times) and times[j] < t0:
            j += 1
        win = []
        while j < len(times) and times[j] < end:
            win.append(at[times[j]])
            j += 1
        windows.append(win)
    return windows


def error_samples(
    estimates: Iterable[LocationEstimate],
    truth: TruthLike,
    T_Gsync_s: float,
    T_s: float,
    warmup_windows: int = 0,
) -> list[ErrorSample]:
    """Haversine error of every scored estimate that has a true location.

    The first ``warmup_windows`` sync windows are left out.
    """
    ref = _truth_map(truth)
    out = []
    for win in sync_windows(estimates, T_Gsync_s, T_s)[warmup_windows:]:
        if not win:
            continue
        t0 = win[0].t_ms
        for e in win:
            p = ref.get(e.t_ms)
            if p is not None:
                out.append(ErrorSample(e.t_ms, haversine_distance_m(e.pos, p), e.t_ms - t0))
    return out


def rmse_from_errors(errors: Iterable[float]) -> float:
    sq = [h * h for h in errors]
    if not sq:
        raise DomainError("no estimate is aligned with a true location")
    return math.sqrt(math.fsum(sq) / len(sq))


def rmse_m(
    estimates: Iterable[LocationEstimate],
    truth: TruthLike,
    T_Gsync_s: float,
    T_s: float,
    warmup_windows: int = 0,
) -> float:
    errs = error_samples(estimates, truth, T_Gsync_s, T_s, warmup_windows)
    return rmse_from_errors(e.h_m for e in errs)


# ---------------------------------------------------------------------------
# sweeps


def estimate(
    scheme: SchemeKind, trace: Trace, T_Gsync_s: float, config: EstimatorConfig
) -> list[LocationEstimate]:
    if scheme is SchemeKind.GPS_CONTINUOUS:
        return run_gps_only(trace)
    cfg = replace(config, T_Gsync_s=T_Gsync_s)
    if scheme is SchemeKind.ENLOC:
        return run_enloc(trace, cfg)
    return run_gac(trace, cfg)


@dataclass(frozen=True)
class _Job:
    source: Scenario | Trace
    truth: TruthLike | None
    schemes: tuple[SchemeKind, ...]
    T_Gsync_values: tuple[float, ...]
    seed: int
    noise: NoiseModel
    config: EstimatorConfig
    profile: PowerProfile
    gps_period_s: float
    warmup_windows: int


def _run_seed(job: _Job) -> list[SweepRecord]:
    T_s = job.config.T_s
    if isinstance(job.source, Scenario):
        truth = job.truth if job.truth is not None else generate_truth(job.source, T_s)
        trace = render_trace(
            truth,
            replace(job.noise, seed=job.seed),
            T_s,
            job.gps_period_s,
            job.profile.fix_duration_s,
            job.source.name,
        )
    else:
        trace = job.source
        truth = job.truth if job.truth is not None else trace.gps_stream

    out = []
    for T in job.T_Gsync_values:
        cache: dict[str, float] = {}
        for scheme in job.schemes:
            current = average_current_mA(scheme, T, job.profile)
            key = "gac" if scheme in (SchemeKind.GAC, SchemeKind.GAC_ACC_FREE) else scheme.value
            if key not in cache:
                ests = estimate(scheme, trace, T, job.config)
                cache[key] = rmse_m(ests, truth, T, T_s, job.warmup_windows)
            out.append(SweepRecord(scheme.value, float(T), job.seed, cache[key], current))
    return out


def run_sweep(
    source: Scenario | Trace,
    schemes: Sequence[SchemeKind],
    T_Gsync_values: Sequence[float],
    seeds: Sequence[int],
    *,
    truth: TruthLike | None = None,
    noise: NoiseModel = NoiseModel(),
    config: EstimatorConfig = EstimatorConfig(),
    profile: PowerProfile = PowerProfile(),
    gps_period_s: float = 1.0,
    warmup_windows: int = 1,
    jobs: int = 1,
) -> list[SweepRecord]:
    """One record per (scheme, T_Gsync, seed), sorted by that key.

    A Scenario is rendered once per seed with ``noise`` reseeded; a Trace is
    used as-is for every seed and, without ``truth``, scored against its own
    GPS fixes.  By default the first sync window is not scored: EnLoc cannot
    predict before its second fix, and every scheme is compared on the same
    span.
    """
    if not T_Gsync_values or not schemes or not seeds:
        return []
    for T in T_Gsync_values:
        if not T >= config.T_s:
            raise DomainError(f"T_Gsync_s={T} shorter than the sampling interval {config.T_s}")
    if isinstance(source, Scenario) and truth is None:
        truth = generate_truth(source, config.T_s)
    work = [
        _Job(source, truth, tuple(schemes), tuple(float(t) for t in T_Gsync_values), int(s),
             noise, config, profile, gps_period_s, warmup_windows)
        for s in seeds
    ]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_seed, work))
    else:
        parts = [_run_seed(j) for j in work]
    records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: (r.scheme, r.T_Gsync_s, r.seed))


SWEEP_HEADER = ("scheme", "T_Gsync_s", "seed", "rmse_m", "avg_current_mA")


def write_sweep_csv(records: Iterable[SweepRecord], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in records:
        w.writerow([r.scheme, repr(r.T_Gsync_s), r.seed, repr(r.rmse_m), repr(r.avg_current_mA)])


def read_sweep_csv(source: IO[str]) -> list[SweepRecord]:
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != SWEEP_HEADER:
        raise DomainError(f"sweep CSV header must be {','.join(SWEEP_HEADER)}")
    return [
        SweepRecord(row["scheme"], float(row["T_Gsync_s"]), int(row["seed"]),
                    float(row["rmse_m"]), float(row["avg_current_mA"]))
        for row in reader
    ]


def mean_rmse(records: Iterable[SweepRecord]) -> dict[tuple[str, float], float]:
    """Seed-averaged RMSE per (scheme, T_Gsync)."""
    groups: dict[tuple[str, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.scheme, r.T_Gsync_s), []).append(r.rmse_m)
    return {k: math.fsum(v) / len(v) for k, v in groups.items()}


# ---------------------------------------------------------------------------
# GeoJSON


def _line_feature(coords: list[list[float]], role: str, **props) -> dict:
    if len(coords) == 1:
        geometry = {"type": "Point", "coordinates": coords[0]}
    else:
        geometry = {"type": "LineString", "coordinates": coords}
    return {"type": "Feature", "geometry": geometry, "properties": {"role": role, **props}}


def geojson_collection(
    estimates: Sequence[LocationEstimate],
    truth: TruthLike,
    fixes: Sequence[GpsFix] | None = None,
) -> dict:
    """Feature collection with the true track, the estimated track and the
    positions where the estimator synchronized.  Coordinates are [lon, lat]."""
    if isinstance(truth, GroundTruth):
        truth_pts = [(p.t_ms, p.pos) for p in truth.points]
    else:
        truth_pts = sorted(_truth_map(truth).items())
    features = []
    if truth_pts:
        features.append(
            _line_feature([[p.lon_deg, p.lat_deg] for _, p in truth_pts], "truth",
                          t_start_ms=truth_pts[0][0], t_end_ms=truth_pts[-1][0])
        )
    if estimates:
        features.append(
            _line_feature([[e.pos.lon_deg, e.pos.lat_deg] for e in estimates], "estimate",
                          t_start_ms=estimates[0].t_ms, t_end_ms=estimates[-1].t_ms)
        )
        if fixes is None:
            sync = [e for e in estimates if e.source is Source.GPS_SYNC]
            fix_coords = [[e.pos.lon_deg, e.pos.lat_deg] for e in sync]
        else:
            fix_coords = [[f.pos.lon_deg, f.pos.lat_deg] for f in fixes]
        if fix_coords:
            features.append(_line_feature(fix_coords, "fixes", count=len(fix_coords)))
    return {"type": "FeatureCollection", "features": features}


def export_geojson(
    estimates: Sequence[LocationEstimate],
    truth: TruthLike,
    sink: IO[str],
    fixes: Sequence[GpsFix] | None = None,
) -> None:
    json.dump(geojson_collection(estimates, truth, fixes), sink, indent=1)
    sink.write("\n")


def geojson_string(estimates, truth, fixes=None) -> str:
    buf = io.StringIO()
    export_geojson(estimates, truth, buf, fixes)
    return buf.getvalue()
