"""Location estimators replayed over a trace.

``run_gac`` dead-reckons between duty-cycled GPS fixes: every sensor sample
advances the position by ``l = v*T + a*T**2/2`` along the compass heading
(Vincenty direct) and the speed by ``a*T``; every scheduled fix resets
position and speed.  ``run_enloc`` linearly extrapolates the last two
scheduled fixes and ``run_gps_only`` passes every fix through.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import IO, Iterable, Sequence

from .errors import DomainError
from .geodesy import GeoPoint, normalize_bearing, vincenty_direct, vincenty_inverse
from .traces import GpsFix, SensorSample, Trace, merged_records

GRAVITY_MPS2 = 9.80665
GRAVITY_TOLERANCE = 0.2

Matrix3 = tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]
IDENTITY: Matrix3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class Phase(enum.Enum):
    AWAITING_FIX = "awaiting-fix"
    DEAD_RECKONING = "dead-reckoning"
    SYNCHRONIZING = "synchronizing"


class Source(enum.Enum):
    DEAD_RECKONED = "dead-reckoned"
    GPS_SYNC = "gps-sync"
    PREDICTED = "predicted"


@dataclass(frozen=True)
class EstimatorConfig:
    T_s: float = 0.25
    T_Gsync_s: float = 60.0
    smoothing_window: int = 4
    const_speed_threshold_mps: float = 0.5
    orientation_correction_enabled: bool = True

    def __post_init__(self):
        if not (self.T_s > 0 and self.T_Gsync_s >= self.T_s):
            raise DomainError(f"need T_Gsync_s >= T_s > 0, got T_s={self.T_s} T_Gsync_s={self.T_Gsync_s}")
        if self.smoothing_window < 1:
            raise DomainError("smoothing_window must be >= 1")
        if self.const_speed_threshold_mps < 0:
            raise DomainError("const_speed_threshold_mps must be >= 0")

    @property
    def T_ms(self) -> int:
        return round(self.T_s * 1000.0)

    @property
    def T_Gsync_ms(self) -> int:
        return round(self.T_Gsync_s * 1000.0)


@dataclass(frozen=True)
class EstimatorState:
    pos: GeoPoint
    speed_mps: float
    phase: Phase = Phase.AWAITING_FIX
    t_ms: int = 0
    smoothing_buffer: tuple[tuple[tuple[float, float, float], float], ...] = ()
    gravity_estimate_mps2: tuple[float, float, float] | None = None
    correction: Matrix3 | None = None
    last_sync_t_ms: int = 0


@dataclass(frozen=True)
class LocationEstimate:
    t_ms: int
    pos: GeoPoint
    speed_mps: float
    source: Source


# ---------------------------------------------------------------------------
# helpers


def circular_mean_deg(angles: Sequence[float]) -> float:
    first = angles[0]
    if all(a == first for a in angles):
        return first
    s = math.fsum(math.sin(math.radians(a)) for a in angles)
    c = math.fsum(math.cos(math.radians(a)) for a in angles)
    return normalize_bearing(math.degrees(math.atan2(s, c)))


def _mean_vec(vecs: Sequence[tuple[float, float, float]]) -> tuple[float, float, float]:
    first = vecs[0]
    if all(v == first for v in vecs):
        return first
    n = len(vecs)
    return tuple(math.fsum(v[i] for v in vecs) / n for i in range(3))


def _matvec(m: Matrix3, v: Sequence[float]) -> tuple[float, float, float]:
    return tuple(r[0] * v[0] + r[1] * v[1] + r[2] * v[2] for r in m)


def gravity_alignment(gravity: Sequence[float]) -> Matrix3:
    """Smallest rotation taking the measured gravity direction onto (0, 0, -1)."""
    n = math.sqrt(sum(x * x for x in gravity))
    if n == 0.0:
        raise DomainError("gravity vector has zero length")
    ux, uy, uz = (x / n for x in gravity)
    # v = u x (0, 0, -1); c = u . (0, 0, -1)
    vx, vy, vz = -uy, ux, 0.0
    c = -uz
    s2 = vx * vx + vy * vy
    if s2 == 0.0:
        if c > 0:
            return IDENTITY
        return ((1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, -1.0))
    k = (1.0 - c) / s2
    # R = I + [v]x + k [v]x^2
    return (
        (1.0 - k * vy * vy, -vz + k * vx * vy, vy + k * vx * vz),
        (vz + k * vx * vy, 1.0 - k * vx * vx, -vx + k * vy * vz),
        (-vy + k * vx * vz, vx + k * vy * vz, 1.0 - k * (vx * vx + vy * vy)),
    )


def along_track_accel(accel: Sequence[float], correction: Matrix3 | None) -> float:
    """Signed acceleration along the direction of travel.

    The reading is levelled by ``correction`` when one is known, gravity is
    removed, and the forward (device y) component is returned; the forward
    axis is the compass heading because the phone is fixed to the vehicle.
    """
    if correction is not None:
        accel = _matvec(correction, accel)
    # once levelled, gravity sits entirely on z and leaves the forward axis untouched
    return accel[1]


def schedule_fixes(fixes: Iterable[GpsFix], T_Gsync_s: float) -> list[GpsFix]:
    """Fixes the duty-cycled receiver actually delivers: the first fix, then
    the first fix at or after each previous used fix plus ``T_Gsync_s``."""
    period = round(T_Gsync_s * 1000.0)
    used: list[GpsFix] = []
    for f in fixes:
        if not used or f.t_ms >= used[-1].t_ms + period:
            used.append(f)
    return used


# ---------------------------------------------------------------------------
# GAC


def gac_init(fix: GpsFix, config: EstimatorConfig | None = None) -> EstimatorState:
    return EstimatorState(
        pos=fix.pos,
        speed_mps=fix.speed_mps,
        phase=Phase.DEAD_RECKONING,
        t_ms=fix.t_ms,
        last_sync_t_ms=fix.t_ms,
    )


def gac_step(
    state: EstimatorState, sample: SensorSample, config: EstimatorConfig
) -> tuple[EstimatorState, LocationEstimate]:
    if state.phase is not Phase.DEAD_RECKONING:
        raise DomainError(f"gac_step needs the dead-reckoning phase, state is {state.phase.value}")
    buf = (state.smoothing_buffer + ((sample.accel_mps2, sample.heading_deg),))
    buf = buf[-config.smoothing_window:]
    accel = _mean_vec([b[0] for b in buf])
    heading = circular_mean_deg([b[1] for b in buf])

    correction = state.correction if config.orientation_correction_enabled else None
    a = along_track_accel(accel, correction)
    T = config.T_s
    v = state.speed_mps
    dist = v * T + 0.5 * a * T * T
    if dist < 0.0:
        dist = 0.0
        v = 0.0
    pos = vincenty_direct(state.pos, heading, dist)
    speed = max(0.0, v + a * T)
    t = sample.t_ms + config.T_ms
    new = replace(state, pos=pos, speed_mps=speed, t_ms=t, smoothing_buffer=buf)
    return new, LocationEstimate(t, pos, speed, Source.DEAD_RECKONED)


def gac_sync(state: EstimatorState, fix: GpsFix) -> EstimatorState:
    if state.phase is Phase.AWAITING_FIX:
        raise DomainError("cannot synchronize before initialization; use gac_init")
    return replace(
        state,
        pos=fix.pos,
        speed_mps=fix.speed_mps,
        phase=Phase.DEAD_RECKONING,
        t_ms=fix.t_ms,
        smoothing_buffer=(),
        last_sync_t_ms=fix.t_ms,
    )


def detect_constant_speed(fix_window: Sequence[GpsFix], threshold_mps: float = 0.5) -> bool:
    if len(fix_window) < 2:
        raise DomainError("constant-speed detection needs at least two fixes")
    speeds = [f.speed_mps for f in fix_window]
    return max(speeds) - min(speeds) <= threshold_mps


def update_orientation_correction(
    state: EstimatorState, samples_during_const_speed: Sequence[SensorSample]
) -> EstimatorState:
    """Re-estimate the device tilt from a constant-speed stretch.

    At constant speed the mean reading is gravity alone.  A mean whose norm is
    more than 20% away from g means the stretch was not quiet; the state is
    returned unchanged.
    """
    if not samples_during_const_speed:
        return state
    n = len(samples_during_const_speed)
    g = tuple(math.fsum(s.accel_mps2[i] for s in samples_during_const_speed) / n for i in range(3))
    norm = math.sqrt(sum(x * x for x in g))
    if abs(norm - GRAVITY_MPS2) > GRAVITY_TOLERANCE * GRAVITY_MPS2:
        return state
    return replace(state, gravity_estimate_mps2=g, correction=gravity_alignment(g))


def _initial_fix(trace: Trace) -> GpsFix:
    if not trace.gps_stream:
        raise DomainError("trace has no GPS fix to initialize from")
    return trace.gps_stream[0]


def run_gac(trace: Trace, config: EstimatorConfig) -> list[LocationEstimate]:
    """Replay the trace through the GAC state machine.

    Samples before the first fix are dropped.  Fixes between scheduled ones
    are not used for position but do feed the constant-speed detector.
    """
    _initial_fix(trace)
    used = {f.t_ms for f in schedule_fixes(trace.gps_stream, config.T_Gsync_s)}
    state: EstimatorState | None = None
    out: list[LocationEstimate] = []
    window_fixes: list[GpsFix] = []
    window_samples: list[SensorSample] = []

    for rec in merged_records(trace):
        if isinstance(rec, GpsFix):
            if state is None:
                state = gac_init(rec, config)
            elif rec.t_ms in used:
                window_fixes.append(rec)
                state = replace(state, phase=Phase.SYNCHRONIZING)
                if (
                    config.orientation_correction_enabled
                    and detect_constant_speed(window_fixes, config.const_speed_threshold_mps)
                ):
                    state = update_orientation_correction(state, window_samples)
                state = gac_sync(state, rec)
            else:
                window_fixes.append(rec)
                continue
            window_fixes = [rec]
            window_samples = []
            out.append(LocationEstimate(rec.t_ms, rec.pos, rec.speed_mps, Source.GPS_SYNC))
        elif state is not None:
            state, est = gac_step(state, rec, config)
            window_samples.append(rec)
            out.append(est)
    return out


# ---------------------------------------------------------------------------
# baselines


def enloc_extrapolate(prev: GpsFix, last: GpsFix, t_ms: int) -> GeoPoint:
    """Linear extrapolation in latitude/longitude through two fixes."""
    span = last.t_ms - prev.t_ms
    r = (t_ms - last.t_ms) / span
    dlon = last.pos.lon_deg - prev.pos.lon_deg
    dlon = (dlon + 180.0) % 360.0 - 180.0
    lat = last.pos.lat_deg + r * (last.pos.lat_deg - prev.pos.lat_deg)
    return GeoPoint(max(-90.0, min(90.0, lat)), last.pos.lon_deg + r * dlon)


def run_enloc(trace: Trace, config: EstimatorConfig) -> list[LocationEstimate]:
    """EnLoc simple linear predictor on the same fix schedule as GAC.

    Estimates are emitted on the sensor timeline so both schemes are scored
    at the same instants; until the second scheduled fix the first is held.
    """
    _initial_fix(trace)
    used = {f.t_ms for f in schedule_fixes(trace.gps_stream, config.T_Gsync_s)}
    prev: GpsFix | None = None
    last: GpsFix | None = None
    speed = 0.0
    out: list[LocationEstimate] = []
    for rec in merged_records(trace):
        if isinstance(rec, GpsFix):
            if rec.t_ms not in used:
                continue
            prev, last = last, rec
            if prev is not None:
                dist, _ = vincenty_inverse(prev.pos, last.pos)
                speed = dist / ((last.t_ms - prev.t_ms) / 1000.0)
            else:
                speed = last.speed_mps
            out.append(LocationEstimate(rec.t_ms, rec.pos, rec.speed_mps, Source.GPS_SYNC))
        elif last is not None:
            t = rec.t_ms + config.T_ms
            pos = last.pos if prev is None else enloc_extrapolate(prev, last, t)
            out.append(LocationEstimate(t, pos, speed, Source.PREDICTED))
    return out


def run_gps_only(trace: Trace) -> list[LocationEstimate]:
    return [LocationEstimate(f.t_ms, f.pos, f.speed_mps, Source.GPS_SYNC) for f in trace.gps_stream]


# ---------------------------------------------------------------------------
# CSV output

CSV_HEADER = ("t_ms", "lat_deg", "lon_deg", "speed_mps", "source")


def write_estimates_csv(estimates: Iterable[LocationEstimate], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in estimates:
        w.writerow([e.t_ms, repr(e.pos.lat_deg), repr(e.pos.lon_deg), repr(float(e.speed_mps)), e.source.value])


def read_estimates_csv(source: IO[str]) -> list[LocationEstimate]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise DomainError(f"estimate CSV header must be {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            t, lat, lon, spd, src = row
            out.append(LocationEstimate(int(t), GeoPoint(float(lat), float(lon)), float(spd), Source(src)))
        except ValueError as exc:
            raise DomainError(f"estimate CSV line {lineno}: {exc}") from None
    return out


def estimates_to_csv(estimates: Iterable[LocationEstimate]) -> str:
    buf = io.StringIO()
    write_estimates_csv(estimates, buf)
    return buf.getvalue()
