"""Synthetic ground-truth trajectories and the noisy sensor/GPS traces they produce.

The truth generator follows the same propagation law the estimator uses: the
vehicle holds constant acceleration and bearing over each step, and the
position advances by ``v*dt + a*dt**2/2`` along that bearing via Vincenty's
direct formula.  Zero-noise traces are therefore reproducible exactly by the
dead-reckoning estimator.
"""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError
from .estimators import GRAVITY_MPS2
from .geodesy import GeoPoint, haversine_distance_m, normalize_bearing, vincenty_direct
from .traces import GpsFix, SensorSample, Trace, TraceMetadata

DEFAULT_STEP_S = 0.25


class SpeedClampWarning(UserWarning):
    """A segment's deceleration would have driven the speed below zero."""


@dataclass(frozen=True)
class Segment:
    duration_s: float
    accel_mps2: float = 0.0
    turn_rate_dps: float = 0.0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise DomainError(f"segment duration must be > 0, got {self.duration_s}")


@dataclass(frozen=True)
class Scenario:
    name: str
    segments: tuple[Segment, ...]
    start: GeoPoint
    start_speed_mps: float = 0.0
    start_bearing_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "start_bearing_deg", normalize_bearing(self.start_bearing_deg))
        if self.start_speed_mps < 0:
            raise DomainError("start speed must be nonnegative")

    @property
    def duration_s(self) -> float:
        return sum(s.duration_s for s in self.segments)


@dataclass(frozen=True)
class NoiseModel:
    """Sensor and GPS error statistics.

    GPS position errors are an isotropic 2-D Gaussian with per-axis sigma
    ``gps_pos_sigma_m``.  With ``gps_corr_time_s > 0`` each axis evolves as a
    first-order Gauss-Markov process with that correlation time, so fixes a
    few seconds apart share most of their error, as consumer receivers do.
    ``mount_tilt_deg`` is a constant (roll, pitch) of the phone relative to
    the vehicle.
    """

    accel_sigma_mps2: float = 0.1
    heading_sigma_deg: float = 2.0
    gps_pos_sigma_m: float = 3.0
    gps_speed_sigma_mps: float = 0.2
    seed: int = 0
    gps_corr_time_s: float = 60.0
    mount_tilt_deg: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("accel_sigma_mps2", "heading_sigma_deg", "gps_pos_sigma_m",
                     "gps_speed_sigma_mps", "gps_corr_time_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")


ZERO_NOISE = NoiseModel(0.0, 0.0, 0.0, 0.0, gps_corr_time_s=0.0)


@dataclass(frozen=True)
class TruthPoint:
    t_ms: int
    pos: GeoPoint
    speed_mps: float
    bearing_deg: float
    # acceleration and turn rate held over the step that starts at t_ms
    accel_along_mps2: float = 0.0
    turn_rate_dps: float = 0.0


@dataclass(frozen=True)
class GroundTruth:
    points: tuple[TruthPoint, ...]
    step_s: float
    findings: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.points)

    def by_time(self) -> dict[int, GeoPoint]:
        return {p.t_ms: p.pos for p in self.points}

    def path_length_m(self) -> float:
        pts = self.points
        return sum(haversine_distance_m(a.pos, b.pos) for a, b in zip(pts, pts[1:]))


def _steps_in(duration_s: float, step_s: float) -> int:
    n = round(duration_s / step_s)
    if n < 1 or abs(n * step_s - duration_s) > 1e-9 * max(1.0, duration_s):
        raise DomainError(f"step {step_s} s does not divide segment duration {duration_s} s")
    return n


def _step_ms(step_s: float) -> int:
    ms = round(step_s * 1000.0)
    if ms <= 0 or abs(ms - step_s * 1000.0) > 1e-6:
        raise DomainError(f"step must be a positive whole number of milliseconds, got {step_s} s")
    return ms


def generate_truth(scenario: Scenario, step_s: float = DEFAULT_STEP_S) -> GroundTruth:
    """Integrate the scenario on a ``step_s`` grid.

    A deceleration that would reverse the vehicle is shortened so the speed
    lands exactly on zero at the end of the step; each clamped segment is
    reported once as a SpeedClampWarning and a finding on the result.
    """
    dt_ms = _step_ms(step_s)
    pos = scenario.start
    v = float(scenario.start_speed_mps)
    brg = scenario.start_bearing_deg
    t = 0
    points: list[TruthPoint] = []
    findings: list[str] = []

    for k, seg in enumerate(scenario.segments):
        n = _steps_in(seg.duration_s, step_s)
        clamped = False
        for _ in range(n):
            a = seg.accel_mps2
            if v + a * step_s < 0.0:
                clamped = clamped or v + a * step_s < -1e-9
                a = -v / step_s
            points.append(TruthPoint(t, pos, v, brg, a, seg.turn_rate_dps))
            dist = v * step_s + 0.5 * a * step_s * step_s
            pos = vincenty_direct(pos, brg, max(0.0, dist))
            v = max(0.0, v + a * step_s)
            brg = normalize_bearing(brg + seg.turn_rate_dps * step_s)
            t += dt_ms
        if clamped:
            msg = f"segment {k}: speed clamped at 0"
            findings.append(msg)
            warnings.warn(msg, SpeedClampWarning, stacklevel=2)

    points.append(TruthPoint(t, pos, v, brg, 0.0, 0.0))
    return GroundTruth(tuple(points), step_s, tuple(findings))


def _mount_rotation(tilt_deg: Sequence[float]) -> np.ndarray | None:
    roll, pitch = (math.radians(x) for x in tilt_deg)
    if roll == 0.0 and pitch == 0.0:
        return None
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    # roll about the forward (y) axis, pitch about the lateral (x) axis
    rot_y = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    rot_x = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    return rot_x @ rot_y


def vehicle_accel(speed_mps: float, accel_along_mps2: float, turn_rate_dps: float) -> tuple[float, float, float]:
    """Accelerometer reading of a level device aligned with the vehicle.

    Device axes are x right, y forward, z up; the reading includes gravity
    as (0, 0, -g).
    """
    lateral = speed_mps * math.radians(turn_rate_dps)
    return (lateral, accel_along_mps2, -GRAVITY_MPS2)


def render_trace(
    truth: GroundTruth,
    noise: NoiseModel = NoiseModel(),
    T_s: float = DEFAULT_STEP_S,
    gps_period_s: float = 1.0,
    fix_duration_s: float = 5.0,
    scenario_name: str = "synthetic",
) -> Trace:
    """Sample the truth into a sensor stream every ``T_s`` and GPS fixes every
    ``gps_period_s``, perturbed by ``noise``.  Deterministic given noise.seed.
    """
    stride = round(T_s / truth.step_s)
    if stride < 1 or abs(stride * truth.step_s - T_s) > 1e-9:
        raise DomainError(f"T_s={T_s} must be a whole multiple of the truth step {truth.step_s}")
    gps_stride = round(gps_period_s / truth.step_s)
    if gps_stride < 1 or abs(gps_stride * truth.step_s - gps_period_s) > 1e-9:
        raise DomainError(
            f"gps_period_s={gps_period_s} must be a whole multiple of the truth step {truth.step_s}"
        )
    if not fix_duration_s > 0:
        raise DomainError("fix_duration_s must be > 0")

    rng = np.random.default_rng(noise.seed)
    pts = truth.points
    # the last truth point closes the final step; it has no reading of its own
    sensor_pts = pts[:-1:stride] if len(pts) > 1 else ()
    gps_pts = pts[::gps_stride]

    acc_noise = rng.normal(0.0, noise.accel_sigma_mps2, size=(len(sensor_pts), 3))
    hdg_noise = rng.normal(0.0, noise.heading_sigma_deg, size=len(sensor_pts))
    pos_noise = rng.normal(0.0, 1.0, size=(len(gps_pts), 2))
    spd_noise = rng.normal(0.0, noise.gps_speed_sigma_mps, size=len(gps_pts))

    mount = _mount_rotation(noise.mount_tilt_deg)
    sensors = []
    for p, da, dh in zip(sensor_pts, acc_noise, hdg_noise):
        acc = vehicle_accel(p.speed_mps, p.accel_along_mps2, p.turn_rate_dps)
        if mount is not None:
            acc = tuple(float(x) for x in mount @ np.asarray(acc))
        acc = (acc[0] + float(da[0]), acc[1] + float(da[1]), acc[2] + float(da[2]))
        sensors.append(SensorSample(p.t_ms, acc, normalize_bearing(p.bearing_deg + float(dh))))

    sigma = noise.gps_pos_sigma_m
    if noise.gps_corr_time_s > 0:
        rho = math.exp(-gps_period_s / noise.gps_corr_time_s)
    else:
        rho = 0.0
    innov = math.sqrt(1.0 - rho * rho)
    fixes = []
    err = pos_noise[0] * sigma if len(gps_pts) else None
    for i, (p, ds) in enumerate(zip(gps_pts, spd_noise)):
        if i > 0:
            err = rho * err + innov * sigma * pos_noise[i]
        east, north = float(err[0]), float(err[1])
        offset = math.hypot(east, north)
        pos = vincenty_direct(p.pos, math.degrees(math.atan2(east, north)), offset)
        fixes.append(
            GpsFix(p.t_ms, pos, max(0.0, p.speed_mps + float(ds)), p.bearing_deg, fix_duration_s)
        )

    meta = TraceMetadata(T_s, scenario_name, True)
    return Trace(meta, sensors, fixes)


# ---------------------------------------------------------------------------
# scenario presets


def _highway_segments() -> list[Segment]:
    # cruise near 24 m/s: slow speed drift of +-0.6 m/s and 0.4 degree bends per minute
    cycle = [(60, 0.01, 0.0), (60, 0.0, 0.007), (60, -0.01, 0.0), (60, 0.0, -0.007)]
    return [Segment(*s) for s in cycle * 3 + [(120, 0.0, 0.0)]]


CITY_BLOCK_M = 240.0
CITY_GRID_BLOCKS = 6
_CITY_CRUISE = 12.0
_CITY_TURN_SPEED = 5.0
_CITY_ACCEL = 1.0
_CITY_DECEL = -2.0
_CITY_TURN_S = 7.5


def _q(x: float) -> float:
    return max(0.25, round(x * 4.0) / 4.0)


def _city_segments() -> list[Segment]:
    """Stop-and-go grid driving: legs of 1-3 blocks, a 90 degree turn or a
    traffic-light stop at every leg end, confined to a 6x6 block grid."""
    rng = random.Random(2010)
    x, y = 0, 0
    heading = 0  # 0=N 1=E 2=S 3=W
    moves = {0: (0, 1), 1: (1, 0), 2: (0, -1), 3: (-1, 0)}
    segs: list[Segment] = []
    v = 0.0
    total = 0.0
    legs = 0
    while total < 19 * 60:
        dx, dy = moves[heading]
        room = 0
        while 0 <= x + dx * (room + 1) <= CITY_GRID_BLOCKS and 0 <= y + dy * (room + 1) <= CITY_GRID_BLOCKS:
            room += 1
        if room == 0:
            raise AssertionError("city route walked into the grid boundary")
        blocks = rng.randint(1, min(3, room))
        x += dx * blocks
        y += dy * blocks
        legs += 1
        stop = legs % 3 == 0

        # choose the next heading so the route stays inside the grid
        options = []
        for turn in (1, -1):
            h = (heading + turn) % 4
            hx, hy = moves[h]
            if 0 <= x + hx <= CITY_GRID_BLOCKS and 0 <= y + hy <= CITY_GRID_BLOCKS:
                options.append(turn)
        turn = rng.choice(options)

        end_v = 0.0 if stop else _CITY_TURN_SPEED
        length = blocks * CITY_BLOCK_M
        acc_t = (_CITY_CRUISE - v) / _CITY_ACCEL
        dec_t = (end_v - _CITY_CRUISE) / _CITY_DECEL
        acc_d = (v + _CITY_CRUISE) / 2 * acc_t
        dec_d = (_CITY_CRUISE + end_v) / 2 * dec_t
        cruise_t = _q((length - acc_d - dec_d) / _CITY_CRUISE)
        segs += [
            Segment(acc_t, _CITY_ACCEL),
            Segment(cruise_t),
            Segment(dec_t, _CITY_DECEL),
        ]
        if stop:
            segs += [Segment(20.0 + 5.0 * rng.randint(0, 3)), Segment(5.0, _CITY_ACCEL)]
        segs.append(Segment(_CITY_TURN_S, 0.0, turn * 90.0 / _CITY_TURN_S))
        v = _CITY_TURN_SPEED
        heading = (heading + turn) % 4
        total = sum(s.duration_s for s in segs)
    return segs


def preset_scenario(name: str) -> Scenario:
    """Representative highway (~20 km, nearly straight) or city (stop-and-go
    grid inside a 1.5 km x 1.5 km box) drive."""
    if name == "highway":
        return Scenario("highway", _highway_segments(), GeoPoint(30.95, 29.70), 24.0, 120.0)
    if name == "city":
        return Scenario("city", _city_segments(), GeoPoint(31.20, 29.90), 0.0, 0.0)
    raise DomainError(f"unknown scenario preset {name!r}; expected 'highway' or 'city'")


PRESETS = ("city", "highway")


# ---------------------------------------------------------------------------
# scenario files


def save_scenario(scenario: Scenario, sink: IO[bytes]) -> None:
    lines = [
        "# gac-scenario v1",
        f"name {scenario.name}",
        f"start {scenario.start.lat_deg!r} {scenario.start.lon_deg!r}",
        f"start_speed {float(scenario.start_speed_mps)!r}",
        f"start_bearing {float(scenario.start_bearing_deg)!r}",
    ]
    for s in scenario.segments:
        lines.append(
            f"segment {float(s.duration_s)!r} {float(s.accel_mps2)!r} {float(s.turn_rate_dps)!r}"
        )
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def load_scenario(source: IO[bytes] | Iterable[bytes]) -> Scenario:
    fields: dict = {"name": "scenario", "start_speed": 0.0, "start_bearing": 0.0}
    segs = []
    for lineno, raw in enumerate(source, start=1):
        line = (raw.decode("ascii") if isinstance(raw, bytes) else raw).split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        try:
            if key == "segment":
                if len(vals) != 3:
                    raise ValueError("segment needs <duration_s> <accel> <turn_rate>")
                segs.append(Segment(*(float(v) for v in vals)))
            elif key == "start":
                fields["start"] = GeoPoint(float(vals[0]), float(vals[1]))
            elif key == "name":
                fields["name"] = vals[0]
            elif key in ("start_speed", "start_bearing"):
                fields[key] = float(vals[0])
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, IndexError) as exc:
            raise DomainError(f"scenario line {lineno}: {exc}") from None
    if "start" not in fields:
        raise DomainError("scenario has no 'start' line")
    if not segs:
        raise DomainError("scenario has no segments")
    return Scenario(fields["name"], segs, fields["start"], fields["start_speed"], fields["start_bearing"])


# ---------------------------------------------------------------------------
# ground-truth CSV

TRUTH_HEADER = ("t_ms", "lat_deg", "lon_deg", "speed_mps", "bearing_deg", "accel_along_mps2", "turn_rate_dps")


def write_truth_csv(truth: GroundTruth, sink: IO[str]) -> None:
    sink.write(f"# step_s={truth.step_s!r}\n")
    sink.write(",".join(TRUTH_HEADER) + "\n")
    for p in truth.points:
        sink.write(
            f"{p.t_ms},{p.pos.lat_deg!r},{p.pos.lon_deg!r},{float(p.speed_mps)!r},"
            f"{float(p.bearing_deg)!r},{float(p.accel_along_mps2)!r},{float(p.turn_rate_dps)!r}\n"
        )


def read_truth_csv(source: IO[str]) -> GroundTruth:
    lines = iter(source)
    first = next(lines, "")
    if not first.startswith("# step_s="):
        raise DomainError("truth CSV must start with '# step_s=<seconds>'")
    step = float(first.split("=", 1)[1])
    header = next(lines, "").strip()
    if tuple(header.split(",")) != TRUTH_HEADER:
        raise DomainError(f"truth CSV header must be {','.join(TRUTH_HEADER)}")
    pts = []
    for lineno, line in enumerate(lines, start=3):
        if not line.strip():
            continue
        try:
            t, lat, lon, spd, brg, acc, turn = line.strip().split(",")
            pts.append(TruthPoint(int(t), GeoPoint(float(lat), float(lon)), float(spd),
                                  float(brg), float(acc), float(turn)))
        except ValueError as exc:
            raise DomainError(f"truth CSV line {lineno}: {exc}") from None
    return GroundTruth(tuple(pts), step)
