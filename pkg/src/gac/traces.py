"""Timestamped sensor and GPS streams and their line-oriented file format.

File layout::

    # gac-trace v1 T=0.25 scenario=city truth=1
    S <t_ms> <ax> <ay> <az> <heading_deg>
    G <t_ms> <lat_deg> <lon_deg> <speed_mps> <bearing_deg> <fix_duration_s>

Records of both kinds are interleaved by time; at equal timestamps GPS
records come first.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import TraceParseError, TraceValidationError
from .geodesy import GeoPoint

HEADER_RE = re.compile(
    r"^#\s*gac-trace\s+v1\s+T=(?P<T>\S+)\s+scenario=(?P<scenario>\S+)\s+truth=(?P<truth>[01])\s*$"
)

GAP_FACTOR = 10


@dataclass(frozen=True)
class SensorSample:
    t_ms: int
    accel_mps2: tuple[float, float, float]
    heading_deg: float


@dataclass(frozen=True)
class GpsFix:
    t_ms: int
    pos: GeoPoint
    speed_mps: float
    bearing_deg: float
    fix_duration_s: float = 5.0


@dataclass(frozen=True)
class TraceMetadata:
    sample_interval_T_s: float
    scenario_name: str = "unnamed"
    ground_truth_present: bool = False


@dataclass(frozen=True)
class Trace:
    meta: TraceMetadata
    sensor_stream: tuple[SensorSample, ...] = ()
    gps_stream: tuple[GpsFix, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sensor_stream", tuple(self.sensor_stream))
        object.__setattr__(self, "gps_stream", tuple(self.gps_stream))


@dataclass(frozen=True, order=True)
class Finding:
    index: int
    rule: str
    stream: str = field(default="", compare=True)
    detail: str = field(default="", compare=False)

    def __str__(self):
        return f"{self.stream}[{self.index}] {self.rule}: {self.detail}"


def validate_trace(trace: Trace) -> list[Finding]:
    """Check every trace invariant; an empty list means the trace is valid.

    Findings are sorted by record index (then rule, then stream).
    """
    out: list[Finding] = []
    T = trace.meta.sample_interval_T_s
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
        out.append(Finding(-1, "sample-interval", "meta", f"T must be > 0, got {T}"))
        T = None
    if not trace.meta.scenario_name or any(c.isspace() for c in trace.meta.scenario_name):
        out.append(Finding(-1, "scenario-name", "meta", "name must be a nonempty token"))

    prev = None
    for i, s in enumerate(trace.sensor_stream):
        if not all(math.isfinite(c) for c in s.accel_mps2):
            out.append(Finding(i, "accel-finite", "S", f"{s.accel_mps2}"))
        if not (math.isfinite(s.heading_deg) and 0.0 <= s.heading_deg < 360.0):
            out.append(Finding(i, "heading-range", "S", f"{s.heading_deg}"))
        if prev is not None:
            if s.t_ms == prev:
                out.append(Finding(i, "duplicate-timestamp", "S", f"t_ms={s.t_ms}"))
            elif s.t_ms < prev:
                out.append(Finding(i, "non-monotonic", "S", f"{s.t_ms} after {prev}"))
            elif T is not None and s.t_ms - prev > GAP_FACTOR * T * 1000.0:
                out.append(Finding(i, "gap", "S", f"{s.t_ms - prev} ms since previous sample"))
        prev = s.t_ms

    prev = None
    for i, g in enumerate(trace.gps_stream):
        if not (math.isfinite(g.speed_mps) and g.speed_mps >= 0):
            out.append(Finding(i, "speed-nonnegative", "G", f"{g.speed_mps}"))
        if not (math.isfinite(g.bearing_deg) and 0.0 <= g.bearing_deg < 360.0):
            out.append(Finding(i, "bearing-range", "G", f"{g.bearing_deg}"))
        if not (math.isfinite(g.fix_duration_s) and g.fix_duration_s > 0):
            out.append(Finding(i, "fix-duration", "G", f"{g.fix_duration_s}"))
        if prev is not None:
            if g.t_ms == prev:
                out.append(Finding(i, "duplicate-timestamp", "G", f"t_ms={g.t_ms}"))
            elif g.t_ms < prev:
                out.append(Finding(i, "non-monotonic", "G", f"{g.t_ms} after {prev}"))
        prev = g.t_ms
    return sorted(out)


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips, always >= 9 significant digits of precision
    return repr(float(x))


def merged_records(trace: Trace) -> list[SensorSample | GpsFix]:
    """Both streams in time order, fixes before samples at equal timestamps."""
    tagged = [(g.t_ms, 0, i, g) for i, g in enumerate(trace.gps_stream)]
    tagged += [(s.t_ms, 1, i, s) for i, s in enumerate(trace.sensor_stream)]
    tagged.sort(key=lambda r: r[:3])
    return [r[3] for r in tagged]


def save_trace(trace: Trace, sink: IO[bytes]) -> None:
    findings = validate_trace(trace)
    if findings:
        raise TraceValidationError(findings)
    m = trace.meta
    lines = [
        f"# gac-trace v1 T={_fmt(m.sample_interval_T_s)} scenario={m.scenario_name} "
        f"truth={int(bool(m.ground_truth_present))}"
    ]
    for rec in merged_records(trace):
        if isinstance(rec, GpsFix):
            lines.append(
                f"G {rec.t_ms} {_fmt(rec.pos.lat_deg)} {_fmt(rec.pos.lon_deg)} "
                f"{_fmt(rec.speed_mps)} {_fmt(rec.bearing_deg)} {_fmt(rec.fix_duration_s)}"
            )
        else:
            ax, ay, az = rec.accel_mps2
            lines.append(
                f"S {rec.t_ms} {_fmt(ax)} {_fmt(ay)} {_fmt(az)} {_fmt(rec.heading_deg)}"
            )
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise TraceParseError(lineno, f"bad integer {tok!r}") from None


def _parse_float(tok: str, lineno: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise TraceParseError(lineno, f"bad number {tok!r}") from None
    if not math.isfinite(x):
        raise TraceParseError(lineno, f"non-finite number {tok!r}")
    return x


def load_trace(source: IO[bytes] | Iterable[bytes]) -> Trace:
    """Parse and validate a trace.

    Raises TraceParseError (carrying the 1-based line number) on malformed
    input and TraceValidationError when the parsed trace breaks an invariant.
    """
    meta = None
    sensors: list[SensorSample] = []
    fixes: list[GpsFix] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("ascii", errors="replace") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        if meta is None:
            m = HEADER_RE.match(line)
            if not m:
                raise TraceParseError(lineno, "missing '# gac-trace v1' header")
            meta = TraceMetadata(
                _parse_float(m["T"], lineno), m["scenario"], m["truth"] == "1"
            )
            continue
        if line.startswith("#"):
            continue
        tok = line.split()
        if tok[0] == "S":
            if len(tok) != 6:
                raise TraceParseError(lineno, f"S record needs 5 fields, got {len(tok) - 1}")
            ax, ay, az, hd = (_parse_float(x, lineno) for x in tok[2:])
            sensors.append(SensorSample(_parse_int(tok[1], lineno), (ax, ay, az), hd))
        elif tok[0] == "G":
            if len(tok) != 7:
                raise TraceParseError(lineno, f"G record needs 6 fields, got {len(tok) - 1}")
            lat, lon, spd, brg, dur = (_parse_float(x, lineno) for x in tok[2:])
            try:
                pos = GeoPoint(lat, lon)
            except ValueError as exc:
                raise TraceParseError(lineno, str(exc)) from None
            fixes.append(GpsFix(_parse_int(tok[1], lineno), pos, spd, brg, dur))
        else:
            raise TraceParseError(lineno, f"unknown record tag {tok[0]!r}")
    if meta is None:
        raise TraceParseError(1, "empty input")
    trace = Trace(meta, sensors, fixes)
    findings = validate_trace(trace)
    if findings:
        raise TraceValidationError(findings)
    return trace


def dumps_trace(trace: Trace) -> bytes:
    buf = io.BytesIO()
    save_trace(trace, buf)
    return buf.getvalue()


def loads_trace(data: bytes) -> Trace:
    return load_trace(io.BytesIO(data))

