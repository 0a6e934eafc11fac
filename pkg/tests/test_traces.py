import io

import pytest
from hypothesis import given, settings, strategies as st

from gac.errors import TraceParseError, TraceValidationError
from gac.geodesy import GeoPoint
from gac.traces import (
    GpsFix,
    SensorSample,
    Trace,
    TraceMetadata,
    dumps_trace,
    load_trace,
    loads_trace,
    merged_records,
    save_trace,
    validate_trace,
)

META = TraceMetadata(0.25, "unit", False)


def sample(t, ax=0.0, ay=0.0, az=-9.80665, hd=0.0):
    return SensorSample(t, (ax, ay, az), hd)


def fix(t, lat=0.0, lon=0.0, spd=10.0, brg=0.0, dur=5.0):
    return GpsFix(t, GeoPoint(lat, lon), spd, brg, dur)


def rules(trace):
    return [(f.stream, f.index, f.rule) for f in validate_trace(trace)]


def test_single_fix_no_samples_is_valid():
    t = loads_trace(b"# gac-trace v1 T=0.25 scenario=x truth=0\nG 0 1.0 2.0 3.0 4.0 5.0\n")
    assert t.sensor_stream == ()
    assert t.gps_stream == (fix(0, 1.0, 2.0, 3.0, 4.0, 5.0),)


def test_decreasing_timestamp_rejected():
    data = b"# gac-trace v1 T=0.25 scenario=x truth=0\nS 250 0 0 -9.8 0\nS 0 0 0 -9.8 0\n"
    with pytest.raises(TraceValidationError) as exc:
        loads_trace(data)
    assert [(f.stream, f.index, f.rule) for f in exc.value.findings] == [("S", 1, "non-monotonic")]


def test_round_trip_exact():
    trace = Trace(
        TraceMetadata(0.25, "rt", True),
        [sample(0, 0.1, 1 / 3, -9.81, 359.9999999), sample(250, 1e-17, -2.5, -9.7, 0.1)],
        [fix(0, 30.123456789012345, -120.98765432101234, 12.3456789, 45.6, 2.5)],
    )
    assert loads_trace(dumps_trace(trace)) == trace


def test_empty_trace_writes_header_only():
    buf = io.BytesIO()
    save_trace(Trace(META), buf)
    assert buf.getvalue() == b"# gac-trace v1 T=0.25 scenario=unit truth=0\n"


def test_unordered_input_rejected_before_write():
    buf = io.BytesIO()
    with pytest.raises(TraceValidationError):
        save_trace(Trace(META, [sample(500), sample(250)]), buf)
    assert buf.getvalue() == b""


def test_well_formed_has_no_findings():
    assert validate_trace(Trace(META, [sample(0), sample(250)], [fix(0), fix(1000)])) == []


def test_duplicate_timestamp_one_finding():
    assert rules(Trace(META, [sample(0), sample(250), sample(250)])) == [("S", 2, "duplicate-timestamp")]


def test_gap_finding_matches_direct_scan():
    times = [0, 250, 500, 3000, 3250, 6000]  # 2500 ms == 10*T is allowed, 2750 ms is not
    found = [i for s, i, r in rules(Trace(META, [sample(t) for t in times])) if r == "gap"]
    expected = [i for i in range(1, len(times)) if times[i] - times[i - 1] > 10 * 250]
    assert found == expected == [5]


def test_fix_rules():
    trace = Trace(META, [], [fix(0, spd=-1.0), fix(1000, brg=360.0), fix(2000, dur=0.0)])
    assert rules(trace) == [("G", 0, "speed-nonnegative"), ("G", 1, "bearing-range"), ("G", 2, "fix-duration")]


def test_bad_sample_interval():
    assert ("meta", -1, "sample-interval") in rules(Trace(TraceMetadata(0.0, "x")))


def test_findings_sorted_by_index():
    trace = Trace(META, [sample(0, hd=400.0), sample(0), sample(-5, hd=-1.0)])
    idx = [f.index for f in validate_trace(trace)]
    assert idx == sorted(idx)


@pytest.mark.parametrize(
    "body, lineno",
    [
        (b"S 0 0 0\n", 2),
        (b"S 0 0 0 -9.8 0\nG 0 x 0 0 0 5\n", 3),
        (b"\nQ 1 2 3\n", 3),
        (b"S 0.5 0 0 -9.8 0\n", 2),
        (b"S 0 nan 0 -9.8 0\n", 2),
        (b"G 0 95 0 0 0 5\n", 2),
    ],
)
def test_parse_errors_carry_line_number(body, lineno):
    with pytest.raises(TraceParseError) as exc:
        loads_trace(b"# gac-trace v1 T=0.25 scenario=x truth=0\n" + body)
    assert exc.value.lineno == lineno


def test_missing_header():
    with pytest.raises(TraceParseError) as exc:
        loads_trace(b"S 0 0 0 -9.8 0\n")
    assert exc.value.lineno == 1
    with pytest.raises(TraceParseError):
        loads_trace(b"")


def test_merged_order_fix_first_on_tie():
    trace = Trace(META, [sample(0), sample(250)], [fix(250)])
    kinds = [type(r).__name__ for r in merged_records(trace)]
    assert kinds == ["SensorSample", "GpsFix", "SensorSample"]


def test_load_from_file(tmp_path):
    trace = Trace(META, [sample(0)], [fix(0)])
    path = tmp_path / "t.trace"
    with path.open("wb") as fh:
        save_trace(trace, fh)
    with path.open("rb") as fh:
        assert load_trace(fh) == trace


finite = st.floats(-50, 50, allow_nan=False)
heading = st.floats(0, 359.999)


@st.composite
def traces(draw):
    n = draw(st.integers(0, 20))
    gaps = draw(st.lists(st.integers(1, 2500), min_size=n, max_size=n))
    t, samples = 0, []
    for g in gaps:
        t += g
        samples.append(SensorSample(t, (draw(finite), draw(finite), draw(finite)), draw(heading)))
    m = draw(st.integers(0, 5))
    ft = sorted(draw(st.sets(st.integers(0, 60_000), min_size=m, max_size=m)))
    fixes = [
        GpsFix(x, GeoPoint(draw(st.floats(-90, 90)), draw(st.floats(-180, 179.999))),
               draw(st.floats(0, 60)), draw(heading), draw(st.floats(0.1, 30)))
        for x in ft
    ]
    T = draw(st.sampled_from([0.25, 0.1, 1.0, 0.3333333333333333]))
    return Trace(TraceMetadata(T, draw(st.sampled_from(["a", "city", "x_1"])), draw(st.booleans())),
                 samples, fixes)


@settings(max_examples=100, deadline=None)
@given(traces())
def test_round_trip_property(trace):
    if validate_trace(trace):
        return
    assert loads_trace(dumps_trace(trace)) == trace


@given(traces())
def test_validate_is_pure_and_sorted(trace):
    a, b = validate_trace(trace), validate_trace(trace)
    assert a == b
    assert [f.index for f in a] == sorted(f.index for f in a)
