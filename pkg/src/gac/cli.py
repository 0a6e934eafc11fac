"""Command-line front end.

Every command that writes to a file also writes ``<out>.manifest.json`` with
the fully resolved parameters; ``gac replay <manifest>`` re-runs it and
reproduces the output byte for byte.

Exit codes: 0 success, 1 domain or validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .energy import PowerProfile, SchemeKind, average_current_mA, load_profile
from .errors import TraceValidationError
from .estimators import (
    EstimatorConfig,
    estimates_to_csv,
    read_estimates_csv,
)
from .evaluation import DEFAULT_TGSYNC_S, estimate, geojson_string, run_sweep, write_sweep_csv
from .synth import (
    PRESETS,
    NoiseModel,
    Scenario,
    generate_truth,
    load_scenario,
    preset_scenario,
    read_truth_csv,
    render_trace,
    write_truth_csv,
)
from .traces import dumps_trace, load_trace

MANIFEST_SUFFIX = ".manifest.json"


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _scheme(text: str) -> SchemeKind:
    try:
        return SchemeKind(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown scheme {text!r}; choose from {', '.join(s.value for s in SchemeKind)}"
        ) from None


def _resolve_scenario(name: str) -> Scenario:
    if name in PRESETS:
        return preset_scenario(name)
    path = Path(name)
    if path.suffix or path.exists():
        with path.open("rb") as fh:
            return load_scenario(fh)
    return preset_scenario(name)  # raises DomainError naming the valid presets


def _read_trace(path: str):
    with open(path, "rb") as fh:
        return load_trace(fh)


def _noise(args) -> NoiseModel:
    return NoiseModel(
        accel_sigma_mps2=args.accel_sigma_mps2,
        heading_sigma_deg=args.heading_sigma_deg,
        gps_pos_sigma_m=args.gps_pos_sigma_m,
        gps_speed_sigma_mps=args.gps_speed_sigma_mps,
        seed=args.seed,
        gps_corr_time_s=args.gps_corr_time_s,
        mount_tilt_deg=(args.mount_roll_deg, args.mount_pitch_deg),
    )


def _config(args, T_s: float, T_Gsync_s: float) -> EstimatorConfig:
    return EstimatorConfig(
        T_s=T_s,
        T_Gsync_s=T_Gsync_s,
        smoothing_window=args.smoothing_window,
        const_speed_threshold_mps=args.const_speed_threshold_mps,
        orientation_correction_enabled=args.orientation_correction,
    )


def _profile(args) -> PowerProfile:
    profile = PowerProfile()
    if getattr(args, "profile", None):
        with open(args.profile) as fh:
            profile = load_profile(fh, profile)
    if getattr(args, "fix_duration_s", None) is not None:
        profile = replace(profile, fix_duration_s=args.fix_duration_s)
    return profile


def _emit(args, data: bytes) -> None:
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    Path(args.out).write_bytes(data)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    manifest = {"command": args.command, "params": params, "version": __version__}
    Path(args.out + MANIFEST_SUFFIX).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    truth = generate_truth(scenario, args.T_s)
    trace = render_trace(truth, _noise(args), args.T_s, args.gps_period_s, args.fix_duration_s, scenario.name)
    if args.truth_out:
        buf = io.StringIO()
        write_truth_csv(truth, buf)
        Path(args.truth_out).write_text(buf.getvalue())
    _emit(args, dumps_trace(trace))
    return 0


def cmd_run(args) -> int:
    trace = _read_trace(args.trace)
    if args.T_s is None:
        args.T_s = trace.meta.sample_interval_T_s
    config = _config(args, args.T_s, args.tgsync_s)
    estimates = estimate(args.scheme, trace, args.tgsync_s, config)
    args.scheme = args.scheme.value
    _emit(args, estimates_to_csv(estimates).encode())
    return 0


def cmd_sweep(args) -> int:
    truth = None
    if args.trace:
        source = _read_trace(args.trace)
        if args.T_s is None:
            args.T_s = source.meta.sample_interval_T_s
        if args.truth:
            with open(args.truth) as fh:
                truth = read_truth_csv(fh)
    else:
        source = _resolve_scenario(args.scenario)
        if args.T_s is None:
            args.T_s = 0.25
    # the sweep overrides T_Gsync per point; the config only carries the other knobs
    config = _config(args, args.T_s, max(args.T_s, EstimatorConfig.T_Gsync_s))
    records = run_sweep(
        source,
        args.schemes,
        args.tgsync_s,
        args.seeds,
        truth=truth,
        noise=_noise(args),
        config=config,
        profile=_profile(args),
        gps_period_s=args.gps_period_s,
        jobs=args.jobs,
    )
    buf = io.StringIO()
    write_sweep_csv(records, buf)
    args.schemes = [s.value for s in args.schemes]
    _emit(args, buf.getvalue().encode())
    return 0


def cmd_energy(args) -> int:
    current = average_current_mA(args.scheme, args.tgsync_s, _profile(args))
    args.scheme = args.scheme.value
    _emit(args, f"{current:.3f} mA\n".encode())
    return 0


def cmd_export_geojson(args) -> int:
    with open(args.estimates) as fh:
        estimates = read_estimates_csv(fh)
    if args.truth:
        with open(args.truth) as fh:
            truth = read_truth_csv(fh)
    elif args.trace:
        truth = _read_trace(args.trace).gps_stream
    else:
        truth = {}
    _emit(args, geojson_string(estimates, truth).encode())
    return 0


def cmd_validate(args) -> int:
    try:
        trace = _read_trace(args.trace)
    except TraceValidationError as exc:
        report = "".join(f"{f}\n" for f in exc.findings)
        _emit(args, report.encode())
        return 1
    _emit(args, f"ok: {len(trace.sensor_stream)} sensor samples, {len(trace.gps_stream)} GPS fixes\n".encode())
    return 0


def cmd_replay(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    params = dict(manifest["params"])
    if args.out is not None:
        params["out"] = args.out
    command = manifest["command"]
    if command not in COMMANDS:
        raise ValueError(f"manifest names unknown command {command!r}")
    ns = argparse.Namespace(command=command, **params)
    for key in ("scheme",):
        if isinstance(getattr(ns, key, None), str):
            setattr(ns, key, _scheme(getattr(ns, key)))
    if command == "sweep":
        ns.schemes = [_scheme(s) for s in ns.schemes]
    return COMMANDS[command](ns)


COMMANDS = {
    "synth": cmd_synth,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "energy": cmd_energy,
    "export-geojson": cmd_export_geojson,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# parser


def _add_noise_flags(p):
    d = NoiseModel()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accel-sigma-mps2", type=float, default=d.accel_sigma_mps2)
    p.add_argument("--heading-sigma-deg", type=float, default=d.heading_sigma_deg)
    p.add_argument("--gps-pos-sigma-m", type=float, default=d.gps_pos_sigma_m)
    p.add_argument("--gps-speed-sigma-mps", type=float, default=d.gps_speed_sigma_mps)
    p.add_argument("--gps-corr-time-s", type=float, default=d.gps_corr_time_s)
    p.add_argument("--mount-roll-deg", type=float, default=0.0)
    p.add_argument("--mount-pitch-deg", type=float, default=0.0)
    p.add_argument("--gps-period-s", type=float, default=1.0)


def _add_estimator_flags(p):
    d = EstimatorConfig()
    p.add_argument("--T-s", dest="T_s", type=float, default=None,
                   help="sensor sampling interval (default: from the trace)")
    p.add_argument("--smoothing-window", type=int, default=d.smoothing_window)
    p.add_argument("--const-speed-threshold-mps", type=float, default=d.const_speed_threshold_mps)
    p.add_argument("--no-orientation-correction", dest="orientation_correction",
                   action="store_false", default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gac", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trace")
    p.add_argument("--scenario", required=True, help="'city', 'highway' or a scenario file")
    _add_noise_flags(p)
    p.add_argument("--T-s", dest="T_s", type=float, default=0.25)
    p.add_argument("--fix-duration-s", type=float, default=5.0)
    p.add_argument("--truth-out", default=None, help="also write the ground truth as CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run one estimator over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--scheme", type=_scheme, default=SchemeKind.GAC)
    p.add_argument("--tgsync-s", type=float, default=60.0)
    _add_estimator_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="accuracy/energy sweep over T_Gsync")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario")
    src.add_argument("--trace")
    p.add_argument("--truth", default=None, help="truth CSV for --trace (default: score against its GPS fixes)")
    p.add_argument("--schemes", type=lambda s: [_scheme(x) for x in s.split(",") if x],
                   default=[SchemeKind.GPS_CONTINUOUS, SchemeKind.GAC, SchemeKind.GAC_ACC_FREE, SchemeKind.ENLOC])
    p.add_argument("--tgsync-s", type=_floats, default=list(DEFAULT_TGSYNC_S))
    p.add_argument("--seeds", type=_ints, default=[0])
    _add_noise_flags(p)
    _add_estimator_flags(p)
    p.add_argument("--fix-duration-s", type=float, default=None)
    p.add_argument("--profile", default=None, help="key=value power profile file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("energy", help="average current of a scheme")
    p.add_argument("--scheme", type=_scheme, required=True)
    p.add_argument("--tgsync-s", type=float, default=60.0)
    p.add_argument("--fix-duration-s", type=float, default=None)
    p.add_argument("--profile", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("export-geojson", help="truth/estimate/fix tracks as GeoJSON")
    p.add_argument("--estimates", required=True)
    ref = p.add_mutually_exclusive_group()
    ref.add_argument("--truth", default=None)
    ref.add_argument("--trace", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_geojson)

    p = sub.add_parser("validate", help="check a trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to this path instead of the recorded one")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"gac: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"gac: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
