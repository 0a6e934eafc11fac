"""Duty-cycle energy model built on measured sensor currents.

The GPS draws a constant current while it is on and is powered for
``fix_duration_s`` per fix; the accelerometer/compass chip runs
continuously in Normal (4 Hz) mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import IO, Iterable

from .errors import DomainError


class SchemeKind(enum.Enum):
    GPS_CONTINUOUS = "gps-continuous"
    GAC = "gac"
    GAC_ACC_FREE = "gac-accfree"
    ENLOC = "enloc"


@dataclass(frozen=True)
class PowerProfile:
    gps_current_mA: float = 135.0
    accel_normal_mA: float = 15.0
    accel_ui_mA: float = 25.0
    accel_game_mA: float = 90.0
    accel_fastest_mA: float = 95.0
    fix_duration_s: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{f.name} must be positive, got {v}")


def average_current_mA(scheme: SchemeKind, T_Gsync_s: float, profile: PowerProfile = PowerProfile()) -> float:
    if scheme is SchemeKind.GPS_CONTINUOUS:
        return profile.gps_current_mA
    if not (math.isfinite(T_Gsync_s) and T_Gsync_s >= profile.fix_duration_s):
        raise DomainError(
            f"T_Gsync_s={T_Gsync_s} is shorter than the fix duration {profile.fix_duration_s} s; "
            "the receiver would never switch off"
        )
    duty = profile.gps_current_mA * profile.fix_duration_s / T_Gsync_s
    if scheme is SchemeKind.GAC:
        return duty + profile.accel_normal_mA
    # the Normal-mode accelerometer already runs for screen rotation, so
    # GAC-AccFree is charged the same as EnLoc
    return duty


def charge_per_hour_mAh(scheme: SchemeKind, T_Gsync_s: float, profile: PowerProfile = PowerProfile()) -> float:
    return average_current_mA(scheme, T_Gsync_s, profile) * 1.0


def savings_ratio(scheme: SchemeKind, T_Gsync_s: float, profile: PowerProfile = PowerProfile()) -> float:
    return profile.gps_current_mA / average_current_mA(scheme, T_Gsync_s, profile)


def load_profile(source: IO[str] | Iterable[str], base: PowerProfile = PowerProfile()) -> PowerProfile:
    """Read ``key=value`` overrides; keys are the PowerProfile field names."""
    known = {f.name for f in fields(PowerProfile)}
    updates = {}
    for lineno, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or key not in known:
            raise DomainError(f"profile line {lineno}: expected <field>=<value> with field in {sorted(known)}")
        try:
            updates[key] = float(value)
        except ValueError:
            raise DomainError(f"profile line {lineno}: bad number {value!r}") from None
    return replace(base, **updates)
