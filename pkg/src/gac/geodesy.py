"""Geodesic primitives on the WGS-84 ellipsoid and the mean-radius sphere.

Angles are degrees at the API boundary and radians internally.  Vincenty's
direct formula propagates dead-reckoned positions; the inverse formula is the
check on it; the haversine distance is the error metric for evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError

MEAN_EARTH_RADIUS_M = 6_371_008.8

CONVERGENCE_TOL_RAD = 1e-12
MAX_ITERATIONS = 200

# Less than half the meridional circumference of the ellipsoid.
MAX_DIRECT_DISTANCE_M = 20_003_000.0


@dataclass(frozen=True)
class EllipsoidParams:
    semi_major_m: float
    flattening: float

    def __post_init__(self):
        if not self.semi_major_m > 0:
            raise DomainError(f"semi-major axis must be positive, got {self.semi_major_m}")
        if not 0 < self.flattening < 1:
            raise DomainError(f"flattening must be in (0, 1), got {self.flattening}")

    @property
    def semi_minor_m(self) -> float:
        return self.semi_major_m * (1.0 - self.flattening)


WGS84 = EllipsoidParams(6_378_137.0, 1.0 / 298.257223563)


def normalize_longitude(deg: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    if not math.isfinite(deg):
        raise DomainError(f"longitude must be finite, got {deg}")
    if -180.0 <= deg < 180.0:
        return float(deg)
    wrapped = math.fmod(deg + 180.0, 360.0)
    if wrapped < 0:
        wrapped += 360.0
    out = wrapped - 180.0
    return out if out < 180.0 else -180.0


def normalize_bearing(deg: float) -> float:
    """Wrap an angle in degrees into [0, 360).

    >>> normalize_bearing(-90)
    270.0
    >>> normalize_bearing(725)
    5.0
    """
    if not math.isfinite(deg):
        raise DomainError(f"bearing must be finite, got {deg}")
    if 0.0 <= deg < 360.0:
        return float(deg)
    out = math.fmod(deg, 360.0)
    if out < 0:
        out += 360.0
    # fmod of a tiny negative number can round up to exactly 360
    return out if out < 360.0 else 0.0


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """Geodetic latitude/longitude in degrees; longitude is wrapped on construction."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        lat = self.lat_deg
        if not math.isfinite(lat) or not -90.0 <= lat <= 90.0:
            raise DomainError(f"latitude must be within [-90, 90], got {lat}")
        object.__setattr__(self, "lat_deg", float(lat))
        object.__setattr__(self, "lon_deg", normalize_longitude(self.lon_deg))


def _delta_sigma(B: float, sin_sigma: float, cos_sigma: float, cos_2sm: float) -> float:
    c2 = cos_2sm * cos_2sm
    return B * sin_sigma * (
        cos_2sm
        + B / 4.0
        * (
            cos_sigma * (-1.0 + 2.0 * c2)
            - B / 6.0 * cos_2sm * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * c2)
        )
    )


def _series_AB(cos2_alpha: float, ell: EllipsoidParams) -> tuple[float, float]:
    a = ell.semi_major_m
    b = ell.semi_minor_m
    u2 = cos2_alpha * (a * a - b * b) / (b * b)
    A = 1.0 + u2 / 16384.0 * (4096.0 + u2 * (-768.0 + u2 * (320.0 - 175.0 * u2)))
    B = u2 / 1024.0 * (256.0 + u2 * (-128.0 + u2 * (74.0 - 47.0 * u2)))
    return A, B


def vincenty_direct(
    origin: GeoPoint,
    bearing_deg: float,
    distance_m: float,
    ellipsoid: EllipsoidParams = WGS84,
) -> GeoPoint:
    """Destination reached by travelling ``distance_m`` along the geodesic
    leaving ``origin`` at azimuth ``bearing_deg`` (clockwise from north).

    Raises ConvergenceError if the sigma iteration does not settle within
    MAX_ITERATIONS.
    """
    if not math.isfinite(distance_m) or distance_m < 0:
        raise DomainError(f"distance must be finite and nonnegative, got {distance_m}")
    if distance_m >= MAX_DIRECT_DISTANCE_M:
        raise DomainError(f"distance {distance_m} m exceeds half the ellipsoid circumference")
    alpha1 = math.radians(normalize_bearing(bearing_deg))
    if distance_m == 0.0:
        return origin

    f = ellipsoid.flattening
    b = ellipsoid.semi_minor_m
    phi1 = math.radians(origin.lat_deg)

    sin_a1 = math.sin(alpha1)
    cos_a1 = math.cos(alpha1)
    # atan2 form stays finite at the poles
    U1 = math.atan2((1.0 - f) * math.sin(phi1), math.cos(phi1))
    sin_U1 = math.sin(U1)
    cos_U1 = math.cos(U1)
    sigma1 = math.atan2(sin_U1, cos_U1 * cos_a1)
    sin_alpha = cos_U1 * sin_a1
    cos2_alpha = 1.0 - sin_alpha * sin_alpha
    A, B = _series_AB(cos2_alpha, ellipsoid)

    sigma0 = distance_m / (b * A)
    sigma = sigma0
    for _ in range(MAX_ITERATIONS):
        cos_2sm = math.cos(2.0 * sigma1 + sigma)
        sin_sigma = math.sin(sigma)
        cos_sigma = math.cos(sigma)
        sigma_next = sigma0 + _delta_sigma(B, sin_sigma, cos_sigma, cos_2sm)
        if abs(sigma_next - sigma) < CONVERGENCE_TOL_RAD:
            sigma = sigma_next
            break
        sigma = sigma_next
    else:
        raise ConvergenceError(
            f"direct formula did not converge from {origin} az={bearing_deg} s={distance_m}"
        )

    sin_sigma = math.sin(sigma)
    cos_sigma = math.cos(sigma)
    cos_2sm = math.cos(2.0 * sigma1 + sigma)

    tmp = sin_U1 * sin_sigma - cos_U1 * cos_sigma * cos_a1
    phi2 = math.atan2(
        sin_U1 * cos_sigma + cos_U1 * sin_sigma * cos_a1,
        (1.0 - f) * math.hypot(sin_alpha, tmp),
    )
    lam = math.atan2(sin_sigma * sin_a1, cos_U1 * cos_sigma - sin_U1 * sin_sigma * cos_a1)
    C = f / 16.0 * cos2_alpha * (4.0 + f * (4.0 - 3.0 * cos2_alpha))
    L = lam - (1.0 - C) * f * sin_alpha * (
        sigma + C * sin_sigma * (cos_2sm + C * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm))
    )
    lat2 = max(-90.0, min(90.0, math.degrees(phi2)))
    return GeoPoint(lat2, origin.lon_deg + math.degrees(L))


def vincenty_inverse(
    p1: GeoPoint, p2: GeoPoint, ellipsoid: EllipsoidParams = WGS84
) -> tuple[float, float]:
    """Geodesic distance in meters and initial azimuth in degrees from p1 to p2.

    Coincident points give (0.0, 0.0).  Nearly antipodal pairs can fail to
    converge and raise ConvergenceError.
    """
    f = ellipsoid.flattening
    b = ellipsoid.semi_minor_m

    L = math.radians(p2.lon_deg - p1.lon_deg)
    L = math.atan2(math.sin(L), math.cos(L))
    phi1 = math.radians(p1.lat_deg)
    phi2 = math.radians(p2.lat_deg)
    U1 = math.atan2((1.0 - f) * math.sin(phi1), math.cos(phi1))
    U2 = math.atan2((1.0 - f) * math.sin(phi2), math.cos(phi2))
    sin_U1, cos_U1 = math.sin(U1), math.cos(U1)
    sin_U2, cos_U2 = math.sin(U2), math.cos(U2)

    lam = L
    for _ in range(MAX_ITERATIONS):
        sin_lam = math.sin(lam)
        cos_lam = math.cos(lam)
        sin_sigma = math.hypot(cos_U2 * sin_lam, cos_U1 * sin_U2 - sin_U1 * cos_U2 * cos_lam)
        if sin_sigma == 0.0:
            return 0.0, 0.0
        cos_sigma = sin_U1 * sin_U2 + cos_U1 * cos_U2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_U1 * cos_U2 * sin_lam / sin_sigma
        cos2_alpha = 1.0 - sin_alpha * sin_alpha
        # both points on the equator
        cos_2sm = cos_sigma - 2.0 * sin_U1 * sin_U2 / cos2_alpha if cos2_alpha != 0.0 else 0.0
        C = f / 16.0 * cos2_alpha * (4.0 + f * (4.0 - 3.0 * cos2_alpha))
        lam_prev = lam
        lam = L + (1.0 - C) * f * sin_alpha * (
            sigma + C * sin_sigma * (cos_2sm + C * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm))
        )
        if abs(lam - lam_prev) < CONVERGENCE_TOL_RAD:
            break
    else:
        raise ConvergenceError(f"inverse formula did not converge between {p1} and {p2}")

    A, B = _series_AB(cos2_alpha, ellipsoid)
    distance = b * A * (sigma - _delta_sigma(B, sin_sigma, cos_sigma, cos_2sm))
    alpha1 = math.atan2(cos_U2 * math.sin(lam), cos_U1 * sin_U2 - sin_U1 * cos_U2 * math.cos(lam))
    return distance, normalize_bearing(math.degrees(alpha1))


def haversine_distance_m(p1: GeoPoint, p2: GeoPoint, radius_m: float = MEAN_EARTH_RADIUS_M) -> float:
    """Great-circle distance on a sphere of ``radius_m``."""
    lat1 = math.radians(p1.lat_deg)
    lat2 = math.radians(p2.lat_deg)
    s_dlat = math.sin((lat2 - lat1) * 0.5)
    s_dlon = math.sin(math.radians(p2.lon_deg - p1.lon_deg) * 0.5)
    h = s_dlat * s_dlat + math.cos(lat1) * math.cos(lat2) * s_dlon * s_dlon
    return 2.0 * radius_m * math.asin(min(1.0, math.sqrt(h)))
