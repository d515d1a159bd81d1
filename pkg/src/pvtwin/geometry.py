"""Solar position and clear-sky plane-of-array irradiance.

Solar position follows the NOAA general solar position formulation
(mean orbital elements, declination and equation of time); its error
against a full ephemeris is a few hundredths of a degree between 1950
and 2050. Clear-sky irradiance uses a Meinel-type beam attenuation with
pressure-corrected Kasten-Young air mass, a fixed diffuse fraction, and
isotropic-sky transposition to the tilted plane.

All timestamps are local standard time; ``GeoLocation.utc_offset``
converts them to UTC. No daylight saving time is applied.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InputError

SOLAR_CONSTANT = 1353.0  # W/m2, the constant the 0.7^(AM^0.678) fit was built on
DIFFUSE_FRACTION = 0.1
ALBEDO = 0.2


@dataclass(frozen=True)
class GeoLocation:
    latitude: float
    longitude: float
    altitude: float = 0.0
    utc_offset: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InputError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InputError(f"longitude {self.longitude} outside [-180, 180]")
        if self.altitude < -500.0:
            raise InputError(f"altitude {self.altitude} below -500 m")


@dataclass(frozen=True)
class ArrayOrientation:
    tilt: float
    azimuth: float

    def __post_init__(self):
        if not 0.0 <= self.tilt <= 90.0:
            raise InputError(f"tilt {self.tilt} outside [0, 90]")
        if not 0.0 <= self.azimuth < 360.0:
            raise InputError(f"azimuth {self.azimuth} outside [0, 360)")


@dataclass(frozen=True)
class SolarPosition:
    zenith: np.ndarray | float
    azimuth: np.ndarray | float


def _to_utc_minutes(t, utc_offset):
    """Return (julian day, minutes past UTC midnight) arrays for local timestamps."""
    try:
        idx = pd.DatetimeIndex(np.atleast_1d(pd.to_datetime(t)))
    except (ValueError, TypeError) as exc:
        raise InputError(f"invalid timestamp {t!r}") from exc
    if idx.tz is not None:
        idx = idx.tz_convert("UTC").tz_localize(None)
        utc = idx
    else:
        utc = idx - pd.to_timedelta(utc_offset, unit="h")
    if utc.hasnans:
        raise InputError("timestamps contain NaT")
    # ns since epoch -> days; JD of 1970-01-01T00:00 UTC is 2440587.5
    ns = utc.asi8.astype(np.float64)
    days = ns / 86_400e9
    jd = 2440587.5 + days
    minutes = (days - np.floor(days)) * 1440.0
    return jd, minutes, idx


def _sun_terms(jd):
    """Declination (rad), equation of time (min) and eccentricity factor."""
    T = (jd - 2451545.0) / 36525.0
    L0 = np.deg2rad((280.46646 + T * (36000.76983 + T * 0.0003032)) % 360.0)
    M_deg = 357.52911 + T * (35999.05029 - 0.0001537 * T)
    M = np.deg2rad(M_deg)
    e = 0.016708634 - T * (0.000042037 + 0.0000001267 * T)
    C = (np.sin(M) * (1.914602 - T * (0.004817 + 0.000014 * T))
         + np.sin(2 * M) * (0.019993 - 0.000101 * T)
         + np.sin(3 * M) * 0.000289)
    true_long = np.rad2deg(L0) + C
    omega = np.deg2rad(125.04 - 1934.136 * T)
    app_long = np.deg2rad(true_long - 0.00569 - 0.00478 * np.sin(omega))
    eps0 = 23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0
    eps = np.deg2rad(eps0 + 0.00256 * np.cos(omega))
    decl = np.arcsin(np.sin(eps) * np.sin(app_long))
    y = np.tan(eps / 2.0) ** 2
    eot = 4.0 * np.rad2deg(
        y * np.sin(2 * L0)
        - 2 * e * np.sin(M)
        + 4 * e * y * np.sin(M) * np.cos(2 * L0)
        - 0.5 * y * y * np.sin(4 * L0)
        - 1.25 * e * e * np.sin(2 * M)
    )
    # Earth-Sun distance from the true anomaly
    nu = M + np.deg2rad(C)
    r = 1.000001018 * (1 - e * e) / (1 + e * np.cos(nu))
    return decl, eot, 1.0 / r ** 2


def _scalar_or_array(x, scalar):
    return float(x[0]) if scalar else x


def solar_position(t, loc: GeoLocation) -> SolarPosition:
    """Geometric solar zenith and azimuth (degrees, azimuth clockwise from north).

    Parameters
    ----------
    t : timestamp-like or array of timestamps
        Local standard time (naive) or timezone-aware timestamps.
    loc : GeoLocation
    """
    scalar = np.ndim(t) == 0 and not isinstance(t, (pd.DatetimeIndex, pd.Series))
    jd, minutes, _ = _to_utc_minutes(t, loc.utc_offset)
    decl, eot, _ = _sun_terms(jd)
    true_solar = minutes + eot + 4.0 * loc.longitude
    hour_angle = np.deg2rad(true_solar / 4.0 - 180.0)
    lat = np.deg2rad(loc.latitude)
    cos_z = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(hour_angle)
    zenith = np.rad2deg(np.arccos(np.clip(cos_z, -1.0, 1.0)))
    az = np.rad2deg(np.arctan2(np.sin(hour_angle),
                               np.cos(hour_angle) * np.sin(lat) - np.tan(decl) * np.cos(lat)))
    azimuth = (az + 180.0) % 360.0
    return SolarPosition(_scalar_or_array(zenith, scalar), _scalar_or_array(azimuth, scalar))


def equation_of_time(t, utc_offset=0.0):
    """Equation of time in minutes (apparent minus mean solar time)."""
    jd, _, _ = _to_utc_minutes(t, utc_offset)
    return _sun_terms(jd)[1]


def air_mass(zenith):
    """Kasten-Young relative optical air mass; NaN at or below the horizon."""
    z = np.asarray(zenith, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        am = 1.0 / (np.cos(np.deg2rad(z)) + 0.50572 * (96.07995 - z) ** -1.6364)
    return np.where(z < 90.0, am, np.nan)


def pressure_ratio(altitude):
    """Standard-atmosphere pressure relative to sea level."""
    return (1.0 - 2.25577e-5 * np.asarray(altitude, dtype=float)) ** 5.25588


def angle_of_incidence(zenith, azimuth, orient: ArrayOrientation):
    """Cosine of the beam angle of incidence on the tilted plane."""
    z = np.deg2rad(zenith)
    tilt = np.deg2rad(orient.tilt)
    return (np.cos(z) * np.cos(tilt)
            + np.sin(z) * np.sin(tilt) * np.cos(np.deg2rad(np.asarray(azimuth) - orient.azimuth)))


def _clear_sky(t, loc, orient):
    jd, _, _ = _to_utc_minutes(t, loc.utc_offset)
    pos = solar_position(t, loc)
    zenith = np.atleast_1d(pos.zenith)
    azimuth = np.atleast_1d(pos.azimuth)
    _, _, ecc = _sun_terms(jd)
    up = zenith < 90.0
    am_abs = air_mass(np.where(up, zenith, 0.0)) * pressure_ratio(loc.altitude)
    dni = SOLAR_CONSTANT * ecc * 0.7 ** (am_abs ** 0.678)
    dhi = DIFFUSE_FRACTION * dni
    cos_z = np.cos(np.deg2rad(zenith))
    ghi = dni * cos_z + dhi
    cos_aoi = angle_of_incidence(zenith, azimuth, orient)
    tilt = np.deg2rad(orient.tilt)
    poa = (dni * np.clip(cos_aoi, 0.0, None)
           + dhi * (1.0 + np.cos(tilt)) / 2.0
           + ghi * ALBEDO * (1.0 - np.cos(tilt)) / 2.0)
    return np.where(up, ghi, 0.0), np.where(up, poa, 0.0)


def clear_sky_poa(t, loc: GeoLocation, orient: ArrayOrientation):
    """Clear-sky plane-of-array irradiance G_cs in W/m2 (0 when the sun is down)."""
    scalar = np.ndim(t) == 0 and not isinstance(t, (pd.DatetimeIndex, pd.Series))
    return _scalar_or_array(_clear_sky(t, loc, orient)[1], scalar)


def clear_sky_ghi(t, loc: GeoLocation):
    """Clear-sky global horizontal irradiance in W/m2."""
    scalar = np.ndim(t) == 0 and not isinstance(t, (pd.DatetimeIndex, pd.Series))
    return _scalar_or_array(_clear_sky(t, loc, ArrayOrientation(0.0, 180.0))[0], scalar)
