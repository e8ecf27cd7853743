"""DN-to-reflectance calibration: spectral radiance, solar geometry, TOA.

Quantized DNs become at-sensor spectral radiance through a per-band affine
map anchored at the calibration endpoints, then top-of-atmosphere
reflectance through the solar irradiance / distance / zenith correction.
Reflectance is a ratio, so any radiance unit system works as long as the
per-band lmin/lmax and esun constants share it.

DN 0 is treated as sensor fill (NoData) and comes out as NaN; everything
downstream treats NaN as "not a usable pixel".
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    QcalOutOfRangeError,
    SunBelowHorizonError,
    ValidationError,
    ZenithDegenerateError,
)
from .tile_io import BANDS, Band, BandRaster, TileBundle, TileMetadata

#: Reflectance NoData marker.
NODATA = float("nan")

#: DN value treated as sensor fill.
NODATA_DN = 0

#: Sun-synchronous descending-node convention, used when a tile's metadata
#: carries no acquisition time.
DEFAULT_LOCAL_SOLAR_TIME = 10.5

#: cos(zenith) below this is too small to divide reflectance by safely.
ZENITH_COS_EPSILON = 1e-6

# cos(90 deg) evaluates to ~6e-17 in floats; anything at or below this
# slack counts as "sun at the horizon".
_HORIZON_COS_SLACK = 1e-9


@dataclass(frozen=True)
class BandCalibration:
    """Per-band radiometric constants driving the DN -> reflectance pipeline.

    lmin/lmax are the spectral radiances scaled to qcal_min/qcal_max; esun is
    the mean solar exo-atmospheric irradiance in the same unit family.
    """

    lmin: float
    lmax: float
    qcal_min: int
    qcal_max: int
    esun: float

    def __post_init__(self) -> None:
        if not self.lmax > self.lmin:
            raise ValidationError(f"lmax ({self.lmax}) must exceed lmin ({self.lmin})")
        if not self.qcal_max > self.qcal_min:
            raise ValidationError(
                f"qcal_max ({self.qcal_max}) must exceed qcal_min ({self.qcal_min})"
            )
        if not self.esun > 0:
            raise ValidationError(f"esun must be positive, got {self.esun}")

    @property
    def gain(self) -> float:
        return (self.lmax - self.lmin) / (self.qcal_max - self.qcal_min)


@dataclass(frozen=True)
class SolarGeometry:
    """Earth-sun distance and solar zenith for one tile capture."""

    earth_sun_distance_au: float
    solar_zenith_deg: float

    def __post_init__(self) -> None:
        if not 0.9 < self.earth_sun_distance_au < 1.1:
            raise ValidationError(
                f"earth-sun distance {self.earth_sun_distance_au} AU implausible"
            )
        if not 0.0 <= self.solar_zenith_deg < 90.0:
            raise ValidationError(
                f"solar zenith {self.solar_zenith_deg} deg outside [0, 90)"
            )


@dataclass
class ReflectanceRaster:
    """Unitless TOA reflectance grid; NaN marks NoData pixels."""

    band: Band
    rho: np.ndarray

    @property
    def height(self) -> int:
        return self.rho.shape[0]

    @property
    def width(self) -> int:
        return self.rho.shape[1]


def spectral_radiance(qcal: float, cal: BandCalibration) -> float:
    """At-sensor spectral radiance for one DN: affine, endpoint-exact.

    qcal_min maps to lmin and qcal_max to lmax exactly; the slope is
    (lmax - lmin) / (qcal_max - qcal_min).
    """
    if not cal.qcal_min <= qcal <= cal.qcal_max:
        raise QcalOutOfRangeError(
            f"DN {qcal} outside calibrated range [{cal.qcal_min}, {cal.qcal_max}]"
        )
    return cal.lmin + (qcal - cal.qcal_min) * cal.gain


def _day_of_year(capture_date: dt.date | int) -> int:
    if isinstance(capture_date, dt.date):
        return capture_date.timetuple().tm_yday
    doy = int(capture_date)
    if not 1 <= doy <= 366:
        raise ValidationError(f"day of year {doy} outside [1, 366]")
    return doy


def earth_sun_distance(capture_date: dt.date | int) -> float:
    """Earth-sun distance in AU via the day-of-year cosine approximation.

    Accepts a date or a day-of-year integer. Stays within
    [0.98328, 1.01672] for every day of the year.
    """
    doy = _day_of_year(capture_date)
    return 1.0 - 0.01672 * math.cos(math.radians(0.9856 * (doy - 4)))


def solar_declination(capture_date: dt.date | int) -> float:
    """Solar declination in degrees (Cooper's formula)."""
    doy = _day_of_year(capture_date)
    return 23.45 * math.sin(math.radians(360.0 * (284 + doy) / 365.0))


def solar_zenith(
    capture_date: dt.date | int,
    latitude_deg: float,
    local_solar_time_hours: float,
) -> float:
    """Solar zenith angle in degrees from date, latitude and local solar time.

    cos(zenith) = sin(lat) sin(decl) + cos(lat) cos(decl) cos(hour_angle),
    with the hour angle at 15 degrees per hour from solar noon. Raises
    SunBelowHorizonError when the sun is at or below the horizon.
    """
    if not -90.0 <= latitude_deg <= 90.0:
        raise ValidationError(f"latitude {latitude_deg} outside [-90, 90]")
    if not 0.0 <= local_solar_time_hours < 24.0:
        raise ValidationError(f"local solar time {local_solar_time_hours} outside [0, 24)")

    decl = math.radians(solar_declination(capture_date))
    lat = math.radians(latitude_deg)
    hour_angle = math.radians(15.0 * (local_solar_time_hours - 12.0))
    cos_zenith = math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(hour_angle)
    if cos_zenith <= _HORIZON_COS_SLACK:
        raise SunBelowHorizonError(
            f"sun at or below horizon (cos zenith = {cos_zenith:.3e})"
        )
    return math.degrees(math.acos(min(cos_zenith, 1.0)))


def toa_reflectance(radiance: float, cal: BandCalibration, geom: SolarGeometry) -> float:
    """Top-of-atmosphere reflectance: pi * L * d^2 / (esun * cos(zenith))."""
    cos_zenith = math.cos(math.radians(geom.solar_zenith_deg))
    if cos_zenith <= ZENITH_COS_EPSILON:
        raise ZenithDegenerateError(
            f"cos(zenith) = {cos_zenith:.3e} too small for reflectance conversion"
        )
    return math.pi * radiance * geom.earth_sun_distance_au ** 2 / (cal.esun * cos_zenith)


def solar_geometry_for(metadata: TileMetadata) -> SolarGeometry:
    """Solar geometry for a tile from its metadata.

    Falls back to the 10:30 local-solar-time convention when the metadata
    carries no acquisition time.
    """
    t = metadata.acquisition_time
    if t is None:
        t = DEFAULT_LOCAL_SOLAR_TIME
    return SolarGeometry(
        earth_sun_distance_au=earth_sun_distance(metadata.capture_date),
        solar_zenith_deg=solar_zenith(metadata.capture_date, metadata.center_latitude, t),
    )


def calibrate_band(
    raster: BandRaster,
    cal: BandCalibration,
    geom: SolarGeometry,
) -> ReflectanceRaster:
    """Element-wise DN -> radiance -> TOA reflectance over a whole band.

    DN 0 pixels become NaN (sensor fill). Any other DN outside the
    calibrated range raises QcalOutOfRangeError with its coordinates.
    """
    cos_zenith = math.cos(math.radians(geom.solar_zenith_deg))
    if cos_zenith <= ZENITH_COS_EPSILON:
        raise ZenithDegenerateError(
            f"cos(zenith) = {cos_zenith:.3e} too small for reflectance conversion"
        )

    dn = raster.dn
    valid = dn != NODATA_DN
    out_of_range = valid & ((dn < cal.qcal_min) | (dn > cal.qcal_max))
    if out_of_range.any():
        ys, xs = np.nonzero(out_of_range)
        y, x = int(ys[0]), int(xs[0])
        raise QcalOutOfRangeError(
            f"band {raster.band.value}: DN {int(dn[y, x])} outside "
            f"[{cal.qcal_min}, {cal.qcal_max}] at pixel (x={x}, y={y})"
        )

    radiance = cal.lmin + (dn.astype(np.float64) - cal.qcal_min) * cal.gain
    rho = math.pi * radiance * geom.earth_sun_distance_au ** 2 / (cal.esun * cos_zenith)
    rho[~valid] = NODATA
    return ReflectanceRaster(band=raster.band, rho=rho)


def calibrate_bundle(
    bundle: TileBundle,
    cals: dict[Band, BandCalibration],
    geom: SolarGeometry | None = None,
) -> dict[Band, ReflectanceRaster]:
    """Calibrate all four bands of a bundle with per-band constants."""
    if geom is None:
        geom = solar_geometry_for(bundle.metadata)
    missing = [b.value for b in BANDS if b not in cals]
    if missing:
        raise ConfigError(f"calibration config missing bands: {', '.join(missing)}")
    return {band: calibrate_band(bundle.bands[band], cals[band], geom) for band in BANDS}


# --- calibration config files ------------------------------------------------

_CAL_KEYS = ("lmin", "lmax", "qcal_min", "qcal_max", "esun")


def load_calibration_config(path: str | Path) -> dict[Band, BandCalibration]:
    """Parse a per-band calibration config.

    Format: one ``[B2]``-style section per band, ``key value`` lines for
    lmin, lmax, qcal_min, qcal_max and esun; ``#`` starts a comment. The
    pipeline requires lmin >= 0 so reflectances stay non-negative.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"calibration config not found: {p}")
    sections: dict[str, dict[str, float]] = {}
    current: dict[str, float] | None = None
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
            continue
        parts = line.split()
        if len(parts) != 2 or current is None:
            raise ConfigError(f"{p}:{lineno}: expected 'key value' inside a [band] section")
        key, value = parts
        if key not in _CAL_KEYS:
            raise ConfigError(f"{p}:{lineno}: unknown calibration key {key!r}")
        try:
            current[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"{p}:{lineno}: bad number {value!r}") from exc

    cals: dict[Band, BandCalibration] = {}
    for band in BANDS:
        section = sections.get(band.value)
        if section is None:
            raise ConfigError(f"{p}: missing [{band.value}] section")
        missing = [k for k in _CAL_KEYS if k not in section]
        if missing:
            raise ConfigError(f"{p}: [{band.value}] missing {', '.join(missing)}")
        if section["lmin"] < 0:
            raise ConfigError(
                f"{p}: [{band.value}] lmin must be >= 0 to keep reflectance non-negative"
            )
        try:
            cals[band] = BandCalibration(
                lmin=section["lmin"],
                lmax=section["lmax"],
                qcal_min=int(section["qcal_min"]),
                qcal_max=int(section["qcal_max"]),
                esun=section["esun"],
            )
        except ValidationError as exc:
            raise ConfigError(f"{p}: [{band.value}]: {exc}") from exc
    return cals


def write_calibration_config(path: str | Path, cals: dict[Band, BandCalibration]) -> None:
    """Write a calibration config in the format load_calibration_config reads."""
    lines = []
    for band in BANDS:
        cal = cals[band]
        lines.append(f"[{band.value}]")
        lines.append(f"lmin {cal.lmin!r}")
        lines.append(f"lmax {cal.lmax!r}")
        lines.append(f"qcal_min {cal.qcal_min}")
        lines.append(f"qcal_max {cal.qcal_max}")
        lines.append(f"esun {cal.esun!r}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def placeholder_calibration(bits: int = 12) -> dict[Band, BandCalibration]:
    """Stand-in constants for tooling demos. NOT physical sensor values.

    Real deployments must supply the operator-provided per-band lmin, lmax
    and esun for their sensor via a calibration config file.
    """
    max_dn = (1 << bits) - 1
    cal = BandCalibration(lmin=0.0, lmax=float(max_dn) / 100.0, qcal_min=0, qcal_max=max_dn, esun=math.pi * max_dn / 100.0)
    return {band: cal for band in BANDS}
