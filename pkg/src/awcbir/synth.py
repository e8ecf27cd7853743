"""Synthetic tiles with planted ground truth.

Real four-band scenes are large and not redistributable, so tests and
demos run on generated tiles: a vegetation-like background plus planted
pixel populations drawn from the interiors of the class threshold boxes
by seeded rejection sampling. The accompanying calibration is constructed
so reflectance comes out as DN/max_dn through the ordinary pipeline,
which makes DN pool bounds easy to reason about.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from pathlib import Path

import numpy as np

from .dss import FeatureRange, ThresholdTable, default_thresholds
from .errors import ValidationError
from .radiometry import BandCalibration, solar_geometry_for, write_calibration_config
from .tile_io import BANDS, Band, BandRaster, TileBundle, TileMetadata, write_band_tiff

#: Interior margin for band/brt/ndvi features during rejection sampling;
#: absorbs the few-ulp gap between dn/max_dn and the pipeline reflectance.
FEATURE_MARGIN = 1e-7
#: Same idea for the burnt-area index, which lives on a ~1e3 scale.
BAIM_MARGIN = 1e-3

_SAMPLER_MAX_ROUNDS = 1000


def default_metadata(
    tile_id: str = "planted-001",
    capture_date: dt.date = dt.date(2008, 4, 15),
    center_latitude: float = 19.0,
    center_longitude: float = 78.5,
) -> TileMetadata:
    """Plausible capture metadata for a synthetic tile (dry-season scene
    at southern-peninsula latitudes, morning overpass)."""
    return TileMetadata(
        tile_id=tile_id,
        capture_date=capture_date,
        center_latitude=center_latitude,
        center_longitude=center_longitude,
        acquisition_time=None,
        radiometric_bits=12,
    )


def synthetic_calibration(metadata: TileMetadata) -> dict[Band, BandCalibration]:
    """Calibration under which the pipeline maps DN to DN/max_dn.

    esun is chosen as pi * lmax * d^2 / cos(zenith) for the tile's own
    solar geometry, which cancels the reflectance conversion exactly (up
    to float rounding)."""
    geom = solar_geometry_for(metadata)
    lmax = 100.0
    cz = math.cos(math.radians(geom.solar_zenith_deg))
    esun = math.pi * lmax * geom.earth_sun_distance_au ** 2 / cz
    cal = BandCalibration(
        lmin=0.0, lmax=lmax, qcal_min=0, qcal_max=metadata.max_dn, esun=esun
    )
    return {band: cal for band in BANDS}


# --- rejection sampling of DN quadruples ---------------------------------------

def _inside(r: FeatureRange, v: np.ndarray, margin: float) -> np.ndarray:
    return (v > r.lo + margin) & (v < r.hi - margin)


def _outside(box: dict[str, FeatureRange], values: dict[str, np.ndarray], keys, margin: float) -> np.ndarray:
    """Clear of the box by margin on at least one feature."""
    out = np.zeros(values[keys[0]].shape, dtype=bool)
    for k in keys:
        r = box[k]
        out |= (values[k] < r.lo - margin) | (values[k] > r.hi + margin)
    return out


def _feature_values(b2, b3, b4, b5) -> dict[str, np.ndarray]:
    return {
        "b2": b2,
        "b3": b3,
        "b4": b4,
        "b5": b5,
        "brt": b2 + b3 + b4 + b5,
        "ndvi": (b4 - b3) / (b4 + b3),
    }


_WATER_KEYS = ("b2", "b3", "b4", "b5", "brt", "ndvi")
_BAND_KEYS = ("b2", "b3", "b4", "b5")


def _accept_clear(t: ThresholdTable, b2, b3, b4, b5) -> np.ndarray:
    v = _feature_values(b2, b3, b4, b5)
    ok = np.ones(b2.shape, dtype=bool)
    for k in _WATER_KEYS:
        ok &= _inside(t.clear_water[k], v[k], FEATURE_MARGIN)
    ok &= _outside(t.muddy_water, v, _WATER_KEYS, FEATURE_MARGIN)
    ok &= _outside(t.burnt_probable, v, _BAND_KEYS, FEATURE_MARGIN)
    return ok


def _accept_muddy(t: ThresholdTable, b2, b3, b4, b5) -> np.ndarray:
    v = _feature_values(b2, b3, b4, b5)
    ok = np.ones(b2.shape, dtype=bool)
    for k in _WATER_KEYS:
        ok &= _inside(t.muddy_water[k], v[k], FEATURE_MARGIN)
    ok &= _outside(t.clear_water, v, _WATER_KEYS, FEATURE_MARGIN)
    ok &= _outside(t.burnt_probable, v, _BAND_KEYS, FEATURE_MARGIN)
    return ok


def _accept_burnt_sure(t: ThresholdTable, b2, b3, b4, b5) -> np.ndarray:
    v = _feature_values(b2, b3, b4, b5)
    ok = np.ones(b2.shape, dtype=bool)
    for k in _BAND_KEYS:
        ok &= _inside(t.burnt_probable[k], v[k], FEATURE_MARGIN)
    baim = 1.0 / ((0.05 - b4) ** 2 + (0.02 - b5) ** 2)
    ok &= _inside(t.burnt_sure["baim"], baim, BAIM_MARGIN)
    ok &= _inside(t.burnt_sure["ndvi"], v["ndvi"], FEATURE_MARGIN)
    ok &= _inside(t.burnt_sure["brt"], v["brt"], FEATURE_MARGIN)
    return ok


#: DN sampling boxes per planted class (inclusive bounds per band B2..B5),
#: sized for a 12-bit range so DN/4095 lands inside the class thresholds
#: with high acceptance.
_DN_POOLS = {
    "clear": ((35, 55), (21, 40), (25, 60), (20, 60)),
    "muddy": ((60, 90), (30, 80), (70, 110), (65, 105)),
    "burnt": ((35, 40), (17, 32), (35, 69), (41, 53)),
    "background": ((380, 520), (300, 400), (1500, 2500), (700, 900)),
}

_ACCEPTORS = {
    "clear": _accept_clear,
    "muddy": _accept_muddy,
    "burnt": _accept_burnt_sure,
    "background": None,
}


def sample_dn_quadruples(
    rng: np.random.Generator,
    kind: str,
    n: int,
    max_dn: int = 4095,
    table: ThresholdTable | None = None,
) -> np.ndarray:
    """n DN quadruples (columns B2..B5) whose pipeline reflectances land
    strictly inside the feature box of the requested class."""
    if kind not in _DN_POOLS:
        raise ValidationError(f"unknown planted class {kind!r}")
    if n == 0:
        return np.empty((0, 4), dtype=np.uint16)
    t = table or default_thresholds()
    bounds = _DN_POOLS[kind]
    accept = _ACCEPTORS[kind]
    taken: list[np.ndarray] = []
    filled = 0
    for _ in range(_SAMPLER_MAX_ROUNDS):
        batch = max(256, 2 * (n - filled))
        dn = np.column_stack(
            [rng.integers(lo, hi + 1, size=batch, dtype=np.uint16) for lo, hi in bounds]
        )
        if accept is None:
            keep = dn
        else:
            rho = dn.astype(np.float64) / max_dn
            keep = dn[accept(t, rho[:, 0], rho[:, 1], rho[:, 2], rho[:, 3])]
        keep = keep[: n - filled]
        if len(keep):
            taken.append(keep)
            filled += len(keep)
        if filled == n:
            return np.concatenate(taken)
    raise ValidationError(
        f"rejection sampling for {kind!r} stalled; thresholds and DN pool disagree"
    )


# --- planted tiles --------------------------------------------------------------

def _background_dn(rng: np.random.Generator, height: int, width: int) -> dict[Band, np.ndarray]:
    quads = sample_dn_quadruples(rng, "background", height * width)
    return {
        band: quads[:, i].reshape(height, width).copy()
        for i, band in enumerate(BANDS)
    }


def _scatter(dn: dict[Band, np.ndarray], flat_positions: np.ndarray, quads: np.ndarray) -> None:
    for i, band in enumerate(BANDS):
        dn[band].ravel()[flat_positions] = quads[:, i]


def planted_tile(
    tile_id: str = "planted-001",
    capture_date: dt.date = dt.date(2008, 4, 15),
    height: int = 100,
    width: int = 100,
    clear_px: int = 400,
    muddy_px: int = 300,
    burnt_px: int = 250,
    seed: int = 20080415,
) -> tuple[TileBundle, dict[str, np.ndarray]]:
    """Background tile with planted clear-water, muddy-water and sure-burnt
    runs, plus the expected water and burnt label grids.

    Classes occupy disjoint row bands (top / middle / bottom third), each
    filled row-major, so any pixel budget up to a third of the tile works.
    Burnt pixels appear as NonWater in the water truth: the segmenter
    resolves the burnt/water ambiguity toward burnt.
    """
    third = (height // 3) * width
    for name, count in (("clear", clear_px), ("muddy", muddy_px), ("burnt", burnt_px)):
        if count > third:
            raise ValidationError(f"{name}_px {count} exceeds a third of the tile ({third})")
    rng = np.random.default_rng(seed)
    dn = _background_dn(rng, height, width)

    anchors = {
        "clear": 0,
        "muddy": (height // 3) * width,
        "burnt": (2 * height // 3) * width,
    }
    water_truth = np.zeros((height, width), dtype=np.uint8)
    burnt_truth = np.zeros((height, width), dtype=np.uint8)
    for kind, count in (("clear", clear_px), ("muddy", muddy_px), ("burnt", burnt_px)):
        if count == 0:
            continue
        positions = np.arange(anchors[kind], anchors[kind] + count)
        _scatter(dn, positions, sample_dn_quadruples(rng, kind, count))
        if kind == "clear":
            water_truth.ravel()[positions] = 255
        elif kind == "muddy":
            water_truth.ravel()[positions] = 63
        else:
            burnt_truth.ravel()[positions] = 255

    metadata = default_metadata(tile_id=tile_id, capture_date=capture_date)
    bundle = TileBundle(
        metadata=metadata,
        bands={band: BandRaster(band=band, dn=dn[band]) for band in BANDS},
    )
    return bundle, {"water": water_truth, "burnt": burnt_truth}


def sparse_water_tile(
    tile_id: str,
    capture_date: dt.date,
    height: int,
    width: int,
    water_px: int,
    seed: int,
) -> tuple[TileBundle, np.ndarray]:
    """Background tile with water_px clear-water pixels scattered at
    distinct random positions; returns the expected water label grid."""
    if water_px > height * width:
        raise ValidationError(f"water_px {water_px} exceeds tile size {height * width}")
    rng = np.random.default_rng(seed)
    dn = _background_dn(rng, height, width)
    water_truth = np.zeros((height, width), dtype=np.uint8)
    if water_px:
        positions = rng.choice(height * width, size=water_px, replace=False)
        _scatter(dn, positions, sample_dn_quadruples(rng, "clear", water_px))
        water_truth.ravel()[positions] = 255
    metadata = default_metadata(tile_id=tile_id, capture_date=capture_date)
    bundle = TileBundle(
        metadata=metadata,
        bands={band: BandRaster(band=band, dn=dn[band]) for band in BANDS},
    )
    return bundle, water_truth


# --- on-disk inputs for the ingest pipeline -------------------------------------

def write_meta_sidecar(path: str | Path, metadata: TileMetadata) -> None:
    """JSON sidecar describing a capture, as consumed by tile ingest."""
    payload = {
        "tile_id": metadata.tile_id,
        "capture_date": metadata.capture_date.isoformat(),
        "center_latitude": metadata.center_latitude,
        "center_longitude": metadata.center_longitude,
        "acquisition_time": metadata.acquisition_time,
        "radiometric_bits": metadata.radiometric_bits,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_tile_inputs(
    outdir: str | Path,
    bundle: TileBundle,
    cals: dict[Band, BandCalibration] | None = None,
) -> dict[str, Path]:
    """Materialize a bundle as ingest-ready files: one 16-bit TIFF per
    band, a metadata sidecar, and a matching calibration config."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for band in BANDS:
        p = out / f"band_{band.value}.tif"
        write_band_tiff(bundle.bands[band], p)
        paths[band.value] = p
    paths["meta"] = out / "meta.json"
    write_meta_sidecar(paths["meta"], bundle.metadata)
    paths["calibration"] = out / "calibration.cfg"
    write_calibration_config(
        paths["calibration"], cals or synthetic_calibration(bundle.metadata)
    )
    return paths
