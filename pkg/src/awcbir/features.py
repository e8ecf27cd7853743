"""Pixel features (NDVI, brightness, burnt-area index) and sparse vectors.

Features are computed on TOA reflectance, never on raw DNs. A sparse
feature vector (SFV) keeps only the pixels some segmentation found
relevant, each with its coordinates and feature values, ordered row-major
by (y, x) so two vectors over the same mask are byte-comparable.
"""

from __future__ import annotations

import datetime as dt
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BaimSingularityError,
    MissingBaimError,
    SfvUnreadableError,
    ValidationError,
)
from .tile_io import Band

SFV_MAGIC = b"AWFV"
SFV_VERSION = 1
_SFV_FLAG_BAIM = 0x01

# magic, version u8, flags u8, 10 reserved, total_pixels u64, entry_count u64
_SFV_HEADER = struct.Struct("<4sBB10xQQ")


@dataclass(frozen=True)
class FeatureConfig:
    """Knobs for feature computation.

    ndvi_orientation selects which band is treated as the numerator lead:
    "standard_nir_red" gives (nir - red) / (nir + red); "red_minus_nir" gives
    the sign-flipped (red - nir) / (red + nir) that some legacy threshold
    tables were derived against. Thresholds and NDVI orientation must come
    from the same convention.
    """

    ndvi_orientation: str = "standard_nir_red"
    pc_nir: float = 0.05
    pc_swir: float = 0.02
    baim_singularity_epsilon: float = 1e-12

    def __post_init__(self) -> None:
        if self.ndvi_orientation not in ("standard_nir_red", "red_minus_nir"):
            raise ValidationError(
                f"unknown ndvi_orientation {self.ndvi_orientation!r}"
            )
        if self.baim_singularity_epsilon <= 0:
            raise ValidationError("baim_singularity_epsilon must be positive")


def ndvi(red: float, nir: float, cfg: FeatureConfig | None = None) -> float:
    """Normalized difference vegetation index of one pixel.

    Returns NaN when red + nir == 0 (both NoData or both zero), keeping
    the pixel out of every threshold range downstream.
    """
    orientation = (cfg or _DEFAULT_CFG).ndvi_orientation
    denom = nir + red
    if denom == 0 or denom != denom:
        return float("nan")
    if orientation == "red_minus_nir":
        return (red - nir) / denom
    return (nir - red) / denom


def brightness(b2: float, b3: float, b4: float, b5: float) -> float:
    """Sum-of-bands brightness (BRT)."""
    return b2 + b3 + b4 + b5


def baim(nir: float, swir: float, cfg: FeatureConfig | None = None) -> float:
    """Burnt-area index: inverse squared distance to the burnt convergence
    point (pc_nir, pc_swir) in NIR/SWIR reflectance space.

    Raises BaimSingularityError when the pixel sits numerically on the
    convergence point itself.
    """
    c = cfg or _DEFAULT_CFG
    denom = (c.pc_nir - nir) ** 2 + (c.pc_swir - swir) ** 2
    if denom != denom:
        return float("nan")
    if denom < c.baim_singularity_epsilon:
        raise BaimSingularityError(
            f"pixel at the burnt convergence point ({nir}, {swir}); BAIM undefined"
        )
    return 1.0 / denom


_DEFAULT_CFG = FeatureConfig()


def ndvi_grid(red: np.ndarray, nir: np.ndarray, cfg: FeatureConfig | None = None) -> np.ndarray:
    """Vectorized NDVI; zero-sum and NoData pixels come out NaN."""
    orientation = (cfg or _DEFAULT_CFG).ndvi_orientation
    denom = nir + red
    num = (red - nir) if orientation == "red_minus_nir" else (nir - red)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / denom
    out[denom == 0] = np.nan
    return out


def brightness_grid(b2: np.ndarray, b3: np.ndarray, b4: np.ndarray, b5: np.ndarray) -> np.ndarray:
    return b2 + b3 + b4 + b5


def baim_grid(nir: np.ndarray, swir: np.ndarray, cfg: FeatureConfig | None = None) -> np.ndarray:
    """Vectorized BAIM. Pixels inside the singularity epsilon raise; NoData
    stays NaN."""
    c = cfg or _DEFAULT_CFG
    denom = (c.pc_nir - nir) ** 2 + (c.pc_swir - swir) ** 2
    singular = denom < c.baim_singularity_epsilon
    # NaN compares false, so NoData never trips the singularity check
    if singular.any():
        ys, xs = np.nonzero(singular)
        raise BaimSingularityError(
            f"pixel (x={int(xs[0])}, y={int(ys[0])}) at the burnt convergence point; "
            "BAIM undefined"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / denom


@dataclass(frozen=True)
class PixelFeatures:
    """Feature values of one relevant pixel."""

    x: int
    y: int
    b2: float
    b3: float
    b4: float
    b5: float
    ndvi: float
    brt: float
    baim: float | None = None


@dataclass
class SparseFeatureVector:
    """Columnar sparse feature vector over one tile's relevant pixels.

    Arrays are parallel and ordered strictly by (y, x). total_pixels is the
    full tile area, so relevance density is recoverable without the tile.
    """

    tile_id: str
    capture_date: dt.date
    total_pixels: int
    xs: np.ndarray
    ys: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b5: np.ndarray
    ndvi: np.ndarray
    brt: np.ndarray
    baim: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.xs)
        cols = [self.ys, self.b2, self.b3, self.b4, self.b5, self.ndvi, self.brt]
        if self.baim is not None:
            cols.append(self.baim)
        if any(len(c) != n for c in cols):
            raise ValidationError("sparse feature vector columns differ in length")
        if self.total_pixels < n:
            raise ValidationError(
                f"entry count {n} exceeds total_pixels {self.total_pixels}"
            )
        if n > 1:
            keys = self.ys.astype(np.uint64) << np.uint64(32) | self.xs.astype(np.uint64)
            if not (keys[1:] > keys[:-1]).all():
                raise ValidationError("sparse feature vector entries not ordered by (y, x)")

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def has_baim(self) -> bool:
        return self.baim is not None

    @property
    def relevant_fraction(self) -> float:
        if self.total_pixels == 0:
            return 0.0
        return len(self) / self.total_pixels

    def coordinate_keys(self) -> np.ndarray:
        """Packed u64 (x << 32 | y) per entry, for fast set operations."""
        return self.xs.astype(np.uint64) << np.uint64(32) | self.ys.astype(np.uint64)

    def entry(self, i: int) -> PixelFeatures:
        return PixelFeatures(
            x=int(self.xs[i]),
            y=int(self.ys[i]),
            b2=float(self.b2[i]),
            b3=float(self.b3[i]),
            b4=float(self.b4[i]),
            b5=float(self.b5[i]),
            ndvi=float(self.ndvi[i]),
            brt=float(self.brt[i]),
            baim=float(self.baim[i]) if self.baim is not None else None,
        )


def build_sfv(
    rho: dict[Band, np.ndarray],
    relevance,
    tile_id: str,
    capture_date: dt.date,
    cfg: FeatureConfig | None = None,
    include_baim: bool = False,
) -> SparseFeatureVector:
    """Assemble a sparse feature vector from reflectance grids and a
    relevance mask.

    relevance is any 2D array (or an object with a .labels array) whose
    non-zero entries mark the pixels worth keeping. Entries come out in
    np.nonzero's row-major order, which is exactly the required (y, x)
    ordering.
    """
    labels = getattr(relevance, "labels", relevance)
    labels = np.asarray(labels)
    b2 = rho[Band.B2]
    if labels.shape != b2.shape:
        raise ValidationError(
            f"relevance shape {labels.shape} does not match raster shape {b2.shape}"
        )
    c = cfg or _DEFAULT_CFG
    ys, xs = np.nonzero(labels)
    cols = {band: rho[band][ys, xs] for band in Band}
    denom = cols[Band.B4] + cols[Band.B3]
    num = (
        cols[Band.B3] - cols[Band.B4]
        if c.ndvi_orientation == "red_minus_nir"
        else cols[Band.B4] - cols[Band.B3]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ndvi_col = num / denom
    ndvi_col = np.where(denom == 0, np.nan, ndvi_col)
    brt_col = cols[Band.B2] + cols[Band.B3] + cols[Band.B4] + cols[Band.B5]
    baim_col = None
    if include_baim:
        d = (c.pc_nir - cols[Band.B4]) ** 2 + (c.pc_swir - cols[Band.B5]) ** 2
        if (d < c.baim_singularity_epsilon).any():
            i = int(np.nonzero(d < c.baim_singularity_epsilon)[0][0])
            raise BaimSingularityError(
                f"pixel (x={int(xs[i])}, y={int(ys[i])}) at the burnt convergence "
                "point; BAIM undefined"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            baim_col = 1.0 / d
    return SparseFeatureVector(
        tile_id=tile_id,
        capture_date=capture_date,
        total_pixels=int(labels.size),
        xs=xs.astype(np.uint32),
        ys=ys.astype(np.uint32),
        b2=cols[Band.B2].astype(np.float64),
        b3=cols[Band.B3].astype(np.float64),
        b4=cols[Band.B4].astype(np.float64),
        b5=cols[Band.B5].astype(np.float64),
        ndvi=ndvi_col.astype(np.float64),
        brt=brt_col.astype(np.float64),
        baim=baim_col.astype(np.float64) if baim_col is not None else None,
    )


# --- binary serialization ----------------------------------------------------

def _record_dtype(has_baim: bool) -> np.dtype:
    fields = [
        ("x", "<u4"),
        ("y", "<u4"),
        ("b2", "<f8"),
        ("b3", "<f8"),
        ("b4", "<f8"),
        ("b5", "<f8"),
        ("ndvi", "<f8"),
        ("brt", "<f8"),
    ]
    if has_baim:
        fields.append(("baim", "<f8"))
    return np.dtype(fields)


def write_sfv(sfv: SparseFeatureVector, path: str | Path) -> None:
    """Serialize an SFV: fixed 32-byte header then packed little-endian
    records ordered by (y, x)."""
    flags = _SFV_FLAG_BAIM if sfv.has_baim else 0
    header = _SFV_HEADER.pack(SFV_MAGIC, SFV_VERSION, flags, sfv.total_pixels, len(sfv))
    rec = np.empty(len(sfv), dtype=_record_dtype(sfv.has_baim))
    rec["x"] = sfv.xs
    rec["y"] = sfv.ys
    rec["b2"] = sfv.b2
    rec["b3"] = sfv.b3
    rec["b4"] = sfv.b4
    rec["b5"] = sfv.b5
    rec["ndvi"] = sfv.ndvi
    rec["brt"] = sfv.brt
    if sfv.has_baim:
        rec["baim"] = sfv.baim
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_sfv(path: str | Path, tile_id: str = "", capture_date: dt.date | None = None) -> SparseFeatureVector:
    """Read an SFV file back. tile_id/capture_date are carried by the store
    layout, not the file, so callers pass them in."""
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise SfvUnreadableError(f"cannot read feature vector {p}: {exc}") from exc
    if len(blob) < _SFV_HEADER.size:
        raise SfvUnreadableError(f"feature vector {p} truncated ({len(blob)} bytes)")
    magic, version, flags, total_pixels, entry_count = _SFV_HEADER.unpack_from(blob)
    if magic != SFV_MAGIC:
        raise SfvUnreadableError(f"feature vector {p} has bad magic {magic!r}")
    if version != SFV_VERSION:
        raise SfvUnreadableError(f"feature vector {p} has unsupported version {version}")
    has_baim = bool(flags & _SFV_FLAG_BAIM)
    dtype = _record_dtype(has_baim)
    expected = _SFV_HEADER.size + entry_count * dtype.itemsize
    if len(blob) != expected:
        raise SfvUnreadableError(
            f"feature vector {p} length {len(blob)} != expected {expected}"
        )
    rec = np.frombuffer(blob, dtype=dtype, offset=_SFV_HEADER.size, count=entry_count)
    try:
        return SparseFeatureVector(
            tile_id=tile_id,
            capture_date=capture_date or dt.date(1970, 1, 1),
            total_pixels=int(total_pixels),
            xs=rec["x"].copy(),
            ys=rec["y"].copy(),
            b2=rec["b2"].copy(),
            b3=rec["b3"].copy(),
            b4=rec["b4"].copy(),
            b5=rec["b5"].copy(),
            ndvi=rec["ndvi"].copy(),
            brt=rec["brt"].copy(),
            baim=rec["baim"].copy() if has_baim else None,
        )
    except ValidationError as exc:
        raise SfvUnreadableError(f"feature vector {p} invalid: {exc}") from exc


def require_baim(sfv: SparseFeatureVector) -> np.ndarray:
    if sfv.baim is None:
        raise MissingBaimError(
            f"feature vector for {sfv.tile_id} carries no burnt-area index column"
        )
    return sfv.baim
