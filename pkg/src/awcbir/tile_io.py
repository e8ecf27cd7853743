"""Load, chunk, compress, persist and bit-exactly reassemble AWiFS tile rasters.

A tile is four single-band rasters (B2 green, B3 red, B4 NIR, B5 SWIR) of
12-bit digital numbers in 16-bit storage, plus a small metadata sidecar.
Tiles are stored chunked: each band is cut into square blocks (ragged at the
bottom/right edges), each block zlib-compressed and written as one small file
with a checksummed binary header, so single chunks can be fetched and
verified independently.

On-disk layout, relative to a store root::

    tiles/<tile_id>/<YYYY-MM-DD>/meta.json
    tiles/<tile_id>/<YYYY-MM-DD>/band_<B2|B3|B4|B5>/chunk_<row>_<col>.bin

Chunk file format: 16-byte header (magic ``AWCH``, codec u8, 3 reserved
bytes, height u32 LE, width u32 LE), 8-byte checksum of the uncompressed
pixel bytes, then the compressed payload.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    AlreadyExistsWithDifferentContentError,
    ChecksumMismatchError,
    DimensionMismatchError,
    DnOutOfRangeError,
    FileUnreadableError,
    IoFailureError,
    MissingBandError,
    NotFoundError,
    ValidationError,
    WrongPixelFormatError,
)


class Band(str, Enum):
    B2 = "B2"  # green
    B3 = "B3"  # red
    B4 = "B4"  # near infrared
    B5 = "B5"  # shortwave infrared


#: Canonical band order used everywhere a bundle is iterated.
BANDS: tuple[Band, ...] = (Band.B2, Band.B3, Band.B4, Band.B5)

#: Default chunk side: a 2264-pixel AWiFS tile divides into an exact 8x8 grid.
DEFAULT_CHUNK_SIDE = 283

CODEC_ZLIB = 1
CHUNK_MAGIC = b"AWCH"

# magic, codec_id, 3 reserved bytes, height, width -- 16 bytes total
_CHUNK_HEADER = struct.Struct("<4sB3xII")
_CHECKSUM = struct.Struct("<Q")

_PIL_16BIT_MODES = ("I;16", "I;16L", "I;16B", "I;16N")


def checksum64(data: bytes) -> int:
    """64-bit digest of raw bytes (blake2b truncated to 8 bytes)."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class TileMetadata:
    """Identity and capture context of one orthorectified tile."""

    tile_id: str
    capture_date: dt.date
    center_latitude: float
    center_longitude: float
    acquisition_time: float | None = None  # local solar time, fractional hours
    radiometric_bits: int = 12

    def __post_init__(self) -> None:
        if not self.tile_id:
            raise ValidationError("tile_id must be non-empty")
        if not -90.0 <= self.center_latitude <= 90.0:
            raise ValidationError(f"latitude {self.center_latitude} outside [-90, 90]")
        if not -180.0 <= self.center_longitude <= 180.0:
            raise ValidationError(f"longitude {self.center_longitude} outside [-180, 180]")
        if self.radiometric_bits not in (10, 12):
            raise ValidationError(f"radiometric_bits must be 10 or 12, got {self.radiometric_bits}")
        if self.acquisition_time is not None and not 0.0 <= self.acquisition_time < 24.0:
            raise ValidationError(f"acquisition_time {self.acquisition_time} outside [0, 24)")

    @property
    def max_dn(self) -> int:
        return (1 << self.radiometric_bits) - 1


@dataclass
class BandRaster:
    """One band's grid of digital numbers (row-major uint16)."""

    band: Band
    dn: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.dn)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"band raster must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.uint16:
            if arr.size and (arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max):
                raise DnOutOfRangeError("DN values do not fit 16-bit unsigned storage")
            arr = arr.astype(np.uint16)
        self.dn = np.ascontiguousarray(arr)

    @property
    def height(self) -> int:
        return self.dn.shape[0]

    @property
    def width(self) -> int:
        return self.dn.shape[1]


@dataclass(eq=False)
class TileBundle:
    """Metadata plus exactly one raster per band, all the same size."""

    metadata: TileMetadata
    bands: dict[Band, BandRaster]

    @property
    def width(self) -> int:
        return self.bands[Band.B2].width

    @property
    def height(self) -> int:
        return self.bands[Band.B2].height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TileBundle):
            return NotImplemented
        return self.metadata == other.metadata and all(
            np.array_equal(self.bands[b].dn, other.bands[b].dn) for b in BANDS
        )


@dataclass
class Chunk:
    """One compressed block of a band raster."""

    row_index: int
    col_index: int
    height: int
    width: int
    payload: bytes
    codec_id: int
    uncompressed_checksum: int


def _compress(data: bytes, codec_id: int) -> bytes:
    if codec_id == CODEC_ZLIB:
        return zlib.compress(data, level=6)
    raise ValidationError(f"unknown codec id {codec_id}")


def _decompress(payload: bytes, codec_id: int) -> bytes:
    if codec_id == CODEC_ZLIB:
        return zlib.decompress(payload)
    raise ValidationError(f"unknown codec id {codec_id}")


def load_band_raster(path: str | Path, band: Band, bits: int = 12) -> BandRaster:
    """Read a single-channel 16-bit unsigned TIFF into a BandRaster.

    Every DN is validated against 2**bits - 1; the first offending pixel is
    reported with its coordinates.
    """
    p = Path(path)
    try:
        with Image.open(p) as im:
            mode = im.mode
            if mode not in _PIL_16BIT_MODES:
                raise WrongPixelFormatError(
                    f"{p}: expected single-channel 16-bit unsigned, got mode {mode!r}"
                )
            arr = np.asarray(im, dtype=np.uint16)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise FileUnreadableError(f"cannot read {p}: {exc}") from exc

    max_dn = (1 << bits) - 1
    if arr.size and int(arr.max()) > max_dn:
        y, x = np.unravel_index(int(np.argmax(arr)), arr.shape)
        raise DnOutOfRangeError(
            f"{p}: DN {int(arr[y, x])} > {max_dn} at pixel (x={int(x)}, y={int(y)})"
        )
    return BandRaster(band=band, dn=arr)


def write_band_tiff(raster: BandRaster, path: str | Path) -> None:
    """Write a BandRaster as a single-channel 16-bit TIFF."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster.dn).save(p, format="TIFF")


def assemble_bundle(rasters: Iterable[BandRaster], metadata: TileMetadata) -> TileBundle:
    """Group four band rasters into a dimension-checked TileBundle."""
    by_band: dict[Band, BandRaster] = {}
    for raster in rasters:
        if raster.band in by_band:
            raise ValidationError(f"duplicate raster for band {raster.band.value}")
        by_band[raster.band] = raster
    for band in BANDS:
        if band not in by_band:
            raise MissingBandError(f"missing band {band.value}")

    ref = by_band[Band.B2]
    for band in BANDS:
        r = by_band[band]
        if (r.height, r.width) != (ref.height, ref.width):
            raise DimensionMismatchError(
                f"band {band.value} is {r.width}x{r.height}, "
                f"band B2 is {ref.width}x{ref.height}"
            )
        if r.dn.size and int(r.dn.max()) > metadata.max_dn:
            raise DnOutOfRangeError(
                f"band {band.value} holds DN > {metadata.max_dn}"
            )
    return TileBundle(metadata=metadata, bands=by_band)


def chunk_grid(height: int, width: int, chunk_side: int) -> Iterator[tuple[int, int, int, int, int, int]]:
    """Yield (row_index, col_index, y0, x0, block_height, block_width) row-major."""
    for ri, y0 in enumerate(range(0, height, chunk_side)):
        h = min(chunk_side, height - y0)
        for ci, x0 in enumerate(range(0, width, chunk_side)):
            w = min(chunk_side, width - x0)
            yield ri, ci, y0, x0, h, w


def chunk_raster(
    raster: BandRaster,
    chunk_side: int = DEFAULT_CHUNK_SIDE,
    jobs: int | None = None,
) -> list[Chunk]:
    """Cut a raster into compressed chunks that tile it exactly, row-major.

    Bottom/right edge chunks may be ragged. Every pixel lands in exactly one
    chunk, so concatenating decompressed blocks by grid position reconstructs
    the raster.
    """
    if chunk_side < 1:
        raise ValidationError(f"chunk_side must be >= 1, got {chunk_side}")

    blocks = [
        (ri, ci, h, w, raster.dn[y0 : y0 + h, x0 : x0 + w])
        for ri, ci, y0, x0, h, w in chunk_grid(raster.height, raster.width, chunk_side)
    ]

    def build(item: tuple[int, int, int, int, np.ndarray]) -> Chunk:
        ri, ci, h, w, block = item
        raw = np.ascontiguousarray(block).astype("<u2").tobytes()
        return Chunk(
            row_index=ri,
            col_index=ci,
            height=h,
            width=w,
            payload=_compress(raw, CODEC_ZLIB),
            codec_id=CODEC_ZLIB,
            uncompressed_checksum=checksum64(raw),
        )

    if jobs is not None and jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(build, blocks))
    return [build(b) for b in blocks]


def chunk_to_array(chunk: Chunk) -> np.ndarray:
    """Decompress and integrity-check one chunk back into a uint16 block."""
    raw = _decompress(chunk.payload, chunk.codec_id)
    if len(raw) != chunk.height * chunk.width * 2:
        raise ChecksumMismatchError(
            f"chunk ({chunk.row_index},{chunk.col_index}) decompressed to "
            f"{len(raw)} bytes, expected {chunk.height * chunk.width * 2}"
        )
    if checksum64(raw) != chunk.uncompressed_checksum:
        raise ChecksumMismatchError(
            f"chunk ({chunk.row_index},{chunk.col_index}) checksum mismatch"
        )
    return np.frombuffer(raw, dtype="<u2").astype(np.uint16).reshape(chunk.height, chunk.width)


def encode_chunk(chunk: Chunk) -> bytes:
    header = _CHUNK_HEADER.pack(CHUNK_MAGIC, chunk.codec_id, chunk.height, chunk.width)
    return header + _CHECKSUM.pack(chunk.uncompressed_checksum) + chunk.payload


def decode_chunk(blob: bytes, row_index: int, col_index: int) -> Chunk:
    if len(blob) < _CHUNK_HEADER.size + _CHECKSUM.size:
        raise ChecksumMismatchError(
            f"chunk ({row_index},{col_index}) file truncated ({len(blob)} bytes)"
        )
    magic, codec_id, height, width = _CHUNK_HEADER.unpack_from(blob, 0)
    if magic != CHUNK_MAGIC:
        raise ChecksumMismatchError(
            f"chunk ({row_index},{col_index}) bad magic {magic!r}"
        )
    # reserved pad bytes are outside the payload checksum, so any flip
    # there must be caught here for single-byte corruption to be total
    if blob[5:8] != b"\x00\x00\x00":
        raise ChecksumMismatchError(
            f"chunk ({row_index},{col_index}) reserved header bytes not zero"
        )
    (checksum,) = _CHECKSUM.unpack_from(blob, _CHUNK_HEADER.size)
    return Chunk(
        row_index=row_index,
        col_index=col_index,
        height=height,
        width=width,
        payload=blob[_CHUNK_HEADER.size + _CHECKSUM.size :],
        codec_id=codec_id,
        uncompressed_checksum=checksum,
    )


# --- store layout -----------------------------------------------------------

def tile_dir(store_root: str | Path, tile_id: str, capture_date: dt.date) -> Path:
    return Path(store_root) / "tiles" / tile_id / capture_date.isoformat()


def tile_exists(store_root: str | Path, tile_id: str, capture_date: dt.date) -> bool:
    return (tile_dir(store_root, tile_id, capture_date) / "meta.json").is_file()


def _meta_dict(bundle: TileBundle, chunk_side: int) -> dict:
    md = bundle.metadata
    return {
        "tile_id": md.tile_id,
        "capture_date": md.capture_date.isoformat(),
        "center_latitude": md.center_latitude,
        "center_longitude": md.center_longitude,
        "acquisition_time": md.acquisition_time,
        "radiometric_bits": md.radiometric_bits,
        "width": bundle.width,
        "height": bundle.height,
        "chunk_side": chunk_side,
    }


def _chunk_rel_path(tile_id: str, capture_date: dt.date, band: Band, ri: int, ci: int) -> str:
    return f"tiles/{tile_id}/{capture_date.isoformat()}/band_{band.value}/chunk_{ri}_{ci}.bin"


def _stored_checksum(path: Path, ri: int, ci: int) -> int:
    head_size = _CHUNK_HEADER.size + _CHECKSUM.size
    with path.open("rb") as fh:
        head = fh.read(head_size)
    if len(head) < head_size:
        raise ChecksumMismatchError(f"chunk ({ri},{ci}) file truncated ({len(head)} bytes)")
    (checksum,) = _CHECKSUM.unpack_from(head, _CHUNK_HEADER.size)
    return checksum


def store_tile(
    bundle: TileBundle,
    store_root: str | Path,
    chunk_side: int = DEFAULT_CHUNK_SIDE,
    jobs: int | None = None,
) -> list[str]:
    """Chunk, compress and persist all four bands plus the metadata sidecar.

    Idempotent for identical content: storing the same bundle twice succeeds
    without rewriting. Same tile_id+date with different pixels, metadata or
    chunk layout raises AlreadyExistsWithDifferentContentError.

    Returns the store-relative paths of all chunk files, band-major.
    """
    root = Path(store_root)
    md = bundle.metadata
    tdir = tile_dir(root, md.tile_id, md.capture_date)
    meta = _meta_dict(bundle, chunk_side)
    meta_path = tdir / "meta.json"

    chunks = {band: chunk_raster(bundle.bands[band], chunk_side, jobs=jobs) for band in BANDS}

    if meta_path.is_file():
        try:
            existing = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise IoFailureError(f"cannot read {meta_path}: {exc}") from exc
        normalized = json.loads(json.dumps(meta))
        if existing != normalized:
            raise AlreadyExistsWithDifferentContentError(
                f"tile {md.tile_id}@{md.capture_date.isoformat()} already stored "
                f"with different metadata or chunk layout"
            )
        for band in BANDS:
            for chunk in chunks[band]:
                path = root / _chunk_rel_path(md.tile_id, md.capture_date, band, chunk.row_index, chunk.col_index)
                if not path.is_file():
                    continue  # missing file is rewritten below
                if _stored_checksum(path, chunk.row_index, chunk.col_index) != chunk.uncompressed_checksum:
                    raise AlreadyExistsWithDifferentContentError(
                        f"tile {md.tile_id}@{md.capture_date.isoformat()} already stored "
                        f"with different content (band {band.value} chunk "
                        f"{chunk.row_index}_{chunk.col_index})"
                    )

    refs: list[str] = []
    jobs_eff = jobs if jobs and jobs > 1 else 1

    def write_one(item: tuple[Band, Chunk]) -> None:
        band, chunk = item
        rel = _chunk_rel_path(md.tile_id, md.capture_date, band, chunk.row_index, chunk.col_index)
        path = root / rel
        if path.is_file():
            return  # verified identical above
        path.write_bytes(encode_chunk(chunk))

    work = [(band, chunk) for band in BANDS for chunk in chunks[band]]
    try:
        for band in BANDS:
            (tdir / f"band_{band.value}").mkdir(parents=True, exist_ok=True)
        if jobs_eff > 1:
            with ThreadPoolExecutor(max_workers=jobs_eff) as pool:
                list(pool.map(write_one, work))
        else:
            for item in work:
                write_one(item)
        # meta.json written last marks the tile complete
        meta_path.write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"cannot write tile under {tdir}: {exc}") from exc

    for band in BANDS:
        refs.extend(
            _chunk_rel_path(md.tile_id, md.capture_date, band, c.row_index, c.col_index)
            for c in chunks[band]
        )
    return refs


def load_tile(
    store_root: str | Path,
    tile_id: str,
    capture_date: dt.date,
    jobs: int | None = None,
) -> TileBundle:
    """Reassemble a stored tile, verifying every chunk checksum.

    The returned bundle is bit-exact with what was stored; any corrupt chunk
    raises ChecksumMismatchError naming that chunk.
    """
    root = Path(store_root)
    tdir = tile_dir(root, tile_id, capture_date)
    meta_path = tdir / "meta.json"
    if not meta_path.is_file():
        raise NotFoundError(f"tile {tile_id}@{capture_date.isoformat()} not in store {root}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise IoFailureError(f"cannot read {meta_path}: {exc}") from exc

    metadata = TileMetadata(
        tile_id=meta["tile_id"],
        capture_date=dt.date.fromisoformat(meta["capture_date"]),
        center_latitude=meta["center_latitude"],
        center_longitude=meta["center_longitude"],
        acquisition_time=meta["acquisition_time"],
        radiometric_bits=meta["radiometric_bits"],
    )
    width, height, chunk_side = meta["width"], meta["height"], meta["chunk_side"]
    grid = list(chunk_grid(height, width, chunk_side))

    def read_one(item: tuple[Band, tuple[int, int, int, int, int, int]]):
        band, (ri, ci, y0, x0, h, w) = item
        rel = _chunk_rel_path(tile_id, capture_date, band, ri, ci)
        path = root / rel
        if not path.is_file():
            raise NotFoundError(f"missing chunk {rel}")
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise IoFailureError(f"cannot read chunk {rel}: {exc}") from exc
        try:
            chunk = decode_chunk(blob, ri, ci)
            if (chunk.height, chunk.width) != (h, w):
                raise ChecksumMismatchError(
                    f"chunk ({ri},{ci}) header says {chunk.width}x{chunk.height}, "
                    f"grid expects {w}x{h}"
                )
            block = chunk_to_array(chunk)
        except (ChecksumMismatchError, ValidationError, zlib.error) as exc:
            raise ChecksumMismatchError(f"corrupt chunk {rel}: {exc}") from exc
        return band, y0, x0, block

    work = [(band, cell) for band in BANDS for cell in grid]
    if jobs is not None and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(read_one, work))
    else:
        results = [read_one(item) for item in work]

    grids = {band: np.zeros((height, width), dtype=np.uint16) for band in BANDS}
    for band, y0, x0, block in results:
        grids[band][y0 : y0 + block.shape[0], x0 : x0 + block.shape[1]] = block

    rasters = [BandRaster(band=band, dn=grids[band]) for band in BANDS]
    return assemble_bundle(rasters, metadata)
