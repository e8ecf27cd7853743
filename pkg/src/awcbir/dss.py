"""Threshold decision-tree segmentation of water bodies and burnt areas.

Each pixel is classified independently by conjunctive range membership
over its reflectances and derived features. Water pixels fall into three
classes (clear, moderately clear, muddy); burnt pixels carry a two-stage
probable/sure decision where the sure stage nests inside the probable
stage. All thresholds live in a ThresholdTable and are config-loadable:
they were derived empirically for one sensor generation and will shift
with recalibration, so they are data, not code.
"""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    MissingBaimError,
    ValidationError,
    WrongMaskKindError,
)
from .features import (
    FeatureConfig,
    PixelFeatures,
    SparseFeatureVector,
    build_sfv,
    brightness_grid,
    ndvi_grid,
)
from .tile_io import BANDS, Band


@dataclass(frozen=True)
class FeatureRange:
    """Closed, open or half-open interval over one feature."""

    lo: float
    hi: float
    lo_inclusive: bool = True
    hi_inclusive: bool = True

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValidationError(f"range lo {self.lo} exceeds hi {self.hi}")

    def contains(self, value: float) -> bool:
        """Membership for one value; NaN is never a member."""
        above = value >= self.lo if self.lo_inclusive else value > self.lo
        below = value <= self.hi if self.hi_inclusive else value < self.hi
        return bool(above and below)

    def contains_array(self, values: np.ndarray) -> np.ndarray:
        above = values >= self.lo if self.lo_inclusive else values > self.lo
        below = values <= self.hi if self.hi_inclusive else values < self.hi
        return above & below


_WATER_FEATURES = ("b2", "b3", "b4", "b5", "brt", "ndvi")
_PROBABLE_FEATURES = ("b2", "b3", "b4", "b5")
_SURE_FEATURES = ("baim", "ndvi", "brt")


@dataclass(frozen=True)
class ThresholdTable:
    """Per-class feature ranges driving both segmentation trees.

    burnt_probable holds the band-range box shared by both burnt stages
    (the sure stage re-uses it by nesting); burnt_sure holds only the
    auxiliary BAIM/NDVI/BRT checks applied on top.
    """

    clear_water: dict[str, FeatureRange]
    muddy_water: dict[str, FeatureRange]
    burnt_probable: dict[str, FeatureRange]
    burnt_sure: dict[str, FeatureRange]

    def __post_init__(self) -> None:
        for name, table, keys in (
            ("clear_water", self.clear_water, _WATER_FEATURES),
            ("muddy_water", self.muddy_water, _WATER_FEATURES),
            ("burnt_probable", self.burnt_probable, _PROBABLE_FEATURES),
            ("burnt_sure", self.burnt_sure, _SURE_FEATURES),
        ):
            missing = [k for k in keys if k not in table]
            if missing:
                raise ValidationError(f"{name} missing ranges for: {', '.join(missing)}")


def default_thresholds() -> ThresholdTable:
    """Shipped defaults: empirical water/burnt reflectance ranges for the
    four-band 56 m sensor, NDVI in the standard NIR-red orientation."""
    return ThresholdTable(
        clear_water={
            "b2": FeatureRange(0.0078, 0.0142),
            "b3": FeatureRange(0.0046, 0.0118),
            "b4": FeatureRange(0.0047, 0.0228),
            "b5": FeatureRange(0.0037, 0.0221),
            "brt": FeatureRange(0.0255, 0.0677),
            "ndvi": FeatureRange(-0.1746, 0.6600),
        },
        muddy_water={
            "b2": FeatureRange(0.0076, 0.0239),
            "b3": FeatureRange(0.0048, 0.0233),
            "b4": FeatureRange(0.0159, 0.0285),
            "b5": FeatureRange(0.0148, 0.0276),
            "brt": FeatureRange(0.0475, 0.0992),
            "ndvi": FeatureRange(-0.0492, 0.608),
        },
        burnt_probable={
            # strict bounds, matching the two-sided < comparisons of the
            # probable-burnt pixel test
            "b2": FeatureRange(0.0085, 0.010, lo_inclusive=False, hi_inclusive=False),
            "b3": FeatureRange(0.004, 0.008, lo_inclusive=False, hi_inclusive=False),
            "b4": FeatureRange(0.0085, 0.0170, lo_inclusive=False, hi_inclusive=False),
            "b5": FeatureRange(0.01, 0.0130, lo_inclusive=False, hi_inclusive=False),
        },
        burnt_sure={
            "baim": FeatureRange(585.0, 925.0),
            "ndvi": FeatureRange(0.09, 0.45),
            "brt": FeatureRange(0.035, 0.05),
        },
    )


def alternate_burnt_thresholds() -> ThresholdTable:
    """Alternate table using the narrower empirical burnt ranges observed
    in sample data instead of the wider sure-stage designer bounds."""
    base = default_thresholds()
    return ThresholdTable(
        clear_water=base.clear_water,
        muddy_water=base.muddy_water,
        burnt_probable={
            "b2": FeatureRange(0.0092, 0.0100),
            "b3": FeatureRange(0.0071, 0.0084),
            "b4": FeatureRange(0.0092, 0.0154),
            "b5": FeatureRange(0.0087, 0.0155),
        },
        burnt_sure={
            "baim": FeatureRange(558.3829, 922.4521),
            "ndvi": FeatureRange(0.1203, 0.3598),
            "brt": FeatureRange(0.0343, 0.0479),
        },
    )


class MaskKind(str, Enum):
    WATER = "water"
    BURNT = "burnt"


class WaterClass(IntEnum):
    """Output gray levels of the water mask."""

    NON_WATER = 0
    MUDDY = 63
    MODERATELY_CLEAR = 127
    CLEAR = 255


#: Burnt-mask gray levels.
BURNT_NONE = 0
BURNT_PROBABLE = 128
BURNT_SURE = 255

_WATER_CODES = frozenset(int(c) for c in WaterClass)
_BURNT_CODES = frozenset((BURNT_NONE, BURNT_PROBABLE, BURNT_SURE))


@dataclass
class SegmentationMask:
    """Per-pixel label grid for one tile, water or burnt flavored."""

    kind: MaskKind
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise ValidationError(f"mask labels must be 2D, got shape {self.labels.shape}")
        allowed = _WATER_CODES if self.kind is MaskKind.WATER else _BURNT_CODES
        present = set(np.unique(self.labels).tolist())
        if not present <= allowed:
            raise ValidationError(
                f"{self.kind.value} mask carries foreign codes {sorted(present - allowed)}"
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


# --- scalar classifiers -------------------------------------------------------

def classify_burnt_pixel_probable(
    b2: float,
    b3: float,
    b4: float,
    b5: float,
    table: ThresholdTable | None = None,
) -> bool:
    """First-stage burnt test: band reflectances inside the probable box."""
    t = (table or _DEFAULT_TABLE).burnt_probable
    values = {"b2": b2, "b3": b3, "b4": b4, "b5": b5}
    return all(t[k].contains(values[k]) for k in _PROBABLE_FEATURES)


def classify_burnt_pixel_sure(
    f: PixelFeatures,
    table: ThresholdTable | None = None,
) -> bool:
    """Second-stage burnt test: probable box plus BAIM/NDVI/BRT checks.

    A pixel outside the probable box is not-sure regardless of the
    auxiliary features; inside it, a missing BAIM raises MissingBaim.
    """
    t = table or _DEFAULT_TABLE
    if not classify_burnt_pixel_probable(f.b2, f.b3, f.b4, f.b5, t):
        return False
    if f.baim is None:
        raise MissingBaimError(
            f"pixel (x={f.x}, y={f.y}) needs a burnt-area index for the sure-burnt test"
        )
    aux = {"baim": f.baim, "ndvi": f.ndvi, "brt": f.brt}
    return all(t.burnt_sure[k].contains(aux[k]) for k in _SURE_FEATURES)


def _water_class_flags(f: PixelFeatures, ranges: dict[str, FeatureRange]) -> bool:
    values = {"b2": f.b2, "b3": f.b3, "b4": f.b4, "b5": f.b5, "brt": f.brt, "ndvi": f.ndvi}
    return all(ranges[k].contains(values[k]) for k in _WATER_FEATURES)


def classify_water_pixel(
    f: PixelFeatures,
    table: ThresholdTable | None = None,
    cfg: FeatureConfig | None = None,
) -> WaterClass:
    """Three-class water decision for one pixel.

    Clear and muddy are conjunctive range tests; a pixel inside both is
    moderately clear. Sure-burnt pixels are forced to NonWater first so the
    narrow muddy/burnt overlap resolves deterministically toward burnt.
    """
    t = table or _DEFAULT_TABLE
    if classify_burnt_pixel_probable(f.b2, f.b3, f.b4, f.b5, t):
        g = f
        if g.baim is None:
            c = cfg or FeatureConfig()
            denom = (c.pc_nir - f.b4) ** 2 + (c.pc_swir - f.b5) ** 2
            # inside the probable box the denominator is bounded away from
            # zero, so the index is finite
            g = PixelFeatures(
                x=f.x, y=f.y, b2=f.b2, b3=f.b3, b4=f.b4, b5=f.b5,
                ndvi=f.ndvi, brt=f.brt, baim=1.0 / denom,
            )
        if classify_burnt_pixel_sure(g, t):
            return WaterClass.NON_WATER
    clear = _water_class_flags(f, t.clear_water)
    muddy = _water_class_flags(f, t.muddy_water)
    if clear and muddy:
        return WaterClass.MODERATELY_CLEAR
    if clear:
        return WaterClass.CLEAR
    if muddy:
        return WaterClass.MUDDY
    return WaterClass.NON_WATER


_DEFAULT_TABLE = default_thresholds()


# --- vectorized segmentation --------------------------------------------------

def _as_rho_dict(tile) -> dict[Band, np.ndarray]:
    """Accept {Band: ndarray} or {Band: ReflectanceRaster}; verify dims."""
    rho: dict[Band, np.ndarray] = {}
    for band in BANDS:
        if band not in tile:
            raise DimensionMismatchError(f"reflectance stack missing band {band.value}")
        grid = tile[band]
        rho[band] = getattr(grid, "rho", grid)
    shape = rho[Band.B2].shape
    for band in BANDS:
        if rho[band].shape != shape:
            raise DimensionMismatchError(
                f"band {band.value} shape {rho[band].shape} != band B2 shape {shape}"
            )
    return rho


def _in_box(ranges: dict[str, FeatureRange], values: dict[str, np.ndarray], keys) -> np.ndarray:
    out = ranges[keys[0]].contains_array(values[keys[0]])
    for k in keys[1:]:
        out &= ranges[k].contains_array(values[k])
    return out


def _sure_mask(
    b4: np.ndarray,
    b5: np.ndarray,
    ndvi_a: np.ndarray,
    brt_a: np.ndarray,
    probable: np.ndarray,
    t: ThresholdTable,
    cfg: FeatureConfig,
) -> np.ndarray:
    """Sure-burnt pixels among the probable ones.

    BAIM is evaluated only where probable: inside that box the denominator
    is bounded away from zero, so no singularity is reachable.
    """
    sure = np.zeros(probable.shape, dtype=bool)
    if not probable.any():
        return sure
    idx = np.nonzero(probable)
    denom = (cfg.pc_nir - b4[idx]) ** 2 + (cfg.pc_swir - b5[idx]) ** 2
    baim_v = 1.0 / denom
    ok = t.burnt_sure["baim"].contains_array(baim_v)
    ok &= t.burnt_sure["ndvi"].contains_array(ndvi_a[idx])
    ok &= t.burnt_sure["brt"].contains_array(brt_a[idx])
    sure[idx] = ok
    return sure


def _water_labels_strip(
    rho: dict[Band, np.ndarray],
    t: ThresholdTable,
    cfg: FeatureConfig,
    y0: int,
    y1: int,
    out: np.ndarray,
) -> None:
    b2 = rho[Band.B2][y0:y1]
    b3 = rho[Band.B3][y0:y1]
    b4 = rho[Band.B4][y0:y1]
    b5 = rho[Band.B5][y0:y1]
    ndvi_a = ndvi_grid(b3, b4, cfg)
    brt_a = brightness_grid(b2, b3, b4, b5)
    values = {"b2": b2, "b3": b3, "b4": b4, "b5": b5, "brt": brt_a, "ndvi": ndvi_a}
    clear = _in_box(t.clear_water, values, _WATER_FEATURES)
    muddy = _in_box(t.muddy_water, values, _WATER_FEATURES)
    probable = _in_box(t.burnt_probable, values, _PROBABLE_FEATURES)
    sure = _sure_mask(b4, b5, ndvi_a, brt_a, probable, t, cfg)
    strip = out[y0:y1]
    strip[muddy] = WaterClass.MUDDY
    strip[clear] = WaterClass.CLEAR
    strip[clear & muddy] = WaterClass.MODERATELY_CLEAR
    strip[sure] = WaterClass.NON_WATER


def _burnt_labels_strip(
    rho: dict[Band, np.ndarray],
    t: ThresholdTable,
    cfg: FeatureConfig,
    y0: int,
    y1: int,
    out: np.ndarray,
) -> None:
    b2 = rho[Band.B2][y0:y1]
    b3 = rho[Band.B3][y0:y1]
    b4 = rho[Band.B4][y0:y1]
    b5 = rho[Band.B5][y0:y1]
    ndvi_a = ndvi_grid(b3, b4, cfg)
    brt_a = brightness_grid(b2, b3, b4, b5)
    values = {"b2": b2, "b3": b3, "b4": b4, "b5": b5}
    probable = _in_box(t.burnt_probable, values, _PROBABLE_FEATURES)
    sure = _sure_mask(b4, b5, ndvi_a, brt_a, probable, t, cfg)
    strip = out[y0:y1]
    strip[probable] = BURNT_PROBABLE
    strip[sure] = BURNT_SURE


def _run_strips(worker, rho, t, cfg, height: int, out: np.ndarray, jobs: int | None) -> None:
    # disjoint row strips, pure per-pixel math: any split yields identical
    # labels, so parallelism cannot change the output
    if not jobs or jobs <= 1 or height < 2:
        worker(rho, t, cfg, 0, height, out)
        return
    n = min(jobs, height)
    bounds = [(i * height // n, (i + 1) * height // n) for i in range(n)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(worker, rho, t, cfg, y0, y1, out) for y0, y1 in bounds]
        for fut in futures:
            fut.result()


def segment_water(
    tile,
    table: ThresholdTable | None = None,
    cfg: FeatureConfig | None = None,
    tile_id: str = "",
    capture_date: dt.date | None = None,
    jobs: int | None = None,
) -> tuple[SegmentationMask, SparseFeatureVector]:
    """Water mask plus sparse feature vector over the relevant pixels.

    tile is a per-band mapping of calibrated reflectance grids. The SFV
    holds exactly the pixels labeled water (any of the three classes).
    """
    rho = _as_rho_dict(tile)
    t = table or _DEFAULT_TABLE
    c = cfg or FeatureConfig()
    height, width = rho[Band.B2].shape
    labels = np.zeros((height, width), dtype=np.uint8)
    _run_strips(_water_labels_strip, rho, t, c, height, labels, jobs)
    mask = SegmentationMask(kind=MaskKind.WATER, labels=labels)
    sfv = build_sfv(
        rho,
        labels,
        tile_id=tile_id,
        capture_date=capture_date or dt.date(1970, 1, 1),
        cfg=c,
        include_baim=False,
    )
    return mask, sfv


def segment_burnt(
    tile,
    table: ThresholdTable | None = None,
    cfg: FeatureConfig | None = None,
    tile_id: str = "",
    capture_date: dt.date | None = None,
    jobs: int | None = None,
) -> tuple[SegmentationMask, SparseFeatureVector]:
    """Burnt mask (0 / probable-only 128 / sure 255) plus SFV with BAIM.

    The SFV covers probable and sure pixels; every one of them sits inside
    the probable band box, so the BAIM column is always finite.
    """
    rho = _as_rho_dict(tile)
    t = table or _DEFAULT_TABLE
    c = cfg or FeatureConfig()
    height, width = rho[Band.B2].shape
    labels = np.zeros((height, width), dtype=np.uint8)
    _run_strips(_burnt_labels_strip, rho, t, c, height, labels, jobs)
    mask = SegmentationMask(kind=MaskKind.BURNT, labels=labels)
    sfv = build_sfv(
        rho,
        labels,
        tile_id=tile_id,
        capture_date=capture_date or dt.date(1970, 1, 1),
        cfg=c,
        include_baim=True,
    )
    return mask, sfv


# --- coverage percentages -----------------------------------------------------

def water_percentage(mask: SegmentationMask) -> float:
    """Share of pixels labeled water, in percent of the whole tile."""
    if mask.kind is not MaskKind.WATER:
        raise WrongMaskKindError(f"water_percentage needs a water mask, got {mask.kind.value}")
    count = int(np.count_nonzero(mask.labels))
    total = mask.labels.size
    return 100.0 * count / total


def burnt_percentage(mask: SegmentationMask) -> float:
    """Share of sure-burnt pixels, in percent of the whole tile.

    Probable-only pixels are excluded; they are advisory and reported
    separately in stats output.
    """
    if mask.kind is not MaskKind.BURNT:
        raise WrongMaskKindError(f"burnt_percentage needs a burnt mask, got {mask.kind.value}")
    count = int(np.count_nonzero(mask.labels == BURNT_SURE))
    total = mask.labels.size
    return 100.0 * count / total


def label_counts(mask: SegmentationMask) -> dict[int, int]:
    """Histogram of label codes actually present."""
    codes, counts = np.unique(mask.labels, return_counts=True)
    return {int(c): int(n) for c, n in zip(codes, counts)}


# --- threshold config files ---------------------------------------------------

_SECTION_KEYS = {
    "clear_water": _WATER_FEATURES,
    "muddy_water": _WATER_FEATURES,
    "burnt_probable": _PROBABLE_FEATURES,
    "burnt_sure": _SURE_FEATURES,
}

_BOOL_WORDS = {"true": True, "1": True, "false": False, "0": False}


def load_threshold_config(path: str | Path) -> ThresholdTable:
    """Parse a threshold config: one section per class, each line
    ``feature lo hi lo_inc hi_inc``; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"threshold config not found: {p}")
    sections: dict[str, dict[str, FeatureRange]] = {}
    current: dict[str, FeatureRange] | None = None
    current_name = ""
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current_name = line[1:-1].strip()
            if current_name not in _SECTION_KEYS:
                raise ConfigError(f"{p}:{lineno}: unknown section [{current_name}]")
            current = sections.setdefault(current_name, {})
            continue
        parts = line.split()
        if len(parts) != 5 or current is None:
            raise ConfigError(
                f"{p}:{lineno}: expected 'feature lo hi lo_inc hi_inc' inside a section"
            )
        feature, lo_s, hi_s, lo_inc_s, hi_inc_s = parts
        if feature not in _SECTION_KEYS[current_name]:
            raise ConfigError(
                f"{p}:{lineno}: feature {feature!r} not valid in [{current_name}]"
            )
        try:
            lo, hi = float(lo_s), float(hi_s)
        except ValueError as exc:
            raise ConfigError(f"{p}:{lineno}: bad number in range") from exc
        try:
            lo_inc = _BOOL_WORDS[lo_inc_s.lower()]
            hi_inc = _BOOL_WORDS[hi_inc_s.lower()]
        except KeyError as exc:
            raise ConfigError(f"{p}:{lineno}: inclusivity flags must be true/false") from exc
        try:
            current[feature] = FeatureRange(lo, hi, lo_inc, hi_inc)
        except ValidationError as exc:
            raise ConfigError(f"{p}:{lineno}: {exc}") from exc

    missing_sections = [s for s in _SECTION_KEYS if s not in sections]
    if missing_sections:
        raise ConfigError(f"{p}: missing sections: {', '.join(missing_sections)}")
    try:
        return ThresholdTable(
            clear_water=sections["clear_water"],
            muddy_water=sections["muddy_water"],
            burnt_probable=sections["burnt_probable"],
            burnt_sure=sections["burnt_sure"],
        )
    except ValidationError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def write_threshold_config(path: str | Path, table: ThresholdTable) -> None:
    """Write a threshold config in the format load_threshold_config reads."""
    lines = []
    for name, ranges in (
        ("clear_water", table.clear_water),
        ("muddy_water", table.muddy_water),
        ("burnt_probable", table.burnt_probable),
        ("burnt_sure", table.burnt_sure),
    ):
        lines.append(f"[{name}]")
        for feature in _SECTION_KEYS[name]:
            r = ranges[feature]
            lines.append(
                f"{feature} {r.lo!r} {r.hi!r} "
                f"{'true' if r.lo_inclusive else 'false'} "
                f"{'true' if r.hi_inclusive else 'false'}"
            )
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# --- mask files ----------------------------------------------------------------

def write_mask_pgm(mask: SegmentationMask, path: str | Path) -> None:
    """Binary PGM (P5), 8-bit, maxval 255."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    with p.open("wb") as fh:
        fh.write(header)
        fh.write(mask.labels.tobytes())


def read_mask_pgm(path: str | Path, kind: MaskKind) -> SegmentationMask:
    """Read a P5 PGM written by write_mask_pgm back into a mask."""
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise ValidationError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3 and i < len(blob):
        ch = blob[i:i + 1]
        if ch == b"#":
            i = blob.index(b"\n", i) + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace():
                j += 1
            tokens.append(blob[i:j])
            i = j
    if len(tokens) < 3:
        raise ValidationError(f"{path}: truncated PGM header")
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValidationError(f"{path}: expected maxval 255, got {maxval}")
    i += 1
    pixels = blob[i:i + width * height]
    if len(pixels) != width * height:
        raise ValidationError(f"{path}: PGM pixel payload truncated")
    labels = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()
    return SegmentationMask(kind=kind, labels=labels)


def write_mask_tiff(mask: SegmentationMask, path: str | Path) -> None:
    """16-bit single-channel TIFF; label codes widen unchanged."""
    from PIL import Image

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(mask.labels.astype(np.uint16))
    img.save(p, format="TIFF")
