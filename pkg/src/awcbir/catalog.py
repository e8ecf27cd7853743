"""Per-tile analysis records: persistence, filtered queries, similarity
ranking.

The catalog is an append-only UTF-8 log (one tab-separated record per
line) under the store root, replayed into memory on open with last-wins
semantics per (tile_id, capture_date) key. At the scale this engine
targets (tens of thousands of tiles) a linear scan answers every query
fast enough that an external database would be dead weight.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateKeyDifferentContentError,
    IoFailureError,
    SfvUnreadableError,
    ValidationError,
)
from .features import read_sfv

CATALOG_FILENAME = "catalog.log"


@dataclass(frozen=True)
class CatalogRecord:
    """One tile analysis outcome: percentages plus references into the store.

    Reference fields are store-relative POSIX paths; an absent artifact is
    the literal "-" so every line has a fixed field count.
    """

    tile_id: str
    capture_date: dt.date
    water_percent: float
    burnt_percent: float
    water_sfv_ref: str = "-"
    burnt_sfv_ref: str = "-"
    mask_refs: tuple[str, ...] = ()
    total_pixels: int = 0

    def __post_init__(self) -> None:
        if not self.tile_id or any(c in self.tile_id for c in "\t\n\r"):
            raise ValidationError(f"bad tile_id {self.tile_id!r}")
        for name, pct in (("water", self.water_percent), ("burnt", self.burnt_percent)):
            if not 0.0 <= pct <= 100.0:
                raise ValidationError(f"{name}_percent {pct} outside [0, 100]")
        if self.total_pixels < 0:
            raise ValidationError(f"total_pixels {self.total_pixels} negative")
        for ref in (self.water_sfv_ref, self.burnt_sfv_ref, *self.mask_refs):
            if not ref or any(c in ref for c in "\t\n\r,"):
                raise ValidationError(f"bad store reference {ref!r}")

    @property
    def key(self) -> tuple[str, dt.date]:
        return (self.tile_id, self.capture_date)

    def to_line(self) -> str:
        mask_field = ",".join(self.mask_refs) if self.mask_refs else "-"
        return "\t".join(
            (
                self.tile_id,
                self.capture_date.isoformat(),
                repr(self.water_percent),
                repr(self.burnt_percent),
                self.water_sfv_ref,
                self.burnt_sfv_ref,
                mask_field,
                str(self.total_pixels),
            )
        )

    @classmethod
    def from_line(cls, line: str) -> "CatalogRecord":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 8:
            raise ValidationError(f"catalog line has {len(parts)} fields, expected 8")
        tile_id, date_s, water_s, burnt_s, wref, bref, masks_s, total_s = parts
        return cls(
            tile_id=tile_id,
            capture_date=dt.date.fromisoformat(date_s),
            water_percent=float(water_s),
            burnt_percent=float(burnt_s),
            water_sfv_ref=wref,
            burnt_sfv_ref=bref,
            mask_refs=tuple(masks_s.split(",")) if masks_s != "-" else (),
            total_pixels=int(total_s),
        )


@dataclass(frozen=True)
class Query:
    """Conjunctive record filter; absent fields match everything."""

    tile_id: str | None = None
    date_from: dt.date | None = None
    date_to: dt.date | None = None
    water_lo: float | None = None
    water_hi: float | None = None
    burnt_lo: float | None = None
    burnt_hi: float | None = None

    def __post_init__(self) -> None:
        for name, lo, hi in (
            ("date", self.date_from, self.date_to),
            ("water_percent", self.water_lo, self.water_hi),
            ("burnt_percent", self.burnt_lo, self.burnt_hi),
        ):
            if lo is not None and hi is not None and lo > hi:
                raise ValidationError(f"{name} interval [{lo}, {hi}] is empty")

    def matches(self, r: CatalogRecord) -> bool:
        if self.tile_id is not None and r.tile_id != self.tile_id:
            return False
        if self.date_from is not None and r.capture_date < self.date_from:
            return False
        if self.date_to is not None and r.capture_date > self.date_to:
            return False
        if self.water_lo is not None and r.water_percent < self.water_lo:
            return False
        if self.water_hi is not None and r.water_percent > self.water_hi:
            return False
        if self.burnt_lo is not None and r.burnt_percent < self.burnt_lo:
            return False
        if self.burnt_hi is not None and r.burnt_percent > self.burnt_hi:
            return False
        return True


@dataclass(frozen=True)
class SimilarityWeights:
    w_water: float = 1.0
    w_burnt: float = 1.0
    w_overlap: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_water, self.w_burnt, self.w_overlap) < 0:
            raise ValidationError("similarity weights must be non-negative")
        if self.w_water == self.w_burnt == self.w_overlap == 0:
            raise ValidationError("similarity weights must not all be zero")


class Catalog:
    """Append-only record log plus in-memory (tile_id, date) index.

    Single writer, many readers: readers see the snapshot taken at open or
    at the latest reload(); the writer appends one full line per insert.
    """

    def __init__(self, store_root: str | Path) -> None:
        self.store_root = Path(store_root)
        self.path = self.store_root / CATALOG_FILENAME
        self._records: dict[tuple[str, dt.date], CatalogRecord] = {}
        self.reload()

    def reload(self) -> None:
        """Replay the log. A torn final line (interrupted append) is
        ignored; corruption anywhere else is an error."""
        self._records = {}
        if not self.path.is_file():
            return
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoFailureError(f"cannot read catalog {self.path}: {exc}") from exc
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = CatalogRecord.from_line(line)
            except (ValidationError, ValueError) as exc:
                if i == len(lines) - 1:
                    break
                raise IoFailureError(
                    f"catalog {self.path} corrupt at line {i + 1}: {exc}"
                ) from exc
            self._records[record.key] = record

    def __len__(self) -> int:
        return len(self._records)

    def get(self, tile_id: str, capture_date: dt.date) -> CatalogRecord | None:
        return self._records.get((tile_id, capture_date))

    def records(self) -> list[CatalogRecord]:
        return sorted(self._records.values(), key=lambda r: r.key)

    def _check_refs(self, record: CatalogRecord) -> None:
        refs = [record.water_sfv_ref, record.burnt_sfv_ref, *record.mask_refs]
        for ref in refs:
            if ref == "-":
                continue
            if not (self.store_root / ref).is_file():
                raise ValidationError(f"catalog record references missing file {ref}")

    def insert_record(self, record: CatalogRecord, replace: bool = False) -> None:
        """Append a record. Identical re-insert is a no-op; same key with
        different content is an error unless replace is set (last-wins)."""
        self._check_refs(record)
        existing = self._records.get(record.key)
        if existing is not None:
            if existing.to_line() == record.to_line():
                return
            if not replace:
                raise DuplicateKeyDifferentContentError(
                    f"record for ({record.tile_id}, {record.capture_date}) already "
                    "exists with different content"
                )
        try:
            self.store_root.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(record.to_line() + "\n")
        except OSError as exc:
            raise IoFailureError(f"cannot append to catalog {self.path}: {exc}") from exc
        self._records[record.key] = record

    def query(self, q: Query) -> list[CatalogRecord]:
        """All records matching every present filter, ordered by key."""
        return [r for r in self.records() if q.matches(r)]


# --- similarity ranking ---------------------------------------------------------

def _water_coordinate_keys(record: CatalogRecord, store_root: Path) -> np.ndarray:
    if record.water_sfv_ref == "-":
        return np.empty(0, dtype=np.uint64)
    sfv = read_sfv(store_root / record.water_sfv_ref, record.tile_id, record.capture_date)
    return sfv.coordinate_keys()


def similarity(
    reference: CatalogRecord,
    candidate: CatalogRecord,
    weights: SimilarityWeights | None = None,
    store_root: str | Path | None = None,
) -> float:
    """Similarity in (0, 1]: reciprocal of 1 plus the weighted distance.

    Distance is the L1 gap in water/burnt percentages plus, when both
    records describe the same tile grid, one minus the IoU of their water
    pixel coordinate sets. Across different tiles pixel indices reference
    different ground locations, so the overlap term is dropped.
    """
    w = weights or SimilarityWeights()
    d = w.w_water * abs(reference.water_percent - candidate.water_percent)
    d += w.w_burnt * abs(reference.burnt_percent - candidate.burnt_percent)
    if reference.tile_id == candidate.tile_id and w.w_overlap > 0:
        if store_root is None:
            raise SfvUnreadableError(
                "same-tile similarity needs a store root to read feature vectors"
            )
        a = _water_coordinate_keys(reference, Path(store_root))
        b = _water_coordinate_keys(candidate, Path(store_root))
        if len(a) == 0 and len(b) == 0:
            iou = 1.0
        else:
            inter = len(np.intersect1d(a, b, assume_unique=True))
            union = len(a) + len(b) - inter
            iou = inter / union
        d += w.w_overlap * (1.0 - iou)
    return 1.0 / (1.0 + d)


def rank(
    reference: CatalogRecord,
    q: Query,
    weights: SimilarityWeights | None = None,
    catalog: Catalog | None = None,
    store_root: str | Path | None = None,
) -> list[tuple[CatalogRecord, float]]:
    """Query results scored against the reference, best first.

    Ties break by (tile_id, capture_date) ascending; the reference record
    itself never appears in the output.
    """
    if catalog is None:
        raise ValidationError("rank needs an open catalog")
    root = Path(store_root) if store_root is not None else catalog.store_root
    scored = [
        (record, similarity(reference, record, weights, root))
        for record in catalog.query(q)
        if record.key != reference.key
    ]
    scored.sort(key=lambda rs: (-rs[1], rs[0].tile_id, rs[0].capture_date))
    return scored
