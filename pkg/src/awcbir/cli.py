"""Command-line pipeline driver: ingest, segment, query, rank, export, synth.

Exit codes: 0 success, 2 validation/config problems, 3 I/O failures,
4 requested thing not found. Successful commands print their stats as
both human text and machine-readable ``key=value`` lines, followed by a
``manifest.*`` block naming the command, consumed configs (with sha256
digests), per-stage timings and output paths.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import catalog as catalog_mod
from . import dss, features, radiometry, synth, tile_io
from .errors import (
    AwcbirError,
    IoFailureError,
    NotFoundError,
    ValidationError,
)
from .tile_io import BANDS, Band

_ANALYSIS_DIR = "analysis"


def _store_path(args) -> Path:
    if not args.store:
        raise ValidationError("no store given: pass --store or set AWCBIR_STORE")
    return Path(args.store)


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad date {text!r}, expected YYYY-MM-DD") from exc


def _parse_interval(text: str) -> tuple[float | None, float | None]:
    lo_s, sep, hi_s = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"bad interval {text!r}, expected LO:HI")
    try:
        lo = float(lo_s) if lo_s else None
        hi = float(hi_s) if hi_s else None
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad interval {text!r}") from exc
    return lo, hi


def _parse_weights(text: str) -> catalog_mod.SimilarityWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"bad weights {text!r}, expected w1,w2,w3")
    try:
        w = [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad weights {text!r}") from exc
    try:
        return catalog_mod.SimilarityWeights(*w)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Stages:
    """Accumulates per-stage wall-clock timings for the manifest."""

    def __init__(self, verbose: bool) -> None:
        self.timings: list[tuple[str, float]] = []
        self.verbose = verbose

    def run(self, name: str, fn):
        t0 = time.perf_counter()
        result = fn()
        ms = (time.perf_counter() - t0) * 1000.0
        self.timings.append((name, ms))
        if self.verbose:
            print(f"[stage] {name}: {ms:.1f} ms", file=sys.stderr)
        return result


def _print_manifest(command: str, stages: _Stages, configs: dict[str, Path], outputs: dict[str, str]) -> None:
    print(f"manifest.command={command}")
    for name, path in configs.items():
        print(f"manifest.{name}_path={path}")
        print(f"manifest.{name}_sha256={_sha256(path)}")
    for name, ms in stages.timings:
        print(f"manifest.stage_ms.{name}={ms:.1f}")
    for name, value in outputs.items():
        print(f"manifest.{name}={value}")


def _read_meta_sidecar(path: Path) -> tile_io.TileMetadata:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read metadata sidecar {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"metadata sidecar {path} is not valid JSON: {exc}") from exc
    try:
        return tile_io.TileMetadata(
            tile_id=payload["tile_id"],
            capture_date=dt.date.fromisoformat(payload["capture_date"]),
            center_latitude=float(payload["center_latitude"]),
            center_longitude=float(payload["center_longitude"]),
            acquisition_time=(
                float(payload["acquisition_time"])
                if payload.get("acquisition_time") is not None
                else None
            ),
            radiometric_bits=int(payload.get("radiometric_bits", 12)),
        )
    except KeyError as exc:
        raise ValidationError(f"metadata sidecar {path} missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"metadata sidecar {path} malformed: {exc}") from exc


# --- ingest ---------------------------------------------------------------------

def cmd_ingest(args) -> int:
    store = _store_path(args)
    stages = _Stages(args.verbose)
    band_paths = {
        Band.B2: Path(args.b2),
        Band.B3: Path(args.b3),
        Band.B4: Path(args.b4),
        Band.B5: Path(args.b5),
    }
    for band, path in band_paths.items():
        if not path.is_file():
            raise ValidationError(f"band {band.value} file missing: {path}")
    meta_path = Path(args.meta)
    if not meta_path.is_file():
        raise ValidationError(f"metadata sidecar missing: {meta_path}")

    metadata = _read_meta_sidecar(meta_path)
    if args.tile:
        metadata = dataclasses.replace(metadata, tile_id=args.tile)
    if args.date:
        metadata = dataclasses.replace(metadata, capture_date=args.date)

    rasters = stages.run(
        "load",
        lambda: [
            tile_io.load_band_raster(band_paths[b], b, metadata.radiometric_bits)
            for b in BANDS
        ],
    )
    bundle = tile_io.assemble_bundle(rasters, metadata)
    refs = stages.run(
        "store",
        lambda: tile_io.store_tile(bundle, store, chunk_side=args.chunk_side, jobs=args.jobs),
    )
    tile_dir = tile_io.tile_dir(store, metadata.tile_id, metadata.capture_date)
    print(
        f"ingested tile {metadata.tile_id} {metadata.capture_date.isoformat()}: "
        f"{bundle.width}x{bundle.height}, {len(refs)} chunks"
    )
    _print_manifest(
        "ingest",
        stages,
        configs={},
        outputs={
            "tile_dir": str(tile_dir),
            "chunk_count": str(len(refs)),
        },
    )
    return 0


# --- segment ---------------------------------------------------------------------

def _analysis_refs(tile_id: str, date: dt.date) -> dict[str, str]:
    base = f"tiles/{tile_id}/{date.isoformat()}/{_ANALYSIS_DIR}"
    return {
        "water_mask": f"{base}/water_mask.pgm",
        "burnt_mask": f"{base}/burnt_mask.pgm",
        "water_sfv": f"{base}/water.sfv",
        "burnt_sfv": f"{base}/burnt.sfv",
    }


def cmd_segment(args) -> int:
    store = _store_path(args)
    stages = _Stages(args.verbose)
    cal_path = Path(args.calibration)
    cals = radiometry.load_calibration_config(cal_path)
    configs = {"calibration": cal_path}
    if args.thresholds:
        thr_path = Path(args.thresholds)
        table = dss.load_threshold_config(thr_path)
        configs["thresholds"] = thr_path
    else:
        table = dss.default_thresholds()
    cfg = features.FeatureConfig(ndvi_orientation=args.ndvi_orientation)

    bundle = stages.run("load", lambda: tile_io.load_tile(store, args.tile, args.date, jobs=args.jobs))
    rho = stages.run("calibrate", lambda: radiometry.calibrate_bundle(bundle, cals))

    tile_id = args.tile
    date = args.date
    refs = _analysis_refs(tile_id, date)
    total = bundle.width * bundle.height
    do_water = args.target in ("water", "both")
    do_burnt = args.target in ("burnt", "both")

    outputs: dict[str, str] = {}
    stats_lines: list[str] = []
    human: list[str] = []

    existing = catalog_mod.Catalog(store).get(tile_id, date)
    water_percent = existing.water_percent if existing else 0.0
    burnt_percent = existing.burnt_percent if existing else 0.0
    water_sfv_ref = existing.water_sfv_ref if existing else "-"
    burnt_sfv_ref = existing.burnt_sfv_ref if existing else "-"
    mask_refs = set(existing.mask_refs) if existing else set()

    if do_water:
        water_mask, water_sfv = stages.run(
            "segment_water",
            lambda: dss.segment_water(rho, table, cfg, tile_id=tile_id, capture_date=date, jobs=args.jobs),
        )
        dss.write_mask_pgm(water_mask, store / refs["water_mask"])
        features.write_sfv(water_sfv, store / refs["water_sfv"])
        water_percent = dss.water_percentage(water_mask)
        water_sfv_ref = refs["water_sfv"]
        mask_refs.add(refs["water_mask"])
        counts = dss.label_counts(water_mask)
        clear = counts.get(int(dss.WaterClass.CLEAR), 0)
        mod = counts.get(int(dss.WaterClass.MODERATELY_CLEAR), 0)
        muddy = counts.get(int(dss.WaterClass.MUDDY), 0)
        human.append(
            f"water {water_percent:.4f}% (clear {clear}, moderately clear {mod}, muddy {muddy})"
        )
        stats_lines += [
            f"stats.water_percent={water_percent!r}",
            f"stats.clear_pixels={clear}",
            f"stats.moderately_clear_pixels={mod}",
            f"stats.muddy_pixels={muddy}",
            f"stats.water_pixels={clear + mod + muddy}",
            f"stats.water_relevant_fraction={water_sfv.relevant_fraction!r}",
        ]
        outputs["water_mask"] = refs["water_mask"]
        outputs["water_sfv"] = refs["water_sfv"]

    if do_burnt:
        burnt_mask, burnt_sfv = stages.run(
            "segment_burnt",
            lambda: dss.segment_burnt(rho, table, cfg, tile_id=tile_id, capture_date=date, jobs=args.jobs),
        )
        dss.write_mask_pgm(burnt_mask, store / refs["burnt_mask"])
        features.write_sfv(burnt_sfv, store / refs["burnt_sfv"])
        burnt_percent = dss.burnt_percentage(burnt_mask)
        burnt_sfv_ref = refs["burnt_sfv"]
        mask_refs.add(refs["burnt_mask"])
        counts = dss.label_counts(burnt_mask)
        sure = counts.get(dss.BURNT_SURE, 0)
        probable_only = counts.get(dss.BURNT_PROBABLE, 0)
        human.append(f"burnt {burnt_percent:.4f}% (sure {sure}, probable-only {probable_only})")
        stats_lines += [
            f"stats.burnt_percent={burnt_percent!r}",
            f"stats.burnt_sure_pixels={sure}",
            f"stats.burnt_probable_only_pixels={probable_only}",
            f"stats.burnt_relevant_fraction={burnt_sfv.relevant_fraction!r}",
        ]
        outputs["burnt_mask"] = refs["burnt_mask"]
        outputs["burnt_sfv"] = refs["burnt_sfv"]

    record = catalog_mod.CatalogRecord(
        tile_id=tile_id,
        capture_date=date,
        water_percent=water_percent,
        burnt_percent=burnt_percent,
        water_sfv_ref=water_sfv_ref,
        burnt_sfv_ref=burnt_sfv_ref,
        mask_refs=tuple(sorted(mask_refs)),
        total_pixels=total,
    )
    stages.run("catalog", lambda: catalog_mod.Catalog(store).insert_record(record, replace=True))

    print(f"tile {tile_id} {date.isoformat()}: " + ", ".join(human))
    stats_lines.append(f"stats.total_pixels={total}")
    for line in stats_lines:
        print(line)
    _print_manifest("segment", stages, configs, outputs)
    return 0


# --- query / rank -----------------------------------------------------------------

def _build_query(args) -> catalog_mod.Query:
    water_lo = water_hi = burnt_lo = burnt_hi = None
    if args.query_water:
        water_lo, water_hi = args.query_water
    if args.query_burnt:
        burnt_lo, burnt_hi = args.query_burnt
    return catalog_mod.Query(
        tile_id=args.tile,
        date_from=args.date_from,
        date_to=args.date_to,
        water_lo=water_lo,
        water_hi=water_hi,
        burnt_lo=burnt_lo,
        burnt_hi=burnt_hi,
    )


def _print_rows(rows: list[list[str]], header: list[str], fmt: str) -> None:
    if fmt == "tsv":
        for row in rows:
            print("\t".join(row))
        return
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())


def cmd_query(args) -> int:
    store = _store_path(args)
    stages = _Stages(args.verbose)
    cat = catalog_mod.Catalog(store)
    results = stages.run("query", lambda: cat.query(_build_query(args)))
    rows = [
        [r.tile_id, r.capture_date.isoformat(), repr(r.water_percent), repr(r.burnt_percent)]
        for r in results
    ]
    _print_rows(rows, ["tile_id", "date", "water_percent", "burnt_percent"], args.format)
    _print_manifest("query", stages, configs={}, outputs={"result_count": str(len(rows))})
    return 0


def cmd_rank(args) -> int:
    store = _store_path(args)
    stages = _Stages(args.verbose)
    cat = catalog_mod.Catalog(store)
    ref_tile, ref_date_s = args.reference
    ref_date = _parse_date(ref_date_s)
    reference = cat.get(ref_tile, ref_date)
    if reference is None:
        raise NotFoundError(f"reference record ({ref_tile}, {ref_date}) not in catalog")
    scored = stages.run(
        "rank",
        lambda: catalog_mod.rank(reference, _build_query(args), args.weights, cat, store),
    )
    rows = [
        [
            r.tile_id,
            r.capture_date.isoformat(),
            repr(r.water_percent),
            repr(r.burnt_percent),
            f"{score:.6f}",
        ]
        for r, score in scored
    ]
    _print_rows(rows, ["tile_id", "date", "water_percent", "burnt_percent", "score"], args.format)
    _print_manifest("rank", stages, configs={}, outputs={"result_count": str(len(rows))})
    return 0


# --- export-mask --------------------------------------------------------------------

def cmd_export_mask(args) -> int:
    store = _store_path(args)
    stages = _Stages(args.verbose)
    kind = dss.MaskKind(args.kind)
    refs = _analysis_refs(args.tile, args.date)
    mask_path = store / refs[f"{args.kind}_mask"]
    if not mask_path.is_file():
        raise NotFoundError(
            f"no {args.kind} mask stored for tile {args.tile} {args.date.isoformat()}"
        )
    mask = stages.run("load", lambda: dss.read_mask_pgm(mask_path, kind))
    out = Path(args.out)
    if args.format == "pgm":
        stages.run("export", lambda: dss.write_mask_pgm(mask, out))
    else:
        stages.run("export", lambda: dss.write_mask_tiff(mask, out))
    print(f"exported {args.kind} mask for {args.tile} {args.date.isoformat()} to {out}")
    _print_manifest("export-mask", stages, configs={}, outputs={"mask": str(out)})
    return 0


# --- synth -----------------------------------------------------------------------

def cmd_synth(args) -> int:
    stages = _Stages(args.verbose)
    outdir = Path(args.out)
    if args.sparse_water is not None:
        bundle, water_truth = synth.sparse_water_tile(
            tile_id=args.tile,
            capture_date=args.date,
            height=args.height,
            width=args.width,
            water_px=args.sparse_water,
            seed=args.seed,
        )
        truth = {"water": water_truth}
    else:
        bundle, truth = synth.planted_tile(
            tile_id=args.tile,
            capture_date=args.date,
            height=args.height,
            width=args.width,
            clear_px=args.clear,
            muddy_px=args.muddy,
            burnt_px=args.burnt,
            seed=args.seed,
        )
    paths = stages.run("write", lambda: synth.write_tile_inputs(outdir, bundle))
    outputs = {name: str(p) for name, p in paths.items()}
    for name, grid in truth.items():
        mask_kind = dss.MaskKind.WATER if name == "water" else dss.MaskKind.BURNT
        p = outdir / f"truth_{name}.pgm"
        dss.write_mask_pgm(dss.SegmentationMask(kind=mask_kind, labels=grid), p)
        outputs[f"truth_{name}"] = str(p)
    print(f"synthesized tile {bundle.metadata.tile_id} {bundle.metadata.capture_date.isoformat()} into {outdir}")
    _print_manifest("synth", stages, configs={}, outputs=outputs)
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awcbir",
        description="Water-body and burnt-area retrieval engine for multi-band satellite tiles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, store: bool = True) -> None:
        if store:
            p.add_argument(
                "--store",
                default=os.environ.get("AWCBIR_STORE"),
                help="tile store root (default: AWCBIR_STORE environment variable)",
            )
        p.add_argument("--jobs", type=int, default=os.cpu_count(), help="worker threads")
        p.add_argument("--verbose", action="store_true", help="stage log on stderr")

    p = sub.add_parser("ingest", help="chunk and store a four-band tile")
    add_common(p)
    p.add_argument("--tile", help="tile id (overrides sidecar)")
    p.add_argument("--date", type=_parse_date, help="capture date (overrides sidecar)")
    p.add_argument("--b2", required=True, help="band B2 (green) file")
    p.add_argument("--b3", required=True, help="band B3 (red) file")
    p.add_argument("--b4", required=True, help="band B4 (NIR) file")
    p.add_argument("--b5", required=True, help="band B5 (SWIR) file")
    p.add_argument("--meta", required=True, help="capture metadata sidecar (JSON)")
    p.add_argument("--chunk-side", type=int, default=tile_io.DEFAULT_CHUNK_SIDE)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="calibrate a stored tile and segment water/burnt areas")
    add_common(p)
    p.add_argument("--tile", required=True)
    p.add_argument("--date", type=_parse_date, required=True)
    p.add_argument("--calibration", required=True, help="per-band calibration config")
    p.add_argument("--thresholds", help="threshold config (default: shipped table)")
    p.add_argument("--target", choices=("water", "burnt", "both"), default="both")
    p.add_argument(
        "--ndvi-orientation",
        choices=("standard_nir_red", "red_minus_nir"),
        default="standard_nir_red",
        help="NDVI sign convention the threshold table was derived in",
    )
    p.set_defaults(func=cmd_segment)

    def add_query_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--query-water", type=_parse_interval, metavar="LO:HI")
        p.add_argument("--query-burnt", type=_parse_interval, metavar="LO:HI")
        p.add_argument("--from", dest="date_from", type=_parse_date, metavar="DATE")
        p.add_argument("--to", dest="date_to", type=_parse_date, metavar="DATE")
        p.add_argument("--tile", help="restrict to one tile id")
        p.add_argument("--format", choices=("table", "tsv"), default="table")

    p = sub.add_parser("query", help="filter catalog records")
    add_common(p)
    add_query_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("rank", help="rank catalog records by similarity to a reference tile")
    add_common(p)
    add_query_flags(p)
    p.add_argument(
        "--reference",
        nargs=2,
        metavar=("TILE", "DATE"),
        required=True,
        help="reference record key",
    )
    p.add_argument("--weights", type=_parse_weights, default=None, metavar="W1,W2,W3")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("export-mask", help="export a stored segmentation mask")
    add_common(p)
    p.add_argument("--tile", required=True)
    p.add_argument("--date", type=_parse_date, required=True)
    p.add_argument("--kind", choices=("water", "burnt"), required=True)
    p.add_argument("--format", choices=("pgm", "tiff"), default="pgm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_mask)

    p = sub.add_parser("synth", help="generate a synthetic tile with planted ground truth")
    add_common(p, store=False)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tile", default="planted-001")
    p.add_argument("--date", type=_parse_date, default=dt.date(2008, 4, 15))
    p.add_argument("--height", type=int, default=100)
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--clear", type=int, default=400, help="planted clear-water pixels")
    p.add_argument("--muddy", type=int, default=300, help="planted muddy-water pixels")
    p.add_argument("--burnt", type=int, default=250, help="planted sure-burnt pixels")
    p.add_argument("--sparse-water", type=int, default=None, metavar="N",
                   help="scatter N clear-water pixels instead of planting runs")
    p.add_argument("--seed", type=int, default=20080415)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except IoFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AwcbirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
