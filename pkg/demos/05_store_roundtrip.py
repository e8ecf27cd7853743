"""The chunked tile store: compression, checksums, corruption detection.

Tiles are stored one band at a time as a grid of zlib-compressed chunks,
each carrying a checksum of its raw pixels. Loading verifies every
chunk, so a single flipped byte anywhere is caught and named.
"""

import tempfile
from pathlib import Path

from awcbir import synth
from awcbir.errors import ChecksumMismatchError
from awcbir.tile_io import load_tile, store_tile


def main() -> None:
    bundle, _ = synth.planted_tile(height=120, width=90)
    meta = bundle.metadata
    store = Path(tempfile.mkdtemp()) / "store"

    # 64-pixel chunks leave ragged edges on a 120x90 tile: 2x2 grid per band
    refs = store_tile(bundle, store, chunk_side=64)
    print(f"stored {meta.tile_id} as {len(refs)} chunks:")
    for ref in refs[:4]:
        print("  ", ref)
    print("   ...")

    raw = sum((store / r).stat().st_size for r in refs)
    dense = 4 * 120 * 90 * 2
    print(f"compressed {dense} pixel bytes into {raw} ({100.0 * raw / dense:.1f}%)")
    print()

    loaded = load_tile(store, meta.tile_id, meta.capture_date)
    print("round trip bit-exact:", loaded == bundle)

    victim = store / refs[5]
    blob = bytearray(victim.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    victim.write_bytes(bytes(blob))
    print(f"flipped one byte in {refs[5]}")
    try:
        load_tile(store, meta.tile_id, meta.capture_date)
    except ChecksumMismatchError as exc:
        print("load refused:", exc)

    # recovery: drop the damaged chunk, re-store rewrites exactly the missing files
    victim.unlink()
    store_tile(bundle, store, chunk_side=64)
    print("after repair, round trip bit-exact:", load_tile(store, meta.tile_id, meta.capture_date) == bundle)


if __name__ == "__main__":
    main()
