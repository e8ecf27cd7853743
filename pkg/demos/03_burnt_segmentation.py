"""Two-stage burnt-area detection: probable band box, then sure indices.

Stage one is a strict box over the four band reflectances. Stage two
keeps only probable pixels whose burnt-area index (BAIM), NDVI and
brightness also fall in the sure ranges, so sure pixels are always a
subset of probable ones.
"""

import datetime as dt

import numpy as np

from awcbir.dss import (
    BURNT_PROBABLE,
    BURNT_SURE,
    burnt_percentage,
    segment_burnt,
)
from awcbir.features import baim, brightness, ndvi
from awcbir.tile_io import Band

SURE_PX = (0.0092, 0.0060, 0.0120, 0.0120)
PROBABLE_ONLY_PX = (0.0086, 0.0042, 0.0086, 0.0101)
LAND_PX = (0.0900, 0.0800, 0.4000, 0.2000)


def describe(name, px):
    b2, b3, b4, b5 = px
    print(
        f"{name:14s} baim={baim(b4, b5):8.2f} "
        f"ndvi={ndvi(b3, b4):7.4f} brt={brightness(b2, b3, b4, b5):.4f}"
    )


def main() -> None:
    for name, px in (("sure", SURE_PX), ("probable-only", PROBABLE_ONLY_PX), ("land", LAND_PX)):
        describe(name, px)
    print()

    h = w = 10
    rho = {b: np.full((h, w), v) for b, v in zip(Band, LAND_PX)}
    for y in range(2, 7):  # burn scar with a cooler rim
        for x in range(2, 7):
            src = SURE_PX if 3 <= y <= 5 and 3 <= x <= 5 else PROBABLE_ONLY_PX
            for b, v in zip(Band, src):
                rho[b][y, x] = v

    mask, sfv = segment_burnt(rho, tile_id="demo", capture_date=dt.date(2008, 4, 15))

    glyph = {0: ".", BURNT_PROBABLE: "p", BURNT_SURE: "S"}
    print("label grid (S sure, p probable-only, . clean):")
    for row in mask.labels:
        print("  " + "".join(glyph[v] for v in row))
    print()

    sure = int(np.count_nonzero(mask.labels == BURNT_SURE))
    probable = int(np.count_nonzero(mask.labels != 0))
    print(f"probable pixels: {probable}, sure pixels: {sure} (sure is a subset)")
    print(f"burnt fraction (sure only): {burnt_percentage(mask)}%")
    print(f"feature vector keeps BAIM for all {len(sfv)} relevant pixels: {sfv.has_baim}")


if __name__ == "__main__":
    main()
