"""Threshold decision tree for water: clear, moderately clear, muddy.

Builds a tiny reflectance scene with one pixel of each kind, segments
it, and renders the label grid. Water pixels must fall inside every
band, brightness and NDVI range of their class table; a pixel inside
both the clear and muddy boxes is called moderately clear.
"""

import datetime as dt

import numpy as np

from awcbir.dss import WaterClass, segment_water, water_percentage
from awcbir.tile_io import Band

GLYPH = {
    int(WaterClass.NON_WATER): ".",
    int(WaterClass.MUDDY): "m",
    int(WaterClass.MODERATELY_CLEAR): "o",
    int(WaterClass.CLEAR): "C",
}

PIXELS = {
    "clear water": (0.0100, 0.0050, 0.0060, 0.0045),
    "muddy water": (0.0239, 0.0192, 0.0285, 0.0276),
    "moderately clear": (0.0100, 0.0080, 0.0190, 0.0180),
    "dry land": (0.0900, 0.0800, 0.4000, 0.2000),
}


def main() -> None:
    h = w = 8
    rho = {b: np.full((h, w), 0.09) for b in Band}  # land background
    rho[Band.B4][:] = 0.40
    rho[Band.B5][:] = 0.20

    # paint a little lake: clear center, moderately clear rim, muddy inflow
    for y in range(2, 6):
        for x in range(2, 6):
            for b, v in zip(Band, PIXELS["moderately clear"]):
                rho[b][y, x] = v
    for y in range(3, 5):
        for x in range(3, 5):
            for b, v in zip(Band, PIXELS["clear water"]):
                rho[b][y, x] = v
    for x in range(6, 8):
        for b, v in zip(Band, PIXELS["muddy water"]):
            rho[b][4, x] = v

    mask, sfv = segment_water(rho, tile_id="demo", capture_date=dt.date(2008, 4, 15))

    print("label grid (C clear, o moderately clear, m muddy, . non-water):")
    for row in mask.labels:
        print("  " + "".join(GLYPH[v] for v in row))
    print()
    print(f"water fraction: {water_percentage(mask)}%")
    print(f"sparse feature vector holds {len(sfv)} of {h * w} pixels")
    first = sfv.entry(0)
    print(
        f"first entry: ({first.x},{first.y}) "
        f"brt={first.brt:.4f} ndvi={first.ndvi:.4f}"
    )


if __name__ == "__main__":
    main()
