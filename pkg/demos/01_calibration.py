"""From raw sensor counts to top-of-atmosphere reflectance.

Walks one pixel through the two calibration steps, then calibrates a
whole grid at once and shows that the endpoints of the DN range land
exactly on the configured radiance limits.
"""

import datetime as dt

import numpy as np

from awcbir.radiometry import (
    BandCalibration,
    SolarGeometry,
    calibrate_band,
    earth_sun_distance,
    solar_zenith,
    spectral_radiance,
    toa_reflectance,
)
from awcbir.tile_io import Band, BandRaster


def main() -> None:
    # a plausible green-band setup: radiance 0..52 W/m^2/sr/um over 12 bits
    cal = BandCalibration(lmin=0.0, lmax=52.0, qcal_min=0, qcal_max=4095, esun=1857.0)
    date = dt.date(2008, 4, 15)
    geom = SolarGeometry(
        earth_sun_distance_au=earth_sun_distance(date),
        solar_zenith_deg=solar_zenith(date, 19.0, 10.5),  # mid-morning overpass
    )

    print("capture date:", date)
    print(f"earth-sun distance: {geom.earth_sun_distance_au:.5f} au")
    print(f"solar zenith:       {geom.solar_zenith_deg:.2f} deg")
    print(f"(perihelion check: distance at day 4 = {earth_sun_distance(4):.5f} au)")
    print()

    dn = 1234
    radiance = spectral_radiance(dn, cal)
    rho = toa_reflectance(radiance, cal, geom)
    print(f"DN {dn} -> radiance {radiance:.4f} -> reflectance {rho:.6f}")
    print(f"DN {cal.qcal_min} -> radiance {spectral_radiance(cal.qcal_min, cal)} (= lmin, exact)")
    print(f"DN {cal.qcal_max} -> radiance {spectral_radiance(cal.qcal_max, cal)} (= lmax, exact)")
    print()

    # grid path: DN 0 is the NoData marker and comes out as NaN
    grid = np.array([[0, 100, 2048], [4095, 1234, 0]], dtype=np.uint16)
    out = calibrate_band(BandRaster(band=Band.B2, dn=grid), cal, geom)
    print("DN grid:")
    print(grid)
    print("reflectance grid (NaN marks NoData):")
    with np.printoptions(precision=6):
        print(out.rho)
    scalar = toa_reflectance(spectral_radiance(1234, cal), cal, geom)
    print(f"grid[1,1] equals the scalar pipeline: {out.rho[1, 1] == scalar}")


if __name__ == "__main__":
    main()
