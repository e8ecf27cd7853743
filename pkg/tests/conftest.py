"""Shared fixtures and the acceptance-criterion result summary."""

import datetime as dt

import numpy as np
import pytest

from awcbir import radiometry, synth
from awcbir.tile_io import BANDS, BandRaster, TileBundle, TileMetadata


def make_metadata(**overrides) -> TileMetadata:
    base = dict(
        tile_id="t1",
        capture_date=dt.date(2008, 4, 15),
        center_latitude=19.0,
        center_longitude=78.5,
        acquisition_time=None,
        radiometric_bits=12,
    )
    base.update(overrides)
    return TileMetadata(**base)


def make_bundle(height=50, width=70, seed=0, **meta_overrides) -> TileBundle:
    rng = np.random.default_rng(seed)
    return TileBundle(
        metadata=make_metadata(**meta_overrides),
        bands={
            b: BandRaster(band=b, dn=rng.integers(1, 4096, (height, width), dtype=np.uint16))
            for b in BANDS
        },
    )

# criterion number -> (title, all tests passed so far)
_acceptance_results: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, title): marks a test as covering one acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num = marker.kwargs.get("num", marker.args[0] if marker.args else 0)
    title = marker.kwargs.get("title", "")
    entry = _acceptance_results.setdefault(num, [title, True])
    if title and not entry[0]:
        entry[0] = title
    # any non-passed phase (setup error, call failure, skip) fails the criterion
    if report.when == "call":
        if not report.passed:
            entry[1] = False
    elif report.failed or report.skipped:
        entry[1] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance_results):
        title, ok = _acceptance_results[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")


@pytest.fixture(scope="session")
def planted():
    """The standard planted tile: 400 clear + 300 muddy + 250 sure-burnt
    pixels on a 100x100 background, with its truth masks and calibration."""
    bundle, truth = synth.planted_tile()
    cals = synth.synthetic_calibration(bundle.metadata)
    rho = radiometry.calibrate_bundle(bundle, cals)
    return {"bundle": bundle, "truth": truth, "cals": cals, "rho": rho}
