"""Spectral features and sparse feature vectors."""

import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from awcbir.errors import (
    BaimSingularityError,
    MissingBaimError,
    SfvUnreadableError,
    ValidationError,
)
from awcbir.features import (
    FeatureConfig,
    PixelFeatures,
    SparseFeatureVector,
    baim,
    baim_grid,
    brightness,
    brightness_grid,
    build_sfv,
    ndvi,
    ndvi_grid,
    read_sfv,
    require_baim,
    write_sfv,
)
from awcbir.tile_io import Band

DATE = dt.date(2008, 4, 15)

reflectances = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestNdvi:
    def test_known_value(self):
        assert ndvi(red=0.02, nir=0.04) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_zero_denominator_is_nodata(self):
        assert math.isnan(ndvi(0.0, 0.0))

    def test_nodata_propagates(self):
        assert math.isnan(ndvi(float("nan"), 0.5))

    def test_legacy_orientation_flips_sign(self):
        cfg = FeatureConfig(ndvi_orientation="red_minus_nir")
        assert ndvi(0.02, 0.04, cfg) == pytest.approx(-1.0 / 3.0, rel=1e-12)

    def test_unknown_orientation_rejected(self):
        with pytest.raises(ValidationError):
            FeatureConfig(ndvi_orientation="sideways")

    @given(red=reflectances, nir=reflectances)
    @settings(max_examples=100, deadline=None)
    def test_grid_matches_scalar(self, red, nir):
        grid = ndvi_grid(np.array([[red]]), np.array([[nir]]))
        scalar = ndvi(red, nir)
        if math.isnan(scalar):
            assert math.isnan(grid[0, 0])
        else:
            assert grid[0, 0] == scalar

    def test_bounded_when_inputs_non_negative(self):
        rng = np.random.default_rng(0)
        red = rng.uniform(0.0001, 1, (50, 50))
        nir = rng.uniform(0.0001, 1, (50, 50))
        out = ndvi_grid(red, nir)
        assert ((out >= -1) & (out <= 1)).all()


class TestBrightness:
    def test_is_band_sum(self):
        assert brightness(0.01, 0.005, 0.006, 0.0045) == pytest.approx(0.0255, rel=1e-12)

    def test_grid_matches_scalar(self):
        a = np.full((2, 2), 0.01)
        assert brightness_grid(a, a, a, a)[0, 0] == pytest.approx(0.04, rel=1e-15)


class TestBaim:
    def test_convergence_point_constants(self):
        # 1 / ((0.05-0.01)^2 + (0.02-0.01)^2) = 1/0.0017
        assert baim(0.01, 0.01) == pytest.approx(588.2353, abs=1e-4)

    def test_second_known_value(self):
        assert baim(0.012, 0.012) == pytest.approx(663.13, abs=0.01)

    def test_singularity_at_convergence_point(self):
        with pytest.raises(BaimSingularityError):
            baim(0.05, 0.02)

    def test_nodata_propagates(self):
        assert math.isnan(baim(float("nan"), 0.01))

    def test_custom_convergence_point(self):
        cfg = FeatureConfig(pc_nir=0.1, pc_swir=0.1)
        assert baim(0.1, 0.0, cfg) == pytest.approx(100.0, rel=1e-12)

    def test_grid_matches_scalar(self):
        vals = [(0.01, 0.01), (0.012, 0.012), (0.03, 0.001)]
        nir = np.array([[v[0] for v in vals]])
        swir = np.array([[v[1] for v in vals]])
        grid = baim_grid(nir, swir)
        for i, (n, s) in enumerate(vals):
            assert grid[0, i] == baim(n, s)

    def test_grid_singularity_named_with_coords(self):
        nir = np.array([[0.01, 0.05]])
        swir = np.array([[0.01, 0.02]])
        with pytest.raises(BaimSingularityError, match=r"x=1, y=0"):
            baim_grid(nir, swir)

    def test_grid_nan_does_not_trip_singularity(self):
        out = baim_grid(np.array([[float("nan")]]), np.array([[0.02]]))
        assert math.isnan(out[0, 0])


def grid_stack(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return {b: rng.uniform(0.001, 0.05, (h, w)) for b in Band}


class TestBuildSfv:
    def test_entries_follow_mask_in_row_major_order(self):
        rho = grid_stack(6, 5, seed=1)
        mask = np.zeros((6, 5), dtype=np.uint8)
        mask[4, 1] = 255
        mask[0, 3] = 63
        mask[4, 0] = 127
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE)
        assert list(zip(sfv.ys.tolist(), sfv.xs.tolist())) == [(0, 3), (4, 0), (4, 1)]
        assert sfv.total_pixels == 30
        assert sfv.relevant_fraction == pytest.approx(0.1)

    def test_feature_columns_match_grids(self):
        rho = grid_stack(4, 4, seed=2)
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[2, 3] = 1
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE, include_baim=True)
        assert sfv.b4[0] == rho[Band.B4][2, 3]
        assert sfv.ndvi[0] == pytest.approx(ndvi(rho[Band.B3][2, 3], rho[Band.B4][2, 3]))
        assert sfv.brt[0] == pytest.approx(
            brightness(*(rho[b][2, 3] for b in Band))
        )
        assert sfv.baim[0] == pytest.approx(baim(rho[Band.B4][2, 3], rho[Band.B5][2, 3]))

    def test_accepts_object_with_labels(self):
        class Holder:
            labels = np.array([[0, 1], [0, 0]], dtype=np.uint8)

        sfv = build_sfv(grid_stack(2, 2), Holder(), tile_id="t", capture_date=DATE)
        assert len(sfv) == 1

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            build_sfv(grid_stack(3, 3), np.zeros((2, 2)), tile_id="t", capture_date=DATE)

    def test_empty_mask_gives_empty_sfv(self):
        sfv = build_sfv(grid_stack(3, 3), np.zeros((3, 3)), tile_id="t", capture_date=DATE)
        assert len(sfv) == 0
        assert sfv.relevant_fraction == 0.0

    def test_entry_accessor(self):
        rho = grid_stack(3, 3, seed=4)
        mask = np.zeros((3, 3), dtype=np.uint8)
        mask[1, 2] = 255
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE)
        e = sfv.entry(0)
        assert isinstance(e, PixelFeatures)
        assert (e.x, e.y) == (2, 1)
        assert e.baim is None

    def test_requires_baim_helper(self):
        sfv = build_sfv(grid_stack(2, 2), np.ones((2, 2)), tile_id="t", capture_date=DATE)
        with pytest.raises(MissingBaimError):
            require_baim(sfv)


class TestSfvValidation:
    def _cols(self, n):
        return dict(
            b2=np.zeros(n), b3=np.zeros(n), b4=np.zeros(n), b5=np.zeros(n),
            ndvi=np.zeros(n), brt=np.zeros(n),
        )

    def test_unordered_entries_rejected(self):
        with pytest.raises(ValidationError, match="ordered"):
            SparseFeatureVector(
                tile_id="t", capture_date=DATE, total_pixels=10,
                xs=np.array([2, 1], dtype=np.uint32),
                ys=np.array([0, 0], dtype=np.uint32),
                **self._cols(2),
            )

    def test_column_length_mismatch_rejected(self):
        cols = self._cols(2)
        cols["brt"] = np.zeros(3)
        with pytest.raises(ValidationError):
            SparseFeatureVector(
                tile_id="t", capture_date=DATE, total_pixels=10,
                xs=np.array([0, 1], dtype=np.uint32),
                ys=np.array([0, 0], dtype=np.uint32),
                **cols,
            )

    def test_entry_count_capped_by_total(self):
        with pytest.raises(ValidationError):
            SparseFeatureVector(
                tile_id="t", capture_date=DATE, total_pixels=1,
                xs=np.array([0, 1], dtype=np.uint32),
                ys=np.array([0, 0], dtype=np.uint32),
                **self._cols(2),
            )

    def test_coordinate_keys_strictly_increasing(self):
        sfv = build_sfv(grid_stack(10, 10, seed=5), np.ones((10, 10)), tile_id="t", capture_date=DATE)
        keys = sfv.coordinate_keys()
        # same (y, x) order as entries, packed so sorting by key = row-major
        recon = sfv.xs.astype(np.uint64) << np.uint64(32) | sfv.ys.astype(np.uint64)
        assert np.array_equal(keys, recon)


class TestSfvSerialization:
    @pytest.mark.parametrize("include_baim", [False, True])
    def test_round_trip(self, tmp_path, include_baim):
        rho = grid_stack(9, 7, seed=6)
        mask = (np.random.default_rng(7).uniform(size=(9, 7)) < 0.3).astype(np.uint8)
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE, include_baim=include_baim)
        p = tmp_path / "v.sfv"
        write_sfv(sfv, p)
        back = read_sfv(p, "t", DATE)
        assert back.total_pixels == sfv.total_pixels
        assert back.has_baim == include_baim
        assert np.array_equal(back.xs, sfv.xs)
        assert np.array_equal(back.ys, sfv.ys)
        for col in ("b2", "b3", "b4", "b5", "ndvi", "brt"):
            assert np.array_equal(getattr(back, col), getattr(sfv, col))
        if include_baim:
            assert np.array_equal(back.baim, sfv.baim)

    def test_rewrite_is_byte_identical(self, tmp_path):
        rho = grid_stack(8, 8, seed=8)
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[3:5, 2:6] = 255
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE)
        write_sfv(sfv, tmp_path / "a.sfv")
        write_sfv(sfv, tmp_path / "b.sfv")
        assert (tmp_path / "a.sfv").read_bytes() == (tmp_path / "b.sfv").read_bytes()

    def test_size_is_header_plus_records(self, tmp_path):
        rho = grid_stack(8, 8, seed=9)
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[0, :5] = 1
        sfv = build_sfv(rho, mask, tile_id="t", capture_date=DATE)
        p = tmp_path / "v.sfv"
        write_sfv(sfv, p)
        assert p.stat().st_size == 32 + 5 * (8 + 6 * 8)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SfvUnreadableError):
            read_sfv(tmp_path / "absent.sfv")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "v.sfv"
        p.write_bytes(b"NOPE" + bytes(28))
        with pytest.raises(SfvUnreadableError, match="magic"):
            read_sfv(p)

    def test_truncated_payload(self, tmp_path):
        rho = grid_stack(4, 4, seed=10)
        sfv = build_sfv(rho, np.ones((4, 4)), tile_id="t", capture_date=DATE)
        p = tmp_path / "v.sfv"
        write_sfv(sfv, p)
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(SfvUnreadableError, match="length"):
            read_sfv(p)

    @given(n=st.integers(min_value=0, max_value=40))
    @settings(
        max_examples=20,
        deadline=None,
        suppress_health_check=[HealthCheck.function_scoped_fixture],
    )
    def test_round_trip_any_density(self, tmp_path, n):
        rng = np.random.default_rng(n)
        mask = np.zeros(64, dtype=np.uint8)
        mask[rng.choice(64, size=n, replace=False)] = 1
        sfv = build_sfv(grid_stack(8, 8, seed=n), mask.reshape(8, 8), tile_id="t", capture_date=DATE)
        p = tmp_path / f"v{n}.sfv"
        write_sfv(sfv, p)
        assert len(read_sfv(p)) == n
