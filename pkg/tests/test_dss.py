"""Threshold segmentation: classifiers, masks, percentages, configs."""

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awcbir import features
from awcbir.dss import (
    BURNT_NONE,
    BURNT_PROBABLE,
    BURNT_SURE,
    FeatureRange,
    MaskKind,
    SegmentationMask,
    ThresholdTable,
    WaterClass,
    burnt_percentage,
    classify_burnt_pixel_probable,
    classify_burnt_pixel_sure,
    classify_water_pixel,
    default_thresholds,
    label_counts,
    load_threshold_config,
    read_mask_pgm,
    segment_burnt,
    segment_water,
    alternate_burnt_thresholds,
    water_percentage,
    write_mask_pgm,
    write_mask_tiff,
    write_threshold_config,
)
from awcbir.errors import (
    ConfigError,
    DimensionMismatchError,
    MissingBaimError,
    ValidationError,
    WrongMaskKindError,
)
from awcbir.features import PixelFeatures
from awcbir.tile_io import Band

DATE = dt.date(2008, 4, 15)

# hand-checked representative pixels (b2, b3, b4, b5)
CLEAR_PX = (0.0100, 0.0050, 0.0060, 0.0045)
MUDDY_PX = (0.0239, 0.0192, 0.0285, 0.0276)
MOD_CLEAR_PX = (0.0100, 0.0080, 0.0190, 0.0180)
SURE_BURNT_PX = (0.0092, 0.0060, 0.0120, 0.0120)
PROBABLE_ONLY_PX = (0.0086, 0.0042, 0.0086, 0.0101)  # brt 0.0315 < sure lo 0.035
BACKGROUND_PX = (0.0900, 0.0800, 0.4000, 0.2000)


def make_pixel(b2, b3, b4, b5, with_baim=False, **overrides) -> PixelFeatures:
    values = dict(
        x=0,
        y=0,
        b2=b2,
        b3=b3,
        b4=b4,
        b5=b5,
        ndvi=features.ndvi(b3, b4),
        brt=features.brightness(b2, b3, b4, b5),
        baim=features.baim(b4, b5) if with_baim else None,
    )
    values.update(overrides)
    return PixelFeatures(**values)


def stack_from_pixels(pixels, width=None):
    """Reflectance grids holding the given pixels row-major."""
    n = len(pixels)
    width = width or n
    height = -(-n // width)
    grids = {b: np.full((height, width), np.nan) for b in Band}
    for i, px in enumerate(pixels):
        y, x = divmod(i, width)
        for b, v in zip(Band, px):
            grids[b][y, x] = v
    return grids


class TestFeatureRange:
    def test_inclusive_bounds(self):
        r = FeatureRange(1.0, 2.0)
        assert r.contains(1.0) and r.contains(2.0) and r.contains(1.5)

    def test_exclusive_bounds(self):
        r = FeatureRange(1.0, 2.0, lo_inclusive=False, hi_inclusive=False)
        assert not r.contains(1.0) and not r.contains(2.0) and r.contains(1.5)

    def test_nan_never_member(self):
        assert not FeatureRange(-1.0, 1.0).contains(float("nan"))

    def test_inverted_rejected(self):
        with pytest.raises(ValidationError):
            FeatureRange(2.0, 1.0)

    @given(
        st.floats(min_value=-10, max_value=10, allow_nan=False),
        st.booleans(),
        st.booleans(),
    )
    @settings(max_examples=200, deadline=None)
    def test_array_agrees_with_scalar(self, value, lo_inc, hi_inc):
        r = FeatureRange(-1.0, 1.0, lo_inclusive=lo_inc, hi_inclusive=hi_inc)
        assert bool(r.contains_array(np.array([value]))[0]) == r.contains(value)


class TestThresholdTable:
    def test_default_clear_water_bounds(self):
        t = default_thresholds()
        assert t.clear_water["b2"] == FeatureRange(0.0078, 0.0142)
        assert t.clear_water["ndvi"] == FeatureRange(-0.1746, 0.66)

    def test_default_probable_bounds_are_strict(self):
        t = default_thresholds()
        r = t.burnt_probable["b5"]
        assert (r.lo, r.hi) == (0.01, 0.013)
        assert not r.lo_inclusive and not r.hi_inclusive

    def test_default_sure_bounds_are_inclusive(self):
        t = default_thresholds()
        r = t.burnt_sure["baim"]
        assert (r.lo, r.hi) == (585.0, 925.0)
        assert r.lo_inclusive and r.hi_inclusive

    def test_alternate_table_narrows_burnt(self):
        t = alternate_burnt_thresholds()
        assert t.burnt_probable["b2"] == FeatureRange(0.0092, 0.0100)
        assert t.burnt_sure["baim"].lo == pytest.approx(558.3829)
        assert t.clear_water == default_thresholds().clear_water

    def test_missing_feature_rejected(self):
        t = default_thresholds()
        broken = dict(t.clear_water)
        del broken["ndvi"]
        with pytest.raises(ValidationError, match="ndvi"):
            ThresholdTable(
                clear_water=broken,
                muddy_water=t.muddy_water,
                burnt_probable=t.burnt_probable,
                burnt_sure=t.burnt_sure,
            )


class TestWaterClassifier:
    def test_clear_example(self):
        px = make_pixel(*CLEAR_PX)
        assert px.brt == pytest.approx(0.0255)
        assert classify_water_pixel(px) is WaterClass.CLEAR

    def test_muddy_example(self):
        px = make_pixel(*MUDDY_PX)
        assert px.brt == pytest.approx(0.0992)
        assert classify_water_pixel(px) is WaterClass.MUDDY

    def test_overlap_is_moderately_clear(self):
        assert classify_water_pixel(make_pixel(*MOD_CLEAR_PX)) is WaterClass.MODERATELY_CLEAR

    def test_all_zero_is_non_water(self):
        px = PixelFeatures(x=0, y=0, b2=0, b3=0, b4=0, b5=0, ndvi=float("nan"), brt=0.0)
        assert classify_water_pixel(px) is WaterClass.NON_WATER

    def test_nodata_is_non_water(self):
        nan = float("nan")
        px = PixelFeatures(x=0, y=0, b2=nan, b3=nan, b4=nan, b5=nan, ndvi=nan, brt=nan)
        assert classify_water_pixel(px) is WaterClass.NON_WATER

    def test_sure_burnt_forced_to_non_water(self):
        # this pixel sits inside the clear-water box; burnt wins
        px = make_pixel(*SURE_BURNT_PX, with_baim=True)
        t = default_thresholds()
        assert all(
            t.clear_water[k].contains(v)
            for k, v in zip(
                ("b2", "b3", "b4", "b5", "brt", "ndvi"),
                (px.b2, px.b3, px.b4, px.b5, px.brt, px.ndvi),
            )
        )
        assert classify_water_pixel(px) is WaterClass.NON_WATER

    def test_sure_burnt_precedence_computes_baim_when_absent(self):
        px = make_pixel(*SURE_BURNT_PX, with_baim=False)
        assert classify_water_pixel(px) is WaterClass.NON_WATER

    def test_probable_only_burnt_does_not_preempt(self):
        # fails the sure stage, so water classification proceeds normally
        px = make_pixel(*PROBABLE_ONLY_PX, with_baim=True)
        assert classify_burnt_pixel_probable(px.b2, px.b3, px.b4, px.b5)
        assert not classify_burnt_pixel_sure(px)
        assert classify_water_pixel(px) is WaterClass.NON_WATER  # b3 below clear lo


class TestBurntClassifiers:
    def test_probable_example(self):
        assert classify_burnt_pixel_probable(0.0092, 0.006, 0.012, 0.012)

    def test_single_bound_violation(self):
        assert not classify_burnt_pixel_probable(0.0092, 0.006, 0.012, 0.014)

    def test_bounds_are_strict(self):
        assert not classify_burnt_pixel_probable(0.0085, 0.006, 0.012, 0.012)
        assert not classify_burnt_pixel_probable(0.010, 0.006, 0.012, 0.012)

    def test_zeros_not_probable(self):
        assert not classify_burnt_pixel_probable(0.0, 0.0, 0.0, 0.0)

    def test_sure_example(self):
        px = make_pixel(*SURE_BURNT_PX, with_baim=True)
        assert px.baim == pytest.approx(663.13, abs=0.01)
        assert px.ndvi == pytest.approx(1.0 / 3.0)
        assert px.brt == pytest.approx(0.0392)
        assert classify_burnt_pixel_sure(px)

    def test_low_baim_not_sure(self):
        px = make_pixel(*SURE_BURNT_PX, baim=500.0)
        assert not classify_burnt_pixel_sure(px)

    def test_high_brt_not_sure(self):
        # brt outside [0.035, 0.05] fails the auxiliary check even when the
        # band box passes
        px = make_pixel(*SURE_BURNT_PX, with_baim=True, brt=0.06)
        assert not classify_burnt_pixel_sure(px)

    def test_not_probable_is_not_sure_regardless_of_aux(self):
        px = make_pixel(*BACKGROUND_PX, baim=700.0, ndvi=0.2, brt=0.04)
        assert not classify_burnt_pixel_sure(px)

    def test_probable_without_baim_raises(self):
        px = make_pixel(*SURE_BURNT_PX, with_baim=False)
        with pytest.raises(MissingBaimError):
            classify_burnt_pixel_sure(px)

    def test_sure_implies_probable(self):
        rng = np.random.default_rng(0)
        hits = 0
        for _ in range(3000):
            b = rng.uniform([0.007, 0.003, 0.007, 0.009], [0.012, 0.009, 0.018, 0.014])
            px = make_pixel(*b, with_baim=True)
            if classify_burnt_pixel_sure(px):
                hits += 1
                assert classify_burnt_pixel_probable(*b)
        assert hits > 0


class TestSegmentWater:
    def test_planted_pixels_recovered(self):
        pixels = [CLEAR_PX, MUDDY_PX, MOD_CLEAR_PX, SURE_BURNT_PX, BACKGROUND_PX, (0.0,) * 4]
        rho = stack_from_pixels(pixels, width=3)
        mask, sfv = segment_water(rho, tile_id="t", capture_date=DATE)
        assert mask.labels[0, 0] == WaterClass.CLEAR
        assert mask.labels[0, 1] == WaterClass.MUDDY
        assert mask.labels[0, 2] == WaterClass.MODERATELY_CLEAR
        assert mask.labels[1, 0] == WaterClass.NON_WATER  # burnt precedence
        assert mask.labels[1, 1] == WaterClass.NON_WATER
        assert mask.labels[1, 2] == WaterClass.NON_WATER

    def test_sfv_holds_exactly_the_water_pixels(self):
        pixels = [CLEAR_PX, BACKGROUND_PX, MUDDY_PX, MOD_CLEAR_PX]
        rho = stack_from_pixels(pixels, width=2)
        mask, sfv = segment_water(rho, tile_id="t", capture_date=DATE)
        ys, xs = np.nonzero(mask.labels)
        assert np.array_equal(sfv.ys, ys.astype(np.uint32))
        assert np.array_equal(sfv.xs, xs.astype(np.uint32))
        assert not sfv.has_baim

    def test_uniform_mid_clear_tile_fully_covered(self):
        rho = {b: np.full((16, 16), v) for b, v in zip(Band, (0.011, 0.008, 0.012, 0.012))}
        mask, sfv = segment_water(rho, tile_id="t", capture_date=DATE)
        assert (mask.labels == WaterClass.CLEAR).all()
        assert sfv.relevant_fraction == 1.0

    def test_tile_without_water_is_empty(self):
        rho = {b: np.full((8, 8), v) for b, v in zip(Band, BACKGROUND_PX)}
        mask, sfv = segment_water(rho, tile_id="t", capture_date=DATE)
        assert not mask.labels.any()
        assert len(sfv) == 0

    def test_missing_band_rejected(self):
        rho = stack_from_pixels([CLEAR_PX])
        del rho[Band.B5]
        with pytest.raises(DimensionMismatchError):
            segment_water(rho, tile_id="t", capture_date=DATE)

    def test_mismatched_band_shapes_rejected(self):
        rho = stack_from_pixels([CLEAR_PX, MUDDY_PX], width=2)
        rho[Band.B4] = rho[Band.B4][:, :1]
        with pytest.raises(DimensionMismatchError):
            segment_water(rho, tile_id="t", capture_date=DATE)


class TestSegmentBurnt:
    def test_probable_and_sure_codes(self):
        pixels = [SURE_BURNT_PX, PROBABLE_ONLY_PX, BACKGROUND_PX, CLEAR_PX]
        rho = stack_from_pixels(pixels, width=2)
        mask, sfv = segment_burnt(rho, tile_id="t", capture_date=DATE)
        assert mask.labels[0, 0] == BURNT_SURE
        assert mask.labels[0, 1] == BURNT_PROBABLE
        assert mask.labels[1, 0] == BURNT_NONE
        assert mask.labels[1, 1] == BURNT_NONE

    def test_sfv_covers_probable_union_sure_with_baim(self):
        pixels = [SURE_BURNT_PX, PROBABLE_ONLY_PX, BACKGROUND_PX]
        rho = stack_from_pixels(pixels, width=3)
        mask, sfv = segment_burnt(rho, tile_id="t", capture_date=DATE)
        assert len(sfv) == 2
        assert sfv.has_baim
        assert np.isfinite(sfv.baim).all()

    def test_all_nodata_tile_is_all_zero(self):
        rho = {b: np.full((5, 5), np.nan) for b in Band}
        mask, sfv = segment_burnt(rho, tile_id="t", capture_date=DATE)
        assert not mask.labels.any()
        assert len(sfv) == 0

    def test_sure_subset_of_probable(self):
        rng = np.random.default_rng(1)
        rho = {
            b: rng.uniform(lo, hi, (40, 40))
            for b, lo, hi in zip(Band, (0.007, 0.003, 0.007, 0.009), (0.012, 0.009, 0.018, 0.014))
        }
        mask, _ = segment_burnt(rho, tile_id="t", capture_date=DATE)
        assert ((mask.labels == BURNT_SURE) <= (mask.labels != BURNT_NONE)).all()
        assert (mask.labels == BURNT_SURE).any()


class TestGridMatchesScalar:
    def test_random_tile_oracle(self):
        # same decisions pixel-by-pixel as the scalar classifiers
        rng = np.random.default_rng(42)
        h = w = 24
        rho = {b: np.empty((h, w)) for b in Band}
        # mix of scales so every class and the background get hits
        for b in Band:
            base = rng.uniform(0.0, 0.03, (h, w))
            wide = rng.uniform(0.0, 0.5, (h, w))
            rho[b] = np.where(rng.uniform(size=(h, w)) < 0.8, base, wide)
        for b in Band:  # sprinkle NoData
            grid = rho[b]
            grid[rng.uniform(size=(h, w)) < 0.05] = np.nan

        water_mask, _ = segment_water(rho, tile_id="t", capture_date=DATE)
        burnt_mask, _ = segment_burnt(rho, tile_id="t", capture_date=DATE)

        water_hits = 0
        for y in range(h):
            for x in range(w):
                b2, b3, b4, b5 = (float(rho[b][y, x]) for b in Band)
                px = PixelFeatures(
                    x=x, y=y, b2=b2, b3=b3, b4=b4, b5=b5,
                    ndvi=features.ndvi(b3, b4),
                    brt=features.brightness(b2, b3, b4, b5),
                )
                assert water_mask.labels[y, x] == int(classify_water_pixel(px))
                probable = classify_burnt_pixel_probable(b2, b3, b4, b5)
                if probable:
                    px_b = PixelFeatures(
                        x=x, y=y, b2=b2, b3=b3, b4=b4, b5=b5,
                        ndvi=px.ndvi, brt=px.brt, baim=features.baim(b4, b5),
                    )
                    expected = BURNT_SURE if classify_burnt_pixel_sure(px_b) else BURNT_PROBABLE
                else:
                    expected = BURNT_NONE
                assert burnt_mask.labels[y, x] == expected
                if water_mask.labels[y, x]:
                    water_hits += 1
        assert water_hits > 0


class TestPercentages:
    def make_mask(self, kind, codes, shape):
        labels = np.zeros(shape, dtype=np.uint8)
        flat = labels.ravel()
        i = 0
        for code, count in codes.items():
            flat[i : i + count] = code
            i += count
        return SegmentationMask(kind=kind, labels=labels)

    def test_water_512_of_4096(self):
        mask = self.make_mask(MaskKind.WATER, {63: 200, 127: 112, 255: 200}, (64, 64))
        assert water_percentage(mask) == 12.5

    def test_water_zero(self):
        mask = self.make_mask(MaskKind.WATER, {}, (10, 10))
        assert water_percentage(mask) == 0.0

    def test_water_full(self):
        mask = SegmentationMask(kind=MaskKind.WATER, labels=np.full((8, 8), 255, np.uint8))
        assert water_percentage(mask) == 100.0

    def test_burnt_counts_only_sure(self):
        mask = self.make_mask(MaskKind.BURNT, {128: 4096}, (64, 64))
        assert burnt_percentage(mask) == 0.0

    def test_burnt_250_of_10000(self):
        mask = self.make_mask(MaskKind.BURNT, {255: 250}, (100, 100))
        assert burnt_percentage(mask) == 2.5

    def test_wrong_kind_rejected(self):
        water = self.make_mask(MaskKind.WATER, {255: 3}, (4, 4))
        burnt = self.make_mask(MaskKind.BURNT, {255: 3}, (4, 4))
        with pytest.raises(WrongMaskKindError):
            water_percentage(burnt)
        with pytest.raises(WrongMaskKindError):
            burnt_percentage(water)

    def test_label_counts_cover_all_pixels(self):
        mask = self.make_mask(MaskKind.WATER, {63: 5, 255: 7}, (6, 6))
        counts = label_counts(mask)
        assert counts[63] == 5 and counts[255] == 7
        assert sum(counts.values()) == 36

    @given(n=st.integers(min_value=0, max_value=64))
    @settings(max_examples=50, deadline=None)
    def test_percentage_bounds(self, n):
        labels = np.zeros(64, dtype=np.uint8)
        labels[:n] = 255
        mask = SegmentationMask(kind=MaskKind.WATER, labels=labels.reshape(8, 8))
        assert 0.0 <= water_percentage(mask) <= 100.0


class TestMaskValidation:
    def test_foreign_water_code_rejected(self):
        labels = np.full((4, 4), 17, dtype=np.uint8)
        with pytest.raises(ValidationError, match="17"):
            SegmentationMask(kind=MaskKind.WATER, labels=labels)

    def test_water_code_invalid_in_burnt_mask(self):
        labels = np.full((4, 4), 63, dtype=np.uint8)
        with pytest.raises(ValidationError):
            SegmentationMask(kind=MaskKind.BURNT, labels=labels)

    def test_1d_rejected(self):
        with pytest.raises(ValidationError):
            SegmentationMask(kind=MaskKind.WATER, labels=np.zeros(4, dtype=np.uint8))


class TestThresholdConfig:
    def test_round_trip_default(self, tmp_path):
        p = tmp_path / "thr.cfg"
        write_threshold_config(p, default_thresholds())
        assert load_threshold_config(p) == default_thresholds()

    def test_round_trip_alternate(self, tmp_path):
        p = tmp_path / "thr.cfg"
        write_threshold_config(p, alternate_burnt_thresholds())
        assert load_threshold_config(p) == alternate_burnt_thresholds()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_threshold_config(tmp_path / "absent.cfg")

    def test_missing_section(self, tmp_path):
        p = tmp_path / "thr.cfg"
        p.write_text("[clear_water]\nb2 0.0 1.0 true true\n")
        with pytest.raises(ConfigError, match="sections"):
            load_threshold_config(p)

    def test_unknown_section(self, tmp_path):
        p = tmp_path / "thr.cfg"
        p.write_text("[swamp_water]\nb2 0.0 1.0 true true\n")
        with pytest.raises(ConfigError, match="swamp_water"):
            load_threshold_config(p)

    def test_foreign_feature_in_section(self, tmp_path):
        p = tmp_path / "thr.cfg"
        p.write_text("[burnt_probable]\nbaim 0.0 1.0 true true\n")
        with pytest.raises(ConfigError, match="baim"):
            load_threshold_config(p)

    def test_bad_flag_word(self, tmp_path):
        p = tmp_path / "thr.cfg"
        p.write_text("[clear_water]\nb2 0.0 1.0 yes no\n")
        with pytest.raises(ConfigError, match="true/false"):
            load_threshold_config(p)

    def test_inverted_range(self, tmp_path):
        p = tmp_path / "thr.cfg"
        p.write_text("[clear_water]\nb2 1.0 0.0 true true\n")
        with pytest.raises(ConfigError):
            load_threshold_config(p)


class TestMaskFiles:
    def planted_mask(self):
        labels = np.zeros((13, 9), dtype=np.uint8)
        labels[2:5, 1:7] = 255
        labels[10, :] = 63
        return SegmentationMask(kind=MaskKind.WATER, labels=labels)

    def test_pgm_round_trip(self, tmp_path):
        mask = self.planted_mask()
        p = tmp_path / "m.pgm"
        write_mask_pgm(mask, p)
        back = read_mask_pgm(p, MaskKind.WATER)
        assert np.array_equal(back.labels, mask.labels)

    def test_pgm_header(self, tmp_path):
        p = tmp_path / "m.pgm"
        write_mask_pgm(self.planted_mask(), p)
        assert p.read_bytes().startswith(b"P5\n9 13\n255\n")

    def test_pgm_with_comment_line(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P5\n# made elsewhere\n2 2\n255\n\x00\xff\x3f\x7f")
        mask = read_mask_pgm(p, MaskKind.WATER)
        assert mask.labels.tolist() == [[0, 255], [63, 127]]

    def test_pgm_truncated_payload(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(ValidationError, match="truncated"):
            read_mask_pgm(p, MaskKind.WATER)

    def test_pgm_wrong_magic(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P2\n2 2\n255\n")
        with pytest.raises(ValidationError):
            read_mask_pgm(p, MaskKind.WATER)

    def test_tiff_export_is_16_bit(self, tmp_path):
        from PIL import Image

        mask = self.planted_mask()
        p = tmp_path / "m.tif"
        write_mask_tiff(mask, p)
        with Image.open(p) as im:
            assert im.mode in ("I;16", "I;16L", "I;16B", "I;16N", "I")
            arr = np.asarray(im, dtype=np.uint16)
        assert np.array_equal(arr, mask.labels.astype(np.uint16))


class TestDeterminism:
    def test_parallel_segmentation_identical(self):
        rng = np.random.default_rng(5)
        rho = {b: rng.uniform(0.0, 0.05, (64, 64)) for b in Band}
        m1, s1 = segment_water(rho, tile_id="t", capture_date=DATE, jobs=1)
        m8, s8 = segment_water(rho, tile_id="t", capture_date=DATE, jobs=8)
        assert np.array_equal(m1.labels, m8.labels)
        assert np.array_equal(s1.xs, s8.xs) and np.array_equal(s1.b2, s8.b2)
        b1, sb1 = segment_burnt(rho, tile_id="t", capture_date=DATE, jobs=1)
        b8, sb8 = segment_burnt(rho, tile_id="t", capture_date=DATE, jobs=8)
        assert np.array_equal(b1.labels, b8.labels)
        assert np.array_equal(sb1.baim, sb8.baim)
