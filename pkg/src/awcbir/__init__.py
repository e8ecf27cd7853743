"""awcbir: storage, segmentation and retrieval of multi-band satellite tiles.

The pipeline runs DN rasters through top-of-atmosphere reflectance
calibration, threshold decision-tree segmentation of water bodies and
burnt areas, sparse per-pixel feature vectors, a chunked compressed tile
store, and a catalog answering filtered and similarity-ranked queries.
"""

from .catalog import (
    Catalog,
    CatalogRecord,
    Query,
    SimilarityWeights,
    rank,
    similarity,
)
from .dss import (
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
    load_threshold_config,
    segment_burnt,
    segment_water,
    alternate_burnt_thresholds,
    water_percentage,
    write_threshold_config,
)
from .errors import (
    AwcbirError,
    IoFailureError,
    NotFoundError,
    ValidationError,
)
from .features import (
    FeatureConfig,
    PixelFeatures,
    SparseFeatureVector,
    baim,
    brightness,
    build_sfv,
    ndvi,
    read_sfv,
    write_sfv,
)
from .radiometry import (
    BandCalibration,
    ReflectanceRaster,
    SolarGeometry,
    calibrate_band,
    calibrate_bundle,
    earth_sun_distance,
    load_calibration_config,
    solar_geometry_for,
    solar_zenith,
    spectral_radiance,
    toa_reflectance,
    write_calibration_config,
)
from .tile_io import (
    BANDS,
    Band,
    BandRaster,
    TileBundle,
    TileMetadata,
    load_band_raster,
    load_tile,
    store_tile,
    write_band_tiff,
)

__version__ = "0.1.0"

__all__ = [
    "AwcbirError",
    "BANDS",
    "BURNT_NONE",
    "BURNT_PROBABLE",
    "BURNT_SURE",
    "Band",
    "BandCalibration",
    "BandRaster",
    "Catalog",
    "CatalogRecord",
    "FeatureConfig",
    "FeatureRange",
    "IoFailureError",
    "MaskKind",
    "NotFoundError",
    "PixelFeatures",
    "Query",
    "ReflectanceRaster",
    "SegmentationMask",
    "SimilarityWeights",
    "SolarGeometry",
    "SparseFeatureVector",
    "ThresholdTable",
    "TileBundle",
    "TileMetadata",
    "ValidationError",
    "WaterClass",
    "baim",
    "brightness",
    "build_sfv",
    "burnt_percentage",
    "calibrate_band",
    "calibrate_bundle",
    "classify_burnt_pixel_probable",
    "classify_burnt_pixel_sure",
    "classify_water_pixel",
    "default_thresholds",
    "earth_sun_distance",
    "load_band_raster",
    "load_calibration_config",
    "load_threshold_config",
    "load_tile",
    "ndvi",
    "rank",
    "read_sfv",
    "segment_burnt",
    "segment_water",
    "similarity",
    "solar_geometry_for",
    "solar_zenith",
    "spectral_radiance",
    "store_tile",
    "alternate_burnt_thresholds",
    "tile_io",
    "toa_reflectance",
    "water_percentage",
    "write_band_tiff",
    "write_calibration_config",
    "write_sfv",
    "write_threshold_config",
]
