"""Exception hierarchy shared by all awcbir modules.

Three families matter to callers: validation problems (bad inputs or
configs), I/O problems (unreadable, unwritable or corrupt storage) and
lookups that found nothing. The CLI maps them to exit codes 2, 3 and 4.
"""


class AwcbirError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AwcbirError):
    """Input, config or domain-contract violation."""


class IoFailureError(AwcbirError):
    """Storage could not be read or written."""


class NotFoundError(AwcbirError):
    """A requested tile, mask or record does not exist."""


# --- tile_io ---------------------------------------------------------------

class FileUnreadableError(IoFailureError):
    """Raster file missing or not parseable at all."""


class WrongPixelFormatError(ValidationError):
    """Raster is not single-channel 16-bit unsigned."""


class DnOutOfRangeError(ValidationError):
    """A digital number exceeds the radiometric maximum."""


class MissingBandError(ValidationError):
    """A bundle is missing one of the four required bands."""


class DimensionMismatchError(ValidationError):
    """Rasters or masks that must share dimensions do not."""


class AlreadyExistsWithDifferentContentError(ValidationError):
    """Same tile id and date already stored with different pixels."""


class ChecksumMismatchError(IoFailureError):
    """A stored chunk failed integrity verification."""


# --- radiometry ------------------------------------------------------------

class QcalOutOfRangeError(ValidationError):
    """DN outside the calibrated [qcal_min, qcal_max] interval."""


class SunBelowHorizonError(ValidationError):
    """Solar geometry puts the sun at or below the horizon."""


class ZenithDegenerateError(ValidationError):
    """cos(solar zenith) too close to zero for reflectance conversion."""


class ConfigError(ValidationError):
    """A calibration or threshold config file is missing or malformed."""


# --- features --------------------------------------------------------------

class BaimSingularityError(ValidationError):
    """Pixel reflectance sits exactly at the BAIM convergence point."""


class MissingBaimError(ValidationError):
    """Burnt classification was asked for a pixel without a BAIM value."""


# --- dss / catalog ---------------------------------------------------------

class WrongMaskKindError(ValidationError):
    """A water operation got a burnt mask or vice versa."""


class DuplicateKeyDifferentContentError(ValidationError):
    """Catalog insert collides with an existing, different record."""


class SfvUnreadableError(IoFailureError):
    """A referenced sparse feature vector file cannot be read."""
