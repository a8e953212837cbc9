"""Exception hierarchy shared across the toolkit."""


class PostScoreError(Exception):
    """Base class for all toolkit errors."""


# --- geometry ---------------------------------------------------------------

class DegenerateBox(PostScoreError):
    """Bounding box has zero area (possibly after margin expansion and clipping)."""


class DegenerateGeometry(PostScoreError):
    """A landmark configuration makes the score undefined (e.g. B == C)."""


class WrongFrame(PostScoreError):
    """Landmarks are expressed in a different coordinate frame than required."""


# --- heatmap codec ----------------------------------------------------------

class OutOfFrame(PostScoreError):
    """A landmark maps outside the heatmap grid; the sample must be dropped or re-drawn."""


class FlatHeatmap(PostScoreError):
    """A heatmap channel is constant, so no peak can be decoded."""


class ShapeMismatch(PostScoreError):
    """Two heatmap stacks (or a stack and its config) disagree on shape."""


# --- metrics ----------------------------------------------------------------

class EmptyGroundTruth(PostScoreError):
    """Detection metrics are undefined without ground-truth boxes."""


class DegenerateNormalizer(PostScoreError):
    """The glanular diameter used to normalize NME is (near) zero."""


class EmptyInput(PostScoreError):
    """An aggregate was requested over an empty collection."""


# --- dataset ----------------------------------------------------------------

class SchemaError(PostScoreError):
    """A manifest record is missing a field or has a wrongly typed value."""


class BoundsError(PostScoreError):
    """A landmark or box lies outside the bounds it must respect."""


class DuplicateId(PostScoreError):
    """Two manifest records share an image_id."""


class LandmarkOutOfFrame(PostScoreError):
    """Augmentation pushed a landmark outside the image; caller should re-draw."""


class TooFewRecords(PostScoreError):
    """Not enough accepted records to build the requested fold plan."""


class InvalidParams(PostScoreError):
    """Synthetic phenotype parameters would produce degenerate ground truth."""


# --- models -----------------------------------------------------------------

class ConfigMismatch(PostScoreError):
    """Input tensor shape is incompatible with the network configuration."""


class DataEmpty(PostScoreError):
    """A training split contains no usable records."""


class NonFiniteLoss(PostScoreError):
    """Training produced a NaN/inf loss; aborted with diagnostics."""


# --- pipeline ---------------------------------------------------------------

class NoDetection(PostScoreError):
    """No bounding box survived confidence filtering."""


class DecodeFailure(PostScoreError):
    """Landmark decoding failed (e.g. a flat predicted heatmap)."""
