"""Coordinate frames, crop transforms, and the POST score.

All coordinates are pixels with the origin at the top-left corner,
x growing rightward and y growing downward.  Sub-pixel positions are
ordinary floats.

The POST score is the mean of the two plate ratios |AB|/|BC| and
|AB'|/|B'C'| computed over the five named landmarks A, B, B', C, C'.
Because it is a ratio of Euclidean distances it is invariant under any
similarity transform of the image plane, which is why crops in this
package are always isotropic (letterboxed) rather than stretched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DegenerateBox, DegenerateGeometry, WrongFrame

# Frame identifiers carried by landmark sets and transforms.
FRAME_ORIGINAL = "original"
FRAME_CROP = "crop"
FRAME_HEATMAP = "heatmap"

LANDMARK_NAMES = ("A", "B", "Bp", "C", "Cp")

#: epsilon below which a plate segment is treated as degenerate (pixels)
DEFAULT_DEGENERACY_EPS = 1e-6

#: default margin added around a detected box before cropping, as a
#: fraction of the box's longer side
DEFAULT_MARGIN_FRAC = 0.10


@dataclass(frozen=True)
class Point2:
    """A 2D point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class LandmarkSet:
    """The five POST landmarks in a stated coordinate frame.

    ``B``/``C`` and ``B_prime``/``C_prime`` are the two plate-edge /
    coronal pairs; ``A`` is the distal midline junction and has no
    mirrored twin.
    """

    A: Point2
    B: Point2
    B_prime: Point2
    C: Point2
    C_prime: Point2
    frame: str = FRAME_ORIGINAL

    def points(self) -> tuple[Point2, Point2, Point2, Point2, Point2]:
        """Points in the fixed channel order A, B, B', C, C'."""
        return (self.A, self.B, self.B_prime, self.C, self.C_prime)

    def swap_sides(self) -> "LandmarkSet":
        """Exchange the primed and unprimed labels (B<->B', C<->C')."""
        return LandmarkSet(
            A=self.A,
            B=self.B_prime,
            B_prime=self.B,
            C=self.C_prime,
            C_prime=self.C,
            frame=self.frame,
        )

    def with_frame(self, frame: str) -> "LandmarkSet":
        return replace(self, frame=frame)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with a detection confidence."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"box must satisfy x_min < x_max and y_min < y_max, got "
                f"({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p: Point2, tol: float = 0.0) -> bool:
        return (
            self.x_min - tol <= p.x <= self.x_max + tol
            and self.y_min - tol <= p.y <= self.y_max + tol
        )


@dataclass(frozen=True)
class FrameTransform:
    """Isotropic scale + offset mapping between two frames.

    Maps a source-frame point ``p`` to ``(p.x * scale + offset_x,
    p.y * scale + offset_y)`` in the target frame.
    """

    scale: float
    offset_x: float
    offset_y: float
    source_frame: str = FRAME_ORIGINAL
    target_frame: str = FRAME_CROP

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


@dataclass(frozen=True)
class PostResult:
    """Per-side plate ratios, their mean (the POST score), and the normalizer."""

    ratio_left: float
    ratio_right: float
    score: float
    glanular_diameter: float

    def to_json_dict(self) -> dict:
        return {
            "ratio_left": self.ratio_left,
            "ratio_right": self.ratio_right,
            "score": self.score,
            "glanular_diameter": self.glanular_diameter,
        }


def identity_transform(source_frame: str = FRAME_ORIGINAL,
                       target_frame: str = FRAME_ORIGINAL) -> FrameTransform:
    return FrameTransform(1.0, 0.0, 0.0, source_frame, target_frame)


def expand_box(box: BoundingBox, margin_frac: float,
               image_size: tuple[float, float] | None = None) -> BoundingBox:
    """Pad a box by ``margin_frac`` of its longer side, clipping to image bounds.

    ``image_size`` is (width, height); pass None to skip clipping.
    Raises DegenerateBox when the clipped result has no area.
    """
    if margin_frac < 0:
        raise ValueError(f"margin_frac must be >= 0, got {margin_frac}")
    m = margin_frac * max(box.width, box.height)
    x0, y0 = box.x_min - m, box.y_min - m
    x1, y1 = box.x_max + m, box.y_max + m
    if image_size is not None:
        w, h = image_size
        x0, y0 = max(x0, 0.0), max(y0, 0.0)
        x1, y1 = min(x1, float(w)), min(y1, float(h))
    if not (x0 < x1 and y0 < y1):
        raise DegenerateBox(
            f"expanded box ({x0}, {y0}, {x1}, {y1}) has zero area after clipping"
        )
    return BoundingBox(x0, y0, x1, y1, box.confidence)


def build_crop_transform(box: BoundingBox, margin_frac: float = DEFAULT_MARGIN_FRAC,
                         crop_size: int = 256,
                         image_size: tuple[float, float] | None = None) -> FrameTransform:
    """Transform from the original frame into a square letterboxed crop.

    The margin-expanded box is scaled by a single isotropic factor so its
    longer side exactly fills ``crop_size``; the shorter side is centered
    with symmetric padding.  Distance ratios are therefore preserved.
    """
    if crop_size <= 0:
        raise ValueError(f"crop_size must be positive, got {crop_size}")
    expanded = expand_box(box, margin_frac, image_size)
    scale = crop_size / max(expanded.width, expanded.height)
    offset_x = (crop_size - expanded.width * scale) / 2.0 - expanded.x_min * scale
    offset_y = (crop_size - expanded.height * scale) / 2.0 - expanded.y_min * scale
    return FrameTransform(scale, offset_x, offset_y, FRAME_ORIGINAL, FRAME_CROP)


def apply_transform(t: FrameTransform, p: Point2) -> Point2:
    return Point2(p.x * t.scale + t.offset_x, p.y * t.scale + t.offset_y)


def invert(t: FrameTransform) -> FrameTransform:
    return FrameTransform(
        scale=1.0 / t.scale,
        offset_x=-t.offset_x / t.scale,
        offset_y=-t.offset_y / t.scale,
        source_frame=t.target_frame,
        target_frame=t.source_frame,
    )


def transform_landmarks(t: FrameTransform, lm: LandmarkSet) -> LandmarkSet:
    """Apply a transform pointwise, updating the frame identifier."""
    if lm.frame != t.source_frame:
        raise WrongFrame(
            f"landmarks are in frame '{lm.frame}' but transform maps from "
            f"'{t.source_frame}'"
        )
    a, b, bp, c, cp = (apply_transform(t, p) for p in lm.points())
    return LandmarkSet(a, b, bp, c, cp, frame=t.target_frame)


def post_score(lm: LandmarkSet, eps: float = DEFAULT_DEGENERACY_EPS) -> PostResult:
    """Compute the POST score from landmarks in the original frame.

    ratio_left  = |A-B|  / |B-C|
    ratio_right = |A-B'| / |B'-C'|
    score       = (ratio_left + ratio_right) / 2

    Raises WrongFrame unless ``lm.frame`` is the original frame (the ratio is
    only meaningful after predicted landmarks are mapped back), and
    DegenerateGeometry when a BC segment is shorter than ``eps`` pixels.
    """
    if lm.frame != FRAME_ORIGINAL:
        raise WrongFrame(f"POST score requires original-frame landmarks, got '{lm.frame}'")
    bc = lm.B.distance_to(lm.C)
    bpcp = lm.B_prime.distance_to(lm.C_prime)
    if bc < eps or bpcp < eps:
        raise DegenerateGeometry(
            f"plate segment too short (|BC|={bc:.3g}, |B'C'|={bpcp:.3g}, eps={eps:.3g})"
        )
    ratio_left = lm.A.distance_to(lm.B) / bc
    ratio_right = lm.A.distance_to(lm.B_prime) / bpcp
    return PostResult(
        ratio_left=ratio_left,
        ratio_right=ratio_right,
        score=(ratio_left + ratio_right) / 2.0,
        glanular_diameter=lm.C.distance_to(lm.C_prime),
    )
