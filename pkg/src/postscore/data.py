"""Annotation schema, dataset manifest, augmentation, and fold planning.

The manifest is JSON lines, one record per line::

    {"image_id": str, "path": str, "width": int, "height": int,
     "bbox": {"x_min": f, "y_min": f, "x_max": f, "y_max": f},
     "landmarks": {"A": [x, y], "B": [x, y], "Bp": [x, y],
                   "C": [x, y], "Cp": [x, y]},
     "qc": {"status": "accepted" | "rejected", "reason": str | null},
     "source": "clinical" | "synthetic"}

Coordinates are original-frame pixels (origin top-left, floats).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import imaging
from .errors import (
    BoundsError,
    DuplicateId,
    LandmarkOutOfFrame,
    SchemaError,
    TooFewRecords,
)
from .geometry import (
    FRAME_ORIGINAL,
    BoundingBox,
    LandmarkSet,
    Point2,
)

QC_ACCEPTED = "accepted"
QC_REJECTED = "rejected"
SOURCES = ("clinical", "synthetic")

LANDMARK_KEYS = ("A", "B", "Bp", "C", "Cp")

MAX_ROTATE_DEG = 30.0
SCALE_RANGE = (0.75, 1.25)
DEFAULT_TRANSLATE_FRAC = 0.10


@dataclass
class ImageRecord:
    """One annotated image: landmarks, ground-truth box, and QC status."""

    image_id: str
    path: str
    width: int
    height: int
    landmarks: LandmarkSet
    gt_box: BoundingBox
    qc_status: str = QC_ACCEPTED
    qc_reason: str | None = None
    source: str = "synthetic"
    image: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def accepted(self) -> bool:
        return self.qc_status == QC_ACCEPTED

    def load_image(self) -> np.ndarray:
        if self.image is not None:
            return self.image
        if not self.path:
            raise FileNotFoundError(f"record {self.image_id} has no image path or data")
        return imaging.load_image(self.path)

    def to_json_dict(self) -> dict:
        pts = dict(zip(LANDMARK_KEYS, self.landmarks.points()))
        return {
            "image_id": self.image_id,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "bbox": {
                "x_min": self.gt_box.x_min,
                "y_min": self.gt_box.y_min,
                "x_max": self.gt_box.x_max,
                "y_max": self.gt_box.y_max,
            },
            "landmarks": {k: [p.x, p.y] for k, p in pts.items()},
            "qc": {"status": self.qc_status, "reason": self.qc_reason},
            "source": self.source,
        }


def _require(mapping: dict, key: str, kind, where: str):
    if key not in mapping:
        raise SchemaError(f"{where}: missing field '{key}'")
    value = mapping[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where}: field '{key}' must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaError(f"{where}: field '{key}' must be {kind.__name__}, got {value!r}")
    return value


def record_from_json_dict(obj: dict, where: str = "record") -> ImageRecord:
    """Parse and fully validate one manifest record."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: record must be a JSON object")
    image_id = _require(obj, "image_id", str, where)
    where = f"record '{image_id}'"
    path = _require(obj, "path", str, where)
    width = _require(obj, "width", int, where)
    height = _require(obj, "height", int, where)
    if width <= 0 or height <= 0:
        raise SchemaError(f"{where}: image dimensions must be positive")

    bbox = _require(obj, "bbox", dict, where)
    try:
        box = BoundingBox(
            _require(bbox, "x_min", float, where),
            _require(bbox, "y_min", float, where),
            _require(bbox, "x_max", float, where),
            _require(bbox, "y_max", float, where),
            confidence=1.0,
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: invalid bbox ({exc})") from exc

    lm_obj = _require(obj, "landmarks", dict, where)
    pts = {}
    for key in LANDMARK_KEYS:
        if key not in lm_obj:
            raise SchemaError(f"{where}: missing landmark '{key}'")
        pair = lm_obj[key]
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pair)):
            raise SchemaError(f"{where}: landmark '{key}' must be [x, y] numbers")
        if not all(math.isfinite(float(v)) for v in pair):
            raise SchemaError(f"{where}: landmark '{key}' must be finite")
        pts[key] = Point2(float(pair[0]), float(pair[1]))
    landmarks = LandmarkSet(pts["A"], pts["B"], pts["Bp"], pts["C"], pts["Cp"],
                            frame=FRAME_ORIGINAL)

    qc = _require(obj, "qc", dict, where)
    status = _require(qc, "status", str, where)
    if status not in (QC_ACCEPTED, QC_REJECTED):
        raise SchemaError(f"{where}: qc.status must be accepted|rejected, got {status!r}")
    reason = qc.get("reason")
    if reason is not None and not isinstance(reason, str):
        raise SchemaError(f"{where}: qc.reason must be a string or null")
    source = _require(obj, "source", str, where)
    if source not in SOURCES:
        raise SchemaError(f"{where}: source must be one of {SOURCES}, got {source!r}")

    record = ImageRecord(image_id, path, width, height, landmarks, box,
                         qc_status=status, qc_reason=reason, source=source)
    validate_record_bounds(record)
    return record


def validate_record_bounds(record: ImageRecord) -> None:
    """Landmarks must lie inside the image and inside the ground-truth box."""
    w, h = record.width, record.height
    for key, p in zip(LANDMARK_KEYS, record.landmarks.points()):
        if not (0.0 <= p.x < w and 0.0 <= p.y < h):
            raise BoundsError(
                f"record '{record.image_id}': landmark {key} at ({p.x}, {p.y}) "
                f"outside image {w}x{h}"
            )
        if not record.gt_box.contains(p, tol=1e-6):
            raise BoundsError(
                f"record '{record.image_id}': landmark {key} at ({p.x}, {p.y}) "
                f"outside its ground-truth box"
            )


def load_manifest(path: str) -> list[ImageRecord]:
    """Read and validate a JSONL manifest; relative image paths are resolved
    against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON ({exc})") from exc
            record = record_from_json_dict(obj, where=f"line {lineno}")
            if record.image_id in seen:
                raise DuplicateId(f"duplicate image_id '{record.image_id}' at line {lineno}")
            seen.add(record.image_id)
            if record.path and not os.path.isabs(record.path):
                record.path = os.path.join(base, record.path)
            records.append(record)
    return records


def save_manifest(records: list[ImageRecord], path: str) -> None:
    """Write records as JSONL with image paths relative to the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            obj = record.to_json_dict()
            if obj["path"] and os.path.isabs(obj["path"]):
                obj["path"] = os.path.relpath(obj["path"], base)
            fh.write(json.dumps(obj) + "\n")


# --- augmentation -----------------------------------------------------------

@dataclass(frozen=True)
class AugmentSpec:
    """Concrete sampled augmentation parameters.

    ``translate_x``/``translate_y`` are fractions of the image size; the
    rotation and scale ranges mirror the training recipe (+-30 degrees,
    0.75-1.25x).  A horizontal flip swaps the B/B' and C/C' labels so the
    left/right semantics stay consistent.
    """

    translate_x: float = 0.0
    translate_y: float = 0.0
    rotate_deg: float = 0.0
    scale: float = 1.0
    hflip: bool = False
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if abs(self.rotate_deg) > MAX_ROTATE_DEG + 1e-9:
            raise ValueError(f"|rotate_deg| must be <= {MAX_ROTATE_DEG}, got {self.rotate_deg}")
        if not (SCALE_RANGE[0] - 1e-9 <= self.scale <= SCALE_RANGE[1] + 1e-9):
            raise ValueError(f"scale must be in {SCALE_RANGE}, got {self.scale}")

    @classmethod
    def identity(cls) -> "AugmentSpec":
        return cls()

    @classmethod
    def sample(cls, rng: np.random.Generator,
               translate_frac: float = DEFAULT_TRANSLATE_FRAC,
               hflip_prob: float = 0.5) -> "AugmentSpec":
        return cls(
            translate_x=float(rng.uniform(-translate_frac, translate_frac)),
            translate_y=float(rng.uniform(-translate_frac, translate_frac)),
            rotate_deg=float(rng.uniform(-MAX_ROTATE_DEG, MAX_ROTATE_DEG)),
            scale=float(rng.uniform(*SCALE_RANGE)),
            hflip=bool(rng.random() < hflip_prob),
        )


def augment_matrix(spec: AugmentSpec, width: int, height: int) -> np.ndarray:
    """Forward 2x3 affine for a spec: scale then rotate about the image
    center, then translate, then (optionally) horizontal flip."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    th = math.radians(spec.rotate_deg)
    s = spec.scale
    cos_t, sin_t = math.cos(th), math.sin(th)
    rs = np.array([[s * cos_t, -s * sin_t],
                   [s * sin_t, s * cos_t]])
    tx = spec.translate_x * width
    ty = spec.translate_y * height
    shift = np.array([cx + tx, cy + ty]) - rs @ np.array([cx, cy])
    m = np.hstack([rs, shift[:, None]])
    if spec.hflip:
        flip = np.array([[-1.0, 0.0, width - 1.0],
                         [0.0, 1.0, 0.0]])
        m = np.hstack([flip[:, :2] @ m[:, :2],
                       (flip[:, :2] @ m[:, 2] + flip[:, 2])[:, None]])
    return m


def _apply_matrix(m: np.ndarray, p: Point2) -> Point2:
    v = m @ np.array([p.x, p.y, 1.0])
    return Point2(float(v[0]), float(v[1]))


def augment(record: ImageRecord, spec: AugmentSpec) -> ImageRecord:
    """Warp the image and co-transform its annotation.

    Raises LandmarkOutOfFrame when any transformed landmark leaves the
    image; callers re-draw the spec rather than clamping (clamping would
    corrupt the ratio ground truth).
    """
    w, h = record.width, record.height
    m = augment_matrix(spec, w, h)

    pts = [_apply_matrix(m, p) for p in record.landmarks.points()]
    lm = LandmarkSet(*pts, frame=FRAME_ORIGINAL)
    if spec.hflip:
        lm = lm.swap_sides()
    for key, p in zip(LANDMARK_KEYS, lm.points()):
        if not (0.0 <= p.x < w and 0.0 <= p.y < h):
            raise LandmarkOutOfFrame(
                f"record '{record.image_id}': augmented landmark {key} at "
                f"({p.x:.2f}, {p.y:.2f}) outside image {w}x{h}"
            )

    box = record.gt_box
    corners = [Point2(box.x_min, box.y_min), Point2(box.x_max, box.y_min),
               Point2(box.x_min, box.y_max), Point2(box.x_max, box.y_max)]
    moved = [_apply_matrix(m, c) for c in corners]
    new_box = BoundingBox(
        x_min=max(0.0, min(c.x for c in moved)),
        y_min=max(0.0, min(c.y for c in moved)),
        x_max=min(float(w), max(c.x for c in moved)),
        y_max=min(float(h), max(c.y for c in moved)),
        confidence=1.0,
    )

    image = imaging.warp_affine(record.load_image(), m, (w, h))
    return replace(record, landmarks=lm, gt_box=new_box, image=image, path="")


def draw_augmented(record: ImageRecord, rng: np.random.Generator,
                   translate_frac: float = DEFAULT_TRANSLATE_FRAC,
                   max_attempts: int = 10) -> ImageRecord:
    """Sample augmentations until the landmarks stay in frame.

    Falls back to the unaugmented record after ``max_attempts`` rejections.
    """
    for _ in range(max_attempts):
        spec = AugmentSpec.sample(rng, translate_frac=translate_frac)
        try:
            return augment(record, spec)
        except LandmarkOutOfFrame:
            continue
    return record


# --- fold planning ----------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Deterministic k-fold partition with a per-fold validation subset."""

    k: int
    seed: int
    val_frac: float
    assignments: dict[str, int]
    validation: dict[int, tuple[str, ...]]

    def test_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignments.items() if f == fold]

    def val_ids(self, fold: int) -> list[str]:
        return list(self.validation[fold])

    def train_ids(self, fold: int) -> list[str]:
        val = set(self.validation[fold])
        return [i for i, f in self.assignments.items() if f != fold and i not in val]

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "val_frac": self.val_frac,
            "assignments": dict(self.assignments),
            "validation": {str(f): list(ids) for f, ids in self.validation.items()},
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FoldPlan":
        return cls(
            k=int(obj["k"]),
            seed=int(obj["seed"]),
            val_frac=float(obj["val_frac"]),
            assignments={str(k): int(v) for k, v in obj["assignments"].items()},
            validation={int(f): tuple(ids) for f, ids in obj["validation"].items()},
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "FoldPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def plan_folds(records: list[ImageRecord], k: int = 5,
               val_frac: float = 0.2, seed: int = 0) -> FoldPlan:
    """Shuffle accepted records into k folds of near-equal size.

    Rejected records never enter the plan.  Ids are sorted before
    shuffling so the plan only depends on the id set and the seed, not on
    the incoming record order.  Each fold's validation subset is drawn
    from its training portion only.
    """
    ids = sorted(r.image_id for r in records if r.accepted)
    if len(ids) < k:
        raise TooFewRecords(f"need at least {k} accepted records, got {len(ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    assignments: dict[str, int] = {}
    for fold, chunk in enumerate(np.array_split(np.array(shuffled, dtype=object), k)):
        for image_id in chunk:
            assignments[str(image_id)] = fold

    validation: dict[int, tuple[str, ...]] = {}
    for fold in range(k):
        train_pool = [i for i in shuffled if assignments[i] != fold]
        n_val = int(round(val_frac * len(train_pool)))
        n_val = max(1, min(n_val, len(train_pool) - 1))
        fold_rng = np.random.default_rng([seed, fold])
        order = fold_rng.permutation(len(train_pool))
        validation[fold] = tuple(train_pool[j] for j in order[:n_val])

    return FoldPlan(k=k, seed=seed, val_frac=val_frac,
                    assignments=assignments, validation=validation)
