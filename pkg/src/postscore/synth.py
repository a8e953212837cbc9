"""Parametric synthetic phenotype generator with exact landmark ground truth.

Each sample renders a smooth convex glans-like ellipse on a textured
background, with a mucosal plate strip whose apex is A and whose edge
kinks are B/B', and a coronal band whose endpoints are C/C'.  Because the
landmarks come from the same parameters as the rendering, the annotation
is exact by construction, which is what makes desk-scale training and
verification possible without clinical data.

Local glans coordinates: +ly points toward the distal tip, +lx laterally;
the world pose applies the orientation and center from the params.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .data import ImageRecord
from .errors import InvalidParams
from .geometry import FRAME_ORIGINAL, BoundingBox, LandmarkSet, Point2

# C/C' sit slightly inside the ellipse rim so they land in the rasterized mask.
RIM_INSET = 0.97

_SKIN_LIGHT = np.array([0.93, 0.77, 0.69])
_SKIN_DARK = np.array([0.48, 0.32, 0.24])
_PLATE_TINT = np.array([0.92, 0.55, 0.55])
_CORONA_TINT = np.array([0.72, 0.45, 0.45])
_MEATUS_TINT = np.array([0.55, 0.25, 0.28])

_BACKGROUNDS = np.array([
    [0.36, 0.48, 0.58],   # blue drape
    [0.42, 0.55, 0.44],   # green drape
    [0.56, 0.54, 0.52],   # grey cloth
    [0.62, 0.57, 0.48],   # beige
])

_CANVAS_CHOICES = ((512, 384), (448, 448), (384, 512), (560, 420), (480, 360))


@dataclass(frozen=True)
class SynthParams:
    """Pose, shape, plate, and appearance parameters for one sample."""

    canvas_w: int = 448
    canvas_h: int = 448
    center_x: float = 224.0
    center_y: float = 224.0
    axis_a: float = 80.0           # lateral semi-axis, px
    axis_b: float = 110.0          # axial semi-axis, px
    orientation_deg: float = 0.0   # 0 = distal tip pointing up
    plate_halfwidth_frac: float = 0.22   # knob half-width / axis_a
    plate_base_frac: float = 0.6         # base half-width / knob half-width
    knob_level_frac: float = 0.25        # B level along +ly, / axis_b
    meatal_frac: float = 0.62            # A level along +ly, / axis_b
    corona_angle_deg: float = 50.0       # C/C' angle from the proximal pole
    skin_tone: float = 0.35
    background_id: int = 0
    illumination_gain: float = 1.0
    rng_seed: int = 0

    @classmethod
    def random(cls, seed: int, canvas: tuple[int, int] | None = None) -> "SynthParams":
        rng = np.random.default_rng(seed)
        if canvas is None:
            canvas = _CANVAS_CHOICES[int(rng.integers(len(_CANVAS_CHOICES)))]
        w, h = canvas
        min_dim = min(w, h)
        axis_a = float(rng.uniform(0.14, 0.22) * min_dim)
        axis_b = axis_a * float(rng.uniform(1.15, 1.5))
        theta = float(rng.uniform(-40.0, 40.0))
        hx, hy = _box_half_extents(axis_a, axis_b, theta)
        mx, my = hx + 6.0, hy + 6.0
        if 2 * mx >= w or 2 * my >= h:
            raise InvalidParams(f"glans does not fit canvas {w}x{h}")
        knob = float(rng.uniform(0.08, 0.35))
        return cls(
            canvas_w=w,
            canvas_h=h,
            center_x=float(rng.uniform(mx, w - mx)),
            center_y=float(rng.uniform(my, h - my)),
            axis_a=axis_a,
            axis_b=axis_b,
            orientation_deg=theta,
            plate_halfwidth_frac=float(rng.uniform(0.15, 0.30)),
            plate_base_frac=float(rng.uniform(0.45, 0.75)),
            knob_level_frac=knob,
            meatal_frac=float(min(0.88, knob + rng.uniform(0.22, 0.45))),
            corona_angle_deg=float(rng.uniform(38.0, 62.0)),
            skin_tone=float(rng.uniform(0.0, 1.0)),
            background_id=int(rng.integers(len(_BACKGROUNDS))),
            illumination_gain=float(rng.uniform(0.85, 1.15)),
            rng_seed=seed,
        )


def _box_half_extents(a: float, b: float, theta_deg: float) -> tuple[float, float]:
    th = math.radians(theta_deg)
    hx = math.hypot(a * math.cos(th), b * math.sin(th))
    hy = math.hypot(a * math.sin(th), b * math.cos(th))
    return hx, hy


def _axes(params: SynthParams) -> tuple[np.ndarray, np.ndarray]:
    """World-frame lateral and distal unit vectors."""
    th = math.radians(params.orientation_deg)
    lateral = np.array([math.cos(th), math.sin(th)])
    distal = np.array([math.sin(th), -math.cos(th)])  # y grows downward
    return lateral, distal


def _local_landmarks(params: SynthParams) -> dict[str, tuple[float, float]]:
    a, b = params.axis_a, params.axis_b
    phi = math.radians(params.corona_angle_deg)
    pw = params.plate_halfwidth_frac * a
    return {
        "A": (0.0, params.meatal_frac * b),
        "B": (-pw, params.knob_level_frac * b),
        "Bp": (pw, params.knob_level_frac * b),
        "C": (-RIM_INSET * a * math.sin(phi), -RIM_INSET * b * math.cos(phi)),
        "Cp": (RIM_INSET * a * math.sin(phi), -RIM_INSET * b * math.cos(phi)),
    }


def validate_params(params: SynthParams) -> None:
    if params.axis_a <= 0 or params.axis_b <= 0:
        raise InvalidParams("ellipse axes must be positive")
    if params.canvas_w <= 0 or params.canvas_h <= 0:
        raise InvalidParams("canvas must be positive")
    if params.corona_angle_deg < 5.0:
        raise InvalidParams("corona angle too small: C and C' would coincide")
    if not (0.0 < params.knob_level_frac < params.meatal_frac < 1.0):
        raise InvalidParams("need 0 < knob level < meatal level < 1 along the distal axis")
    if not (0.0 < params.plate_halfwidth_frac < 0.9):
        raise InvalidParams("plate halfwidth fraction out of range")
    for name, (lx, ly) in _local_landmarks(params).items():
        if (lx / params.axis_a) ** 2 + (ly / params.axis_b) ** 2 >= 1.0:
            raise InvalidParams(f"landmark {name} falls outside the glans ellipse")
    hx, hy = _box_half_extents(params.axis_a, params.axis_b, params.orientation_deg)
    if (params.center_x - hx < 1.0 or params.center_y - hy < 1.0
            or params.center_x + hx > params.canvas_w - 1.0
            or params.center_y + hy > params.canvas_h - 1.0):
        raise InvalidParams("glans bounding box leaves the canvas")


def landmarks_from_params(params: SynthParams) -> LandmarkSet:
    """Exact world-frame landmark positions implied by the parameters."""
    lateral, distal = _axes(params)
    center = np.array([params.center_x, params.center_y])
    local = _local_landmarks(params)
    world = {
        k: center + lx * lateral + ly * distal
        for k, (lx, ly) in local.items()
    }
    return LandmarkSet(
        A=Point2(*world["A"]), B=Point2(*world["B"]), B_prime=Point2(*world["Bp"]),
        C=Point2(*world["C"]), C_prime=Point2(*world["Cp"]),
        frame=FRAME_ORIGINAL,
    )


def bounding_box_from_params(params: SynthParams) -> BoundingBox:
    """Tight axis-aligned box of the rotated glans ellipse, clipped to canvas."""
    hx, hy = _box_half_extents(params.axis_a, params.axis_b, params.orientation_deg)
    return BoundingBox(
        x_min=max(0.0, params.center_x - hx),
        y_min=max(0.0, params.center_y - hy),
        x_max=min(float(params.canvas_w), params.center_x + hx),
        y_max=min(float(params.canvas_h), params.center_y + hy),
        confidence=1.0,
    )


def _smooth_noise(rng: np.random.Generator, h: int, w: int,
                  cells: int, amplitude: float) -> np.ndarray:
    coarse = rng.normal(0.0, 1.0, size=(cells, cells))
    yy = np.linspace(0, cells - 1, h)
    xx = np.linspace(0, cells - 1, w)
    grid = np.meshgrid(yy, xx, indexing="ij")
    return amplitude * ndimage.map_coordinates(coarse, grid, order=1, mode="nearest")


def _convex_mask(lx: np.ndarray, ly: np.ndarray,
                 vertices: list[tuple[float, float]]) -> np.ndarray:
    """Membership in a convex polygon given CCW-or-CW consistent vertices."""
    inside = np.ones_like(lx, dtype=bool)
    n = len(vertices)
    # orientation sign from the polygon itself
    area2 = sum(
        vertices[i][0] * vertices[(i + 1) % n][1] - vertices[(i + 1) % n][0] * vertices[i][1]
        for i in range(n)
    )
    sign = 1.0 if area2 >= 0 else -1.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        cross = (x1 - x0) * (ly - y0) - (y1 - y0) * (lx - x0)
        inside &= sign * cross >= 0
    return inside


def render(params: SynthParams) -> tuple[np.ndarray, np.ndarray]:
    """Render the sample; returns (RGB uint8 image, boolean glans mask)."""
    validate_params(params)
    w, h = params.canvas_w, params.canvas_h
    a, b = params.axis_a, params.axis_b
    rng = np.random.default_rng(params.rng_seed)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - params.center_x
    dy = yy - params.center_y
    lateral, distal = _axes(params)
    lx = dx * lateral[0] + dy * lateral[1]
    ly = dx * distal[0] + dy * distal[1]

    r = np.sqrt((lx / a) ** 2 + (ly / b) ** 2)
    mask = r <= 1.0

    # background: flat drape color + two scales of smooth noise
    bg = _BACKGROUNDS[params.background_id % len(_BACKGROUNDS)]
    img = np.empty((h, w, 3), dtype=np.float64)
    tex = (_smooth_noise(rng, h, w, 9, 0.05) + _smooth_noise(rng, h, w, 31, 0.02))
    img[:] = bg[None, None, :] + tex[:, :, None]

    skin = _SKIN_LIGHT + (_SKIN_DARK - _SKIN_LIGHT) * params.skin_tone

    # shaft behind the glans, extending proximally
    edge = 1.5 / min(a, b)  # ~1.5 px anti-aliasing in ellipse-radial units
    shaft_half = 0.52 * a
    shaft_alpha = (
        np.clip((shaft_half - np.abs(lx)) / 3.0, 0.0, 1.0)
        * np.clip((-ly / b - 0.25) / 0.08, 0.0, 1.0)
        * np.clip((2.3 - (-ly / b)) / 0.15, 0.0, 1.0)
    )
    shaft_color = skin * 0.88
    img = img * (1 - shaft_alpha[:, :, None]) + shaft_color[None, None, :] * shaft_alpha[:, :, None]

    # glans body with radial shading and a lateral light gradient
    shade = 1.0 - 0.28 * r**2 + 0.07 * (lx / a)
    glans_rgb = skin[None, None, :] * shade[:, :, None]
    glans_alpha = np.clip((1.0 - r) / edge, 0.0, 1.0)
    img = img * (1 - glans_alpha[:, :, None]) + glans_rgb * glans_alpha[:, :, None]

    # coronal band: rim arc between C and C' around the proximal pole
    phi = math.radians(params.corona_angle_deg)
    psi = np.arctan2(lx / a, -(ly / b))  # 0 at proximal pole
    corona = ((r >= 0.90) & (r <= 1.0) & (np.abs(psi) <= phi)).astype(np.float64)
    corona = ndimage.gaussian_filter(corona, 1.0)
    img = img * (1 - 0.6 * corona[:, :, None]) + (skin * _CORONA_TINT)[None, None, :] * 0.6 * corona[:, :, None]

    # plate: apex at A, edge kinks at B/B', base at the corona level
    local = _local_landmarks(params)
    ax_, ay_ = local["A"]
    bx_, by_ = local["B"]
    base_y = local["C"][1]
    base_hw = params.plate_base_frac * abs(bx_)
    tri = _convex_mask(lx, ly, [(ax_, ay_), (bx_, by_), (-bx_, by_)])
    trap = _convex_mask(lx, ly, [(bx_, by_), (-bx_, by_), (base_hw, base_y), (-base_hw, base_y)])
    plate = np.where(tri | trap, 1.0, 0.0)
    plate = ndimage.gaussian_filter(plate, 0.8) * glans_alpha
    plate_rgb = skin * _PLATE_TINT
    img = img * (1 - 0.75 * plate[:, :, None]) + plate_rgb[None, None, :] * 0.75 * plate[:, :, None]

    # meatus: small dark spot at A
    d_a = np.hypot(lx - ax_, ly - ay_)
    meatus = np.clip((0.055 * a - d_a) / 1.5, 0.0, 1.0)
    img = img * (1 - 0.8 * meatus[:, :, None]) + (skin * _MEATUS_TINT)[None, None, :] * 0.8 * meatus[:, :, None]

    # knob highlights at B/B'
    for sx in (-1, 1):
        d_k = np.hypot(lx - sx * abs(bx_), ly - by_)
        knob = np.clip((0.05 * a - d_k) / 1.5, 0.0, 1.0) * 0.35
        img = img * (1 - knob[:, :, None]) + (skin * 1.12)[None, None, :] * knob[:, :, None]

    img *= params.illumination_gain
    img += rng.normal(0.0, 0.008, size=(h, w, 1))
    img = np.clip(img, 0.0, 1.0)
    return (np.rint(img * 255).astype(np.uint8), mask)


def synth_generate(params: SynthParams, image_id: str | None = None) -> ImageRecord:
    """Render one sample and package it with exact annotations.

    The returned record holds the image in memory (empty path); callers
    that want files on disk save the image and set the path themselves
    (see ``generate_dataset``).
    """
    image, _ = render(params)
    record = ImageRecord(
        image_id=image_id or f"synth-{params.rng_seed:08d}",
        path="",
        width=params.canvas_w,
        height=params.canvas_h,
        landmarks=landmarks_from_params(params),
        gt_box=bounding_box_from_params(params),
        qc_status="accepted",
        qc_reason=None,
        source="synthetic",
        image=image,
    )
    from .data import validate_record_bounds

    validate_record_bounds(record)
    return record


def generate_dataset(count: int, seed: int, out_dir: str) -> tuple[list[ImageRecord], str]:
    """Write ``count`` synthetic samples plus a JSONL manifest under ``out_dir``.

    Per-sample parameters derive deterministically from (seed, index), so
    the same call always reproduces the same bytes.
    """
    import os

    from . import imaging
    from .data import save_manifest

    images_dir = os.path.join(out_dir, "images")
    os.makedirs(images_dir, exist_ok=True)
    records = []
    for i in range(count):
        sample_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        params = SynthParams.random(sample_seed)
        record = synth_generate(params, image_id=f"synth-{seed}-{i:05d}")
        filename = f"{record.image_id}.png"
        imaging.save_image(os.path.join(images_dir, filename), record.image)
        record.path = os.path.join(images_dir, filename)
        records.append(record)
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    save_manifest(records, manifest_path)
    return records, manifest_path
