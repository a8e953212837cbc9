"""Gaussian heatmap encoding/decoding and the regression loss.

Landmarks living in the crop frame are encoded as one unnormalized 2D
Gaussian per channel (amplitude 1, not a probability density) on a
``heatmap_size`` grid at ``stride = input_size / heatmap_size``.  Decoding
recovers sub-pixel coordinates via argmax plus a quarter-cell shift toward
the larger axial neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FlatHeatmap, OutOfFrame, ShapeMismatch
from .geometry import FRAME_CROP, LandmarkSet, Point2

CHANNEL_NAMES = ("A", "B", "Bp", "C", "Cp")
NUM_CHANNELS = len(CHANNEL_NAMES)


@dataclass(frozen=True)
class CodecConfig:
    """Geometry of the heatmap grid relative to the crop."""

    sigma_x: float = 1.5
    sigma_y: float = 1.5
    heatmap_size: int = 64
    input_size: int = 256

    def __post_init__(self) -> None:
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("sigma must be positive")
        if self.heatmap_size <= 0 or self.input_size <= 0:
            raise ValueError("sizes must be positive")
        if self.input_size % self.heatmap_size != 0:
            raise ValueError(
                f"input_size {self.input_size} must be divisible by "
                f"heatmap_size {self.heatmap_size}"
            )

    @property
    def stride(self) -> int:
        return self.input_size // self.heatmap_size


@dataclass(frozen=True)
class HeatmapStack:
    """Five-channel activation grid, channel order A, B, B', C, C'."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 3 or v.shape[0] != NUM_CHANNELS:
            raise ShapeMismatch(f"expected ({NUM_CHANNELS}, H, W) stack, got {v.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def encode(lm: LandmarkSet, cfg: CodecConfig = CodecConfig()) -> HeatmapStack:
    """Render crop-frame landmarks as Gaussian target heatmaps.

    Each channel samples exp(-((x-xk)^2/(2 sx^2) + (y-yk)^2/(2 sy^2))) at
    integer grid cells, where (xk, yk) is the landmark divided by the
    stride, then rescales so the cell nearest the landmark is exactly 1.

    Raises OutOfFrame when any landmark maps outside [0, heatmap_size);
    the sample must be dropped or re-augmented, never clamped.
    """
    if lm.frame != FRAME_CROP:
        raise OutOfFrame(f"encode expects crop-frame landmarks, got '{lm.frame}'")
    size = cfg.heatmap_size
    stride = cfg.stride
    xs = np.arange(size, dtype=np.float64)
    ys = np.arange(size, dtype=np.float64)
    stack = np.empty((NUM_CHANNELS, size, size), dtype=np.float32)
    for k, p in enumerate(lm.points()):
        cx = p.x / stride
        cy = p.y / stride
        if not (0.0 <= cx < size and 0.0 <= cy < size):
            raise OutOfFrame(
                f"landmark {CHANNEL_NAMES[k]} at crop ({p.x}, {p.y}) maps to "
                f"cell ({cx:.2f}, {cy:.2f}) outside [0, {size})"
            )
        gx = np.exp(-((xs - cx) ** 2) / (2.0 * cfg.sigma_x**2))
        gy = np.exp(-((ys - cy) ** 2) / (2.0 * cfg.sigma_y**2))
        g = np.outer(gy, gx)
        stack[k] = (g / g.max()).astype(np.float32)
    return HeatmapStack(stack)


def _refine_axis(channel: np.ndarray, row: int, col: int, axis: int) -> float:
    """Quarter-cell shift along one axis toward the strictly larger neighbor."""
    idx = row if axis == 0 else col
    n = channel.shape[axis]
    if idx == 0 or idx == n - 1:
        return float(idx)
    if axis == 0:
        lo, hi = channel[idx - 1, col], channel[idx + 1, col]
    else:
        lo, hi = channel[row, idx - 1], channel[row, idx + 1]
    if hi > lo:
        return idx + 0.25
    if lo > hi:
        return idx - 0.25
    return float(idx)


def decode(hm: HeatmapStack, cfg: CodecConfig = CodecConfig()
           ) -> tuple[LandmarkSet, tuple[float, ...]]:
    """Recover crop-frame landmarks and per-landmark peak confidences.

    Per channel: the argmax cell (ties broken by lowest row-major index,
    which is numpy's native argmax order) is refined by a quarter-cell
    shift toward the strictly larger of the two axial neighbors, then
    scaled by the stride back to crop pixels.

    Raises FlatHeatmap when a channel is constant.
    """
    if hm.height != cfg.heatmap_size or hm.width != cfg.heatmap_size:
        raise ShapeMismatch(
            f"stack is {hm.height}x{hm.width} but config expects "
            f"{cfg.heatmap_size}x{cfg.heatmap_size}"
        )
    stride = cfg.stride
    points = []
    confidences = []
    for k in range(NUM_CHANNELS):
        channel = hm.values[k]
        peak = float(channel.max())
        if peak == float(channel.min()):
            raise FlatHeatmap(f"channel {CHANNEL_NAMES[k]} is constant at {peak}")
        flat_idx = int(np.argmax(channel))
        row, col = divmod(flat_idx, channel.shape[1])
        ry = _refine_axis(channel, row, col, axis=0)
        rx = _refine_axis(channel, row, col, axis=1)
        points.append(Point2(rx * stride, ry * stride))
        confidences.append(peak)
    lm = LandmarkSet(*points, frame=FRAME_CROP)
    return lm, tuple(confidences)


def mse_loss(pred: HeatmapStack, target: HeatmapStack) -> float:
    """Mean over all channels and cells of the squared difference."""
    if pred.values.shape != target.values.shape:
        raise ShapeMismatch(
            f"shape mismatch: {pred.values.shape} vs {target.values.shape}"
        )
    diff = pred.values.astype(np.float64) - target.values.astype(np.float64)
    return float(np.mean(diff * diff))
