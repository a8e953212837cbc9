"""Image IO and affine warping helpers.

Coordinates follow the package convention: (x, y) floats where integer
coordinates land on pixel sample centers, so array element [y, x] holds
the sample at coordinate (x, y).
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import FrameTransform


def load_image(path: str) -> np.ndarray:
    """Read an 8-bit image as an RGB (H, W, 3) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path: str, array: np.ndarray) -> None:
    if array.dtype != np.uint8 or array.ndim != 3 or array.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8 array, got {array.dtype} {array.shape}")
    Image.fromarray(array, mode="RGB").save(path)


def warp_affine(image: np.ndarray, matrix: np.ndarray,
                out_size: tuple[int, int], cval: float = 0.0) -> np.ndarray:
    """Warp an image under a forward 2x3 affine in (x, y) convention.

    ``matrix`` maps input coordinates to output coordinates:
    ``[x_out, y_out] = matrix @ [x_in, y_in, 1]``.  ``out_size`` is
    (width, height).  Bilinear interpolation; out-of-source pixels get
    ``cval``.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (2, 3):
        raise ValueError(f"expected 2x3 affine matrix, got {matrix.shape}")
    full = np.vstack([matrix, [0.0, 0.0, 1.0]])
    inv = np.linalg.inv(full)
    # scipy indexes (row, col) = (y, x): input[M_rc @ o + off] for output o.
    m_rc = np.array([[inv[1, 1], inv[1, 0]],
                     [inv[0, 1], inv[0, 0]]])
    off_rc = np.array([inv[1, 2], inv[0, 2]])
    out_w, out_h = out_size

    src = image.astype(np.float32)
    if src.ndim == 2:
        src = src[:, :, None]
    channels = [
        ndimage.affine_transform(
            src[:, :, c], m_rc, offset=off_rc, output_shape=(out_h, out_w),
            order=1, mode="constant", cval=cval,
        )
        for c in range(src.shape[2])
    ]
    out = np.stack(channels, axis=-1)
    if image.ndim == 2:
        out = out[:, :, 0]
    if image.dtype == np.uint8:
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out


def transform_matrix(t: FrameTransform) -> np.ndarray:
    """The 2x3 forward matrix of an isotropic scale+offset transform."""
    return np.array([[t.scale, 0.0, t.offset_x],
                     [0.0, t.scale, t.offset_y]])


def crop_with_transform(image: np.ndarray, t: FrameTransform,
                        crop_size: int, cval: float = 0.0) -> np.ndarray:
    """Extract the letterboxed crop an original->crop transform describes."""
    return warp_affine(image, transform_matrix(t), (crop_size, crop_size), cval=cval)
