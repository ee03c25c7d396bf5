"""Raster image primitives shared by the whole pipeline.

Image conventions used package-wide:
  * images are numpy arrays, uint8, shape (H, W) for grayscale or
    (H, W, 3) for RGB, row-major;
  * binary images are bool arrays of shape (H, W) with True = black
    (ink) and False = white (paper);
  * all functions are pure: inputs are never mutated.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

DEFAULT_BINARIZE_WINDOW = 31
DEFAULT_BINARIZE_OFFSET = 15.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: rows [top, top+height), cols [left, left+width)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"rect must be at least 1x1, got {self}")


def validate_image(img) -> None:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise ValueError("image must be a uint8 numpy array")
    if img.ndim == 2:
        h, w = img.shape
    elif img.ndim == 3 and img.shape[2] == 3:
        h, w = img.shape[:2]
    else:
        raise ValueError(f"image must have shape (H, W) or (H, W, 3), got {img.shape}")
    if h < 1 or w < 1:
        raise ValueError(f"image dimensions must be >= 1, got {img.shape}")


def to_grayscale(img):
    """Collapse RGB to 8-bit luma; 1-channel input is returned unchanged.

    Uses the BT.601 weights 0.299/0.587/0.114 in exact integer
    arithmetic with half-up rounding.
    """
    validate_image(img)
    if img.ndim == 2:
        return img
    r = img[:, :, 0].astype(np.uint32)
    g = img[:, :, 1].astype(np.uint32)
    b = img[:, :, 2].astype(np.uint32)
    return ((299 * r + 587 * g + 114 * b + 500) // 1000).astype(np.uint8)


def binarize_adaptive(img, window: int = DEFAULT_BINARIZE_WINDOW,
                      offset: float = DEFAULT_BINARIZE_OFFSET):
    """Local-mean adaptive threshold.

    A pixel is black (True) iff its gray value is strictly below the
    mean of the window x window neighborhood minus ``offset``.  The
    neighborhood is edge-clamped: coordinates outside the image are
    replaced by the nearest border pixel.  Window sums come from an
    int64 integral image, so the decision ``gray < mean - offset`` is
    evaluated without division error as
    ``sum - gray * window**2 > offset * window**2``.
    """
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    gray = to_grayscale(img)
    h, w = gray.shape
    r = window // 2

    padded = np.pad(gray.astype(np.int64), r, mode="edge")
    ii = np.zeros((h + 2 * r + 1, w + 2 * r + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    winsum = (ii[window:, window:] - ii[:-window, window:]
              - ii[window:, :-window] + ii[:-window, :-window])

    n = window * window
    return (winsum - gray.astype(np.int64) * n) > float(offset) * n


def crop(img, r: Rect):
    """Copy out the sub-image under ``r``; rejects out-of-bounds rects."""
    validate_image(img)
    h, w = img.shape[:2]
    if r.top < 0 or r.left < 0 or r.top + r.height > h or r.left + r.width > w:
        raise ValueError(f"rect {r} does not fit inside {h}x{w} image")
    return img[r.top:r.top + r.height, r.left:r.left + r.width].copy()


def _axis_coords(n_in: int, n_out: int):
    """Bilinear source coordinates with half-pixel centers, edge-clamped."""
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    s = np.clip(s, 0.0, n_in - 1.0)
    i0 = np.floor(s).astype(np.intp)
    f = s - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, f


def resize_bilinear(img, out_h: int, out_w: int):
    """Bilinear resize under the half-pixel-center convention.

    uint8 input gives uint8 output (values rounded half-up); float
    input is resized in its own dtype without rounding.  Resizing to
    the input size returns an exact copy.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    if img.ndim not in (2, 3):
        raise ValueError(f"expected 2-d or 3-d array, got shape {img.shape}")
    in_h, in_w = img.shape[:2]
    quantize = img.dtype == np.uint8
    data = img.astype(np.float64) if quantize else img

    y0, y1, fy = _axis_coords(in_h, out_h)
    x0, x1, fx = _axis_coords(in_w, out_w)
    fy = fy.reshape((-1, 1) + (1,) * (img.ndim - 2))
    fx = fx.reshape((1, -1) + (1,) * (img.ndim - 2))

    rows = data[y0] * (1.0 - fy) + data[y1] * fy
    out = rows[:, x0] * (1.0 - fx) + rows[:, x1] * fx
    if quantize:
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out.astype(img.dtype, copy=False)


def resize_nearest(img, out_h: int, out_w: int):
    """Nearest-neighbor resize with the same half-pixel-center mapping.

    Safe for label maps: every output pixel is a verbatim copy of its
    mapped source pixel.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    in_h, in_w = img.shape[:2]
    ys = nearest_indices(in_h, out_h)
    xs = nearest_indices(in_w, out_w)
    return img[ys][:, xs].copy()


def nearest_indices(n_in: int, n_out: int):
    """Source index for each output index under nearest-neighbor mapping."""
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(np.floor(s + 0.5), 0, n_in - 1).astype(np.intp)


def read_png(path):
    """Load a PNG as uint8 grayscale (H, W) or RGB (H, W, 3)."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode != "RGB":
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8)


def write_png(path, img) -> None:
    validate_image(img)
    mode = "L" if img.ndim == 2 else "RGB"
    Image.fromarray(img, mode=mode).save(path, format="PNG")


def write_png16(path, arr) -> None:
    """Write a (H, W) array of [0, 1] values as a 16-bit grayscale PNG."""
    if arr.ndim != 2:
        raise ValueError("16-bit PNG writer expects a 2-d array")
    data = np.clip(np.floor(arr * 65535.0 + 0.5), 0, 65535).astype(np.uint16)
    Image.fromarray(data, mode="I;16").save(path, format="PNG")


def read_png16(path):
    """Load a 16-bit grayscale PNG back to float64 values in [0, 1]."""
    with Image.open(path) as im:
        data = np.asarray(im, dtype=np.uint16)
    return data.astype(np.float64) / 65535.0
