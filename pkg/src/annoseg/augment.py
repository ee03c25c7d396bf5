"""Training-patch samplers.

Both samplers cut the image and its label map with the same rectangle,
so pixels and labels stay aligned.  Image patches are resized
bilinearly where needed; label patches always use nearest-neighbor
(class ids must never be interpolated).  All randomness comes from the
numpy Generator passed in, drawn in a documented order, so a seed fully
determines the output.
"""

from dataclasses import dataclass

import numpy as np

from . import imaging
from .imaging import Rect


@dataclass(frozen=True)
class InceptionSamplerConfig:
    """Area/aspect-constrained crop sampler settings.

    Crops cover 8% to 100% of the image area with width/height aspect
    between 3/4 and 4/3 by default, then get rescaled to
    ``out_size`` x ``out_size``.
    """

    min_area_frac: float = 0.08
    max_area_frac: float = 1.0
    min_aspect: float = 3.0 / 4.0
    max_aspect: float = 4.0 / 3.0
    out_size: int = 512
    max_attempts: int = 10

    def __post_init__(self):
        if not 0.0 < self.min_area_frac <= self.max_area_frac <= 1.0:
            raise ValueError("need 0 < min_area_frac <= max_area_frac <= 1")
        if not 0.0 < self.min_aspect <= self.max_aspect:
            raise ValueError("need 0 < min_aspect <= max_aspect")
        if self.out_size < 1:
            raise ValueError("out_size must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class Sample:
    """One training patch: image, aligned labels, and where it came from."""

    patch: np.ndarray
    labels: np.ndarray
    source_rect: Rect


def _check_pair(img, labels):
    imaging.validate_image(img)
    if labels.ndim != 2 or labels.dtype != np.uint8:
        raise ValueError("labels must be a 2-d uint8 array")
    if img.shape[:2] != labels.shape:
        raise ValueError(
            f"image {img.shape[:2]} and labels {labels.shape} dims differ"
        )


def sample_random_crop(img, labels, size: int, rng) -> Sample:
    """Uniform random size x size crop; top is drawn before left.

    The image must be at least size x size (no padding or resizing).
    """
    _check_pair(img, labels)
    h, w = labels.shape
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} is smaller than crop size {size}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    rect = Rect(top, left, size, size)
    return Sample(
        patch=imaging.crop(img, rect),
        labels=labels[top:top + size, left:left + size].copy(),
        source_rect=rect,
    )


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def sample_inception(img, labels, cfg: InceptionSamplerConfig, rng) -> Sample:
    """Random-area, random-aspect crop rescaled to a square patch.

    Per attempt the draws are: area fraction, then aspect (w/h), then,
    if the crop fits, top and left.  Crop sides are the rounded values
    of sqrt(area*aspect) / sqrt(area/aspect), clamped to >= 1.  After
    ``max_attempts`` misses the fallback is the centered square of side
    min(H, W).  The patch is resized bilinearly and the labels
    nearest-neighbor to out_size x out_size.
    """
    _check_pair(img, labels)
    h, w = labels.shape

    rect = None
    for _ in range(cfg.max_attempts):
        area = rng.uniform(cfg.min_area_frac, cfg.max_area_frac) * h * w
        aspect = rng.uniform(cfg.min_aspect, cfg.max_aspect)
        cw = max(1, _round_half_up(np.sqrt(area * aspect)))
        ch = max(1, _round_half_up(np.sqrt(area / aspect)))
        if ch <= h and cw <= w:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            rect = Rect(top, left, ch, cw)
            break
    if rect is None:
        side = min(h, w)
        rect = Rect((h - side) // 2, (w - side) // 2, side, side)

    patch = imaging.crop(img, rect)
    lab = labels[rect.top:rect.top + rect.height,
                 rect.left:rect.left + rect.width]
    if (rect.height, rect.width) != (cfg.out_size, cfg.out_size):
        patch = imaging.resize_bilinear(patch, cfg.out_size, cfg.out_size)
        lab = imaging.resize_nearest(lab, cfg.out_size, cfg.out_size)
    else:
        lab = lab.copy()
    return Sample(patch=patch, labels=lab, source_rect=rect)
