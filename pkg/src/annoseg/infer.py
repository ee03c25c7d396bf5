"""Sliding-window inference with overlap averaging.

Full pages are covered by fixed-size tiles laid out on a stride of
``patch - overlap``; the last row/column of tiles is shifted flush to
the image border so every pixel is predicted with full patch context.
Class probabilities of overlapping tiles are averaged per pixel.
"""

from dataclasses import dataclass

import numpy as np

from . import fcn, imaging
from .imaging import Rect


@dataclass(frozen=True)
class InferenceConfig:
    patch: int = 512
    overlap: int = 128

    def __post_init__(self):
        if not 0 <= self.overlap < self.patch:
            raise ValueError(
                f"overlap must be in [0, patch), got {self.overlap} vs {self.patch}"
            )
        if self.patch % fcn.INPUT_MULTIPLE:
            raise ValueError(
                f"patch must be a multiple of {fcn.INPUT_MULTIPLE}, got {self.patch}"
            )

    @property
    def stride(self) -> int:
        return self.patch - self.overlap


def _axis_starts(extent: int, cfg: InferenceConfig):
    starts = list(range(0, extent - cfg.patch + 1, cfg.stride))
    if starts[-1] != extent - cfg.patch:
        starts.append(extent - cfg.patch)
    return starts


def tile_plan(height: int, width: int, cfg: InferenceConfig):
    """Row-major tile rectangles covering every pixel at least once."""
    if height < cfg.patch or width < cfg.patch:
        raise ValueError(
            f"image {height}x{width} is smaller than the {cfg.patch}px patch"
        )
    tops = _axis_starts(height, cfg)
    lefts = _axis_starts(width, cfg)
    return [Rect(t, l, cfg.patch, cfg.patch) for t in tops for l in lefts]


class Fcn8sPredictor:
    """Adapts network parameters to the tile-level predictor interface.

    ``input_mode`` selects the patch preprocessing: "color" feeds the
    RGB values scaled to [0, 1] (grayscale pages are replicated to 3
    channels); "binarized" adaptive-thresholds the patch and feeds
    white=1.0 / black=0.0.  Channels are replicated to whatever the
    network's in_channels is.
    """

    def __init__(self, params, input_mode: str = "color",
                 binarize_window: int = imaging.DEFAULT_BINARIZE_WINDOW,
                 binarize_offset: float = imaging.DEFAULT_BINARIZE_OFFSET,
                 dtype=np.float32):
        if input_mode not in ("color", "binarized"):
            raise ValueError(f"unknown input mode {input_mode!r}")
        self.params = params
        self.input_mode = input_mode
        self.binarize_window = binarize_window
        self.binarize_offset = binarize_offset
        self.dtype = dtype

    def patch_to_tensor(self, patch):
        c = self.params.config.in_channels
        if self.input_mode == "binarized":
            black = imaging.binarize_adaptive(
                patch, self.binarize_window, self.binarize_offset
            )
            plane = (~black).astype(self.dtype)
            data = np.repeat(plane[None], c, axis=0)
        else:
            if patch.ndim == 2:
                plane = patch.astype(self.dtype) / 255.0
                data = np.repeat(plane[None], c, axis=0)
            else:
                if c != 3:
                    raise ValueError(
                        f"color mode needs a 3-channel network, got in_channels={c}"
                    )
                data = (patch.astype(self.dtype) / 255.0).transpose(2, 0, 1)
        return data[None]

    def __call__(self, patch, rect=None):
        x = self.patch_to_tensor(patch)
        return fcn.predict_probabilities(self.params, x)[0]


def predict_tiled(predictor, img, cfg: InferenceConfig):
    """Average per-class probabilities over all covering tiles.

    ``predictor`` is either Fcn8sParams or a callable
    ``(patch, rect) -> (num_classes, patch, patch)`` probability array.
    Returns a (num_classes, H, W) float64 map whose per-pixel sums stay
    1 (each pixel is a mean over the tiles covering it).
    """
    imaging.validate_image(img)
    if isinstance(predictor, fcn.Fcn8sParams):
        predictor = Fcn8sPredictor(predictor)
    h, w = img.shape[:2]
    tiles = tile_plan(h, w, cfg)

    acc = None
    counts = np.zeros((h, w), dtype=np.int64)
    for rect in tiles:
        patch = img[rect.top:rect.top + rect.height,
                    rect.left:rect.left + rect.width]
        probs = np.asarray(predictor(patch, rect), dtype=np.float64)
        if probs.ndim != 3 or probs.shape[1:] != (cfg.patch, cfg.patch):
            raise ValueError(
                f"predictor returned shape {probs.shape}, expected "
                f"(classes, {cfg.patch}, {cfg.patch})"
            )
        if acc is None:
            acc = np.zeros((probs.shape[0], h, w), dtype=np.float64)
        acc[:, rect.top:rect.top + cfg.patch,
            rect.left:rect.left + cfg.patch] += probs
        counts[rect.top:rect.top + cfg.patch,
               rect.left:rect.left + cfg.patch] += 1
    return acc / counts[None]


def argmax_labels(pm):
    """Per-pixel argmax of a probability map; ties go to the lower class."""
    if pm.ndim != 3:
        raise ValueError("probability map must be (classes, H, W)")
    return pm.argmax(axis=0).astype(np.uint8)


def write_probability_pngs(out_dir, stem, pm) -> None:
    """One 16-bit grayscale PNG per class: <stem>_prob_c<k>.png."""
    from pathlib import Path

    out = Path(out_dir)
    for k in range(pm.shape[0]):
        imaging.write_png16(out / f"{stem}_prob_c{k}.png", pm[k])
