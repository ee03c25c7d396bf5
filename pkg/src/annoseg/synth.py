"""Synthetic document pages with exact ground truth.

A page gets printed-looking content (straight horizontal rules and
word-like blocks, very dark neutral ink) and handwriting-like
annotation strokes (wavy x-monotone polylines: marginal squiggles,
interlinear notes and underlines, in lighter pencil/ink shades, some
with a slight color cast).  Each stroke's ground-truth polygon is the
stroke path offset outward by a margin, so the white halo inside the
polygon becomes ambiguous exactly like real loosely-drawn region
ground truth.  Printed ink and annotation hulls never overlap, keeping
labels coherent: the returned label map is the standard rasterization
of the generated image against the generated polygons.
"""

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

import numpy as np

from . import imaging, page_gt

PAGE_XMLNS = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15"


@dataclass(frozen=True)
class SynthConfig:
    height: int = 1024
    width: int = 1216
    printed_lines: int = 14
    rule_probability: float = 0.22
    printed_intensity: tuple = (10, 70)
    paper_intensity: tuple = (208, 242)
    noise_sigma: float = 3.0
    annotation_intensity: tuple = (80, 150)
    annotation_blue_tint: int = 35
    annotation_thickness: tuple = (5, 9)
    underline_thickness: tuple = (3, 5)
    stroke_jitter: float = 3.0
    hull_margin: int = 5
    underline_probability: float = 0.4
    target_ink_frac: tuple = (0.012, 0.04)
    min_annotation_frac: float = 0.005
    max_annotation_frac: float = 0.15
    max_strokes: int = 60
    binarize_window: int = imaging.DEFAULT_BINARIZE_WINDOW
    binarize_offset: float = imaging.DEFAULT_BINARIZE_OFFSET

    def __post_init__(self):
        if self.height < 512 or self.width < 512:
            raise ValueError("pages must be at least 512x512 so samplers and tiling apply")
        for name in ("printed_intensity", "paper_intensity", "annotation_intensity"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi <= 255):
                raise ValueError(f"{name} must be an increasing range inside [0, 255]")
        if not 0.0 <= self.min_annotation_frac <= self.max_annotation_frac <= 1.0:
            raise ValueError("annotation fraction band must sit inside [0, 1]")
        if self.max_strokes < 0:
            raise ValueError("max_strokes must be >= 0")


@dataclass
class _Layout:
    """Mutable scratch state while composing one page."""

    img: np.ndarray
    ink: np.ndarray        # bool mask of annotation ink pixels
    occupied: list = field(default_factory=list)   # (y0, y1, x0, x1) exclusive


def _overlaps(box, occupied) -> bool:
    y0, y1, x0, x1 = box
    for oy0, oy1, ox0, ox1 in occupied:
        if y0 < oy1 and oy0 < y1 and x0 < ox1 and ox0 < x1:
            return True
    return False


def _disk_offsets(radius: int):
    r = max(0, radius)
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    keep = dy * dy + dx * dx <= r * r + r * 0.5
    return dy[keep], dx[keep]


def _stamp_polyline(layout, pts, radius, color, rng):
    """Paint disks of ``radius`` along the polyline; returns nothing.

    Slight per-stamp intensity variation keeps the strokes from being
    perfectly flat.
    """
    h, w = layout.ink.shape
    dy, dx = _disk_offsets(radius)
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        dist = math.hypot(x1 - x0, y1 - y0)
        n = max(2, int(dist / max(1.0, radius * 0.5)) + 1)
        for t in np.linspace(0.0, 1.0, n):
            cx = int(round(x0 + (x1 - x0) * t))
            cy = int(round(y0 + (y1 - y0) * t))
            ys = np.clip(cy + dy, 0, h - 1)
            xs = np.clip(cx + dx, 0, w - 1)
            wobble = rng.integers(-6, 7)
            shade = np.clip(np.asarray(color, dtype=np.int64) + wobble, 0, 255)
            layout.img[ys, xs] = shade.astype(np.uint8)
            layout.ink[ys, xs] = True


def _wavy_polyline(rng, x_start, x_end, y_center, jitter, n_segments):
    xs = np.linspace(x_start, x_end, n_segments + 1)
    ys = y_center + np.cumsum(rng.uniform(-jitter, jitter, n_segments + 1))
    ys -= ys.mean() - y_center
    return list(zip(xs.tolist(), ys.tolist()))


def _hull_polygon(pts, half_height, height, width):
    """Sausage polygon around an x-monotone polyline, integer vertices."""
    top = [(int(math.floor(x)), int(math.floor(y - half_height)))
           for x, y in pts]
    bottom = [(int(math.ceil(x)), int(math.ceil(y + half_height)))
              for x, y in reversed(pts)]
    poly = np.array(top + bottom, dtype=np.int64)
    poly[:, 0] = np.clip(poly[:, 0], 0, width - 1)
    poly[:, 1] = np.clip(poly[:, 1], 0, height - 1)
    return poly


def _paint_paper(cfg, rng):
    base = rng.uniform(*cfg.paper_intensity)
    tint = rng.uniform(-6.0, 2.0, size=3) + base
    noise = rng.normal(0.0, cfg.noise_sigma, size=(cfg.height, cfg.width, 1))
    img = np.clip(tint[None, None, :] + noise, 0, 255).astype(np.uint8)
    return img


def _paint_printed(cfg, layout, rng):
    """Straight rules and word blocks in dark neutral ink; background class."""
    h, w = cfg.height, cfg.width
    col_x0 = int(w * 0.14)
    col_x1 = int(w * 0.84)
    top = int(h * 0.07)
    bottom = int(h * 0.95)
    spacing = (bottom - top) / max(1, cfg.printed_lines)
    baselines = []
    for k in range(cfg.printed_lines):
        y = int(top + k * spacing + rng.uniform(-2.0, 2.0))
        ink = int(rng.integers(cfg.printed_intensity[0], cfg.printed_intensity[1] + 1))
        if rng.random() < cfg.rule_probability:
            t = int(rng.integers(2, 5))
            x0 = col_x0 + int(rng.integers(0, max(1, (col_x1 - col_x0) // 6)))
            x1 = col_x1 - int(rng.integers(0, max(1, (col_x1 - col_x0) // 6)))
            layout.img[y:y + t, x0:x1] = ink
            layout.occupied.append((y - 2, y + t + 2, x0 - 2, x1 + 2))
            baselines.append((y + t, x0, x1, True))
        else:
            lh = int(rng.integers(10, 17))
            x = col_x0
            while x < col_x1 - 20:
                word = int(rng.integers(16, 64))
                word = min(word, col_x1 - x)
                layout.img[y:y + lh, x:x + word] = ink
                x += word + int(rng.integers(8, 22))
            layout.occupied.append((y - 2, y + lh + 2, col_x0 - 2, col_x1 + 2))
            baselines.append((y + lh, col_x0, col_x1, False))
    return baselines


def _try_stroke(cfg, layout, rng, baselines):
    """Place one annotation stroke; returns its hull polygon or None."""
    h, w = cfg.height, cfg.width
    margin = cfg.hull_margin
    kind = rng.random()
    if kind < cfg.underline_probability and baselines:
        base_y, bx0, bx1, _ = baselines[int(rng.integers(0, len(baselines)))]
        thickness = int(rng.integers(*cfg.underline_thickness))
        span = bx1 - bx0
        x0 = bx0 + int(rng.integers(0, max(1, span // 3)))
        x1 = min(bx1, x0 + int(rng.integers(span // 3, span)))
        y = base_y + margin + thickness // 2 + int(rng.integers(4, 9))
        pts = _wavy_polyline(rng, x0, x1, y, 0.8, int(rng.integers(4, 9)))
    else:
        thickness = int(rng.integers(*cfg.annotation_thickness))
        side = rng.random()
        if side < 0.4:
            x0 = int(w * 0.015)
            x1 = int(w * 0.125)
        elif side < 0.8:
            x0 = int(w * 0.86)
            x1 = int(w * 0.975)
        else:
            x0 = int(w * rng.uniform(0.2, 0.5))
            x1 = x0 + int(w * rng.uniform(0.15, 0.3))
        y = int(rng.uniform(0.05, 0.93) * h)
        pts = _wavy_polyline(rng, x0, x1, y, cfg.stroke_jitter,
                             int(rng.integers(6, 13)))

    half = thickness / 2.0 + margin
    ys = [p[1] for p in pts]
    box = (
        int(min(ys) - half) - 1,
        int(max(ys) + half) + 2,
        int(pts[0][0] - half) - 1,
        int(pts[-1][0] + half) + 2,
    )
    if box[0] < 1 or box[1] >= h - 1 or box[2] < 1 or box[3] >= w - 1:
        return None
    if _overlaps(box, layout.occupied):
        return None

    shade = int(rng.integers(cfg.annotation_intensity[0],
                             cfg.annotation_intensity[1] + 1))
    if rng.random() < 0.5:
        color = (shade, shade, min(255, shade + cfg.annotation_blue_tint))
    else:
        color = (shade, shade, shade)
    _stamp_polyline(layout, pts, thickness // 2, color, rng)
    layout.occupied.append(box)
    return _hull_polygon(pts, half, h, w)


def generate_page(cfg: SynthConfig, rng):
    """Build one synthetic page.

    Returns (image, PageGroundTruth, LabelMap); the label map is the
    rasterization of the image against the emitted polygons, so the
    triple is self-consistent by construction.  Strokes are added until
    the annotation ink area reaches a per-page target fraction (drawn
    from ``target_ink_frac``) or ``max_strokes`` is hit.
    """
    img = _paint_paper(cfg, rng)
    layout = _Layout(img=img, ink=np.zeros((cfg.height, cfg.width), dtype=bool))
    baselines = _paint_printed(cfg, layout, rng)

    gt = page_gt.PageGroundTruth(page_width=cfg.width, page_height=cfg.height)
    target = rng.uniform(*cfg.target_ink_frac) * cfg.height * cfg.width
    attempts = 0
    while (len(gt.regions) < cfg.max_strokes and attempts < cfg.max_strokes * 6
           and layout.ink.sum() < target):
        attempts += 1
        poly = _try_stroke(cfg, layout, rng, baselines)
        if poly is not None:
            gt.regions.append(poly)

    labels = page_gt.rasterize_gt(img, gt, cfg.binarize_window, cfg.binarize_offset)
    return img, gt, labels


def write_page_xml(gt: page_gt.PageGroundTruth, image_filename: str) -> bytes:
    """Minimal PAGE document: page dims plus one TextRegion per polygon."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<PcGts xmlns="{PAGE_XMLNS}">',
        f'  <Page imageFilename={quoteattr(image_filename)} '
        f'imageWidth="{gt.page_width}" imageHeight="{gt.page_height}">',
    ]
    for i, poly in enumerate(gt.regions):
        pts = " ".join(f"{int(x)},{int(y)}" for x, y in poly)
        lines.append(f'    <TextRegion id="r{i}">')
        lines.append(f'      <Coords points="{pts}"/>')
        lines.append("    </TextRegion>")
    lines.append("  </Page>")
    lines.append("</PcGts>")
    return "\n".join(lines).encode("utf-8")
