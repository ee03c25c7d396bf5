"""PAGE-XML ground truth: parsing, polygon rasterization, label codec.

Label values are fixed package-wide: 0 background, 1 annotation,
2 ambiguous.  A pixel inside an annotation polygon is labeled
annotation when binarization calls it black and ambiguous when it is
white; everything outside the polygons is background.  The label PNG
interchange colors are white / red / blue for 0 / 1 / 2.
"""

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .kernels import polygon_mask_kernel

LABEL_BACKGROUND = 0
LABEL_ANNOTATION = 1
LABEL_AMBIGUOUS = 2

LABEL_COLORS = np.array(
    [
        [255, 255, 255],  # background
        [255, 0, 0],      # annotation
        [0, 0, 255],      # ambiguous
    ],
    dtype=np.uint8,
)


@dataclass
class PageGroundTruth:
    """Page dimensions plus the annotation polygons, in document order.

    Each region is an (V, 2) int64 array of (x, y) vertices, V >= 3.
    ``skipped_regions`` and ``clamped_points`` report parser warnings.
    """

    page_width: int
    page_height: int
    regions: list = field(default_factory=list)
    skipped_regions: int = 0
    clamped_points: int = 0


def validate_polygon(poly) -> None:
    if not isinstance(poly, np.ndarray) or poly.ndim != 2 or poly.shape[1] != 2:
        raise ValueError("polygon must be an (V, 2) array of (x, y) vertices")
    if poly.shape[0] < 3:
        raise ValueError(f"polygon needs at least 3 vertices, got {poly.shape[0]}")
    if not np.issubdtype(poly.dtype, np.integer):
        raise ValueError("polygon coordinates must be integers")
    if (poly < 0).any():
        raise ValueError("polygon coordinates must be non-negative")


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_points(text: str):
    pts = []
    for token in text.split():
        xy = token.split(",")
        if len(xy) != 2:
            return None
        try:
            x = int(round(float(xy[0])))
            y = int(round(float(xy[1])))
        except ValueError:
            return None
        pts.append((x, y))
    return pts


def parse_page_xml(data) -> PageGroundTruth:
    """Parse the region polygons out of a PAGE XML document.

    Element names are matched by local name only, so any PAGE schema
    version (or none) is accepted.  Regions are any ``*Region``
    elements with a direct ``Coords`` child carrying a ``points``
    attribute of "x,y x,y ..." pairs.  Regions with fewer than 3
    points or unparseable Coords are skipped and counted; vertices
    outside the page are clamped to it and counted.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise ValueError(f"malformed PAGE XML: {e}") from e

    if _localname(root.tag) == "Page":
        page = root
    else:
        page = next((el for el in root.iter() if _localname(el.tag) == "Page"), None)
    if page is None:
        raise ValueError("PAGE XML has no Page element")

    try:
        width = int(page.attrib["imageWidth"])
        height = int(page.attrib["imageHeight"])
    except (KeyError, ValueError) as e:
        raise ValueError("Page element lacks integer imageWidth/imageHeight") from e
    if width < 1 or height < 1:
        raise ValueError(f"Page dimensions must be >= 1, got {width}x{height}")

    gt = PageGroundTruth(page_width=width, page_height=height)
    for el in page.iter():
        if not _localname(el.tag).endswith("Region"):
            continue
        coords = next((c for c in el if _localname(c.tag) == "Coords"), None)
        points_attr = coords.attrib.get("points") if coords is not None else None
        pts = _parse_points(points_attr) if points_attr else None
        if not pts or len(pts) < 3:
            gt.skipped_regions += 1
            continue
        poly = np.array(pts, dtype=np.int64)
        clamped = np.clip(poly, 0, [width - 1, height - 1])
        gt.clamped_points += int((clamped != poly).any(axis=1).sum())
        gt.regions.append(clamped)
    return gt


def point_in_polygon(point, poly) -> bool:
    """Even-odd (ray crossing) point test; points on an edge count as inside.

    Exact for integer coordinates: the ray-intersection comparison is
    cross-multiplied so no division is involved.
    """
    validate_polygon(poly)
    px, py = int(point[0]), int(point[1])
    xs = [int(v) for v in poly[:, 0]]
    ys = [int(v) for v in poly[:, 1]]
    nv = len(xs)
    parity = False
    for i in range(nv):
        j = (i + 1) % nv
        x1, y1, x2, y2 = xs[i], ys[i], xs[j], ys[j]
        dy = y2 - y1
        dx = x2 - x1
        if dy != 0 and ((y1 > py) != (y2 > py)):
            lhs = (px - x1) * dy
            rhs = (py - y1) * dx
            if lhs < rhs if dy > 0 else lhs > rhs:
                parity = not parity
        if dx * (py - y1) - dy * (px - x1) == 0:
            if min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2):
                return True
    return parity


def polygon_mask(poly, height: int, width: int):
    """Rasterize one polygon to a full-page bool mask (True = inside).

    Agrees with :func:`point_in_polygon` at every pixel center; only
    the polygon's bounding box is actually scanned.
    """
    validate_polygon(poly)
    mask = np.zeros((height, width), dtype=bool)
    x0 = max(0, int(poly[:, 0].min()))
    x1 = min(width - 1, int(poly[:, 0].max()))
    y0 = max(0, int(poly[:, 1].min()))
    y1 = min(height - 1, int(poly[:, 1].max()))
    if x0 > x1 or y0 > y1:
        return mask
    sub = polygon_mask_kernel(poly.astype(np.int64), x0, y0, y1 - y0 + 1, x1 - x0 + 1)
    mask[y0:y1 + 1, x0:x1 + 1] = sub
    return mask


def regions_mask(regions, height: int, width: int):
    """Union of the per-polygon masks (a pixel inside any polygon is inside)."""
    mask = np.zeros((height, width), dtype=bool)
    for poly in regions:
        mask |= polygon_mask(poly, height, width)
    return mask


def rasterize_gt(img, gt: PageGroundTruth,
                 window: int = imaging.DEFAULT_BINARIZE_WINDOW,
                 offset: float = imaging.DEFAULT_BINARIZE_OFFSET):
    """Turn an image plus its polygon ground truth into a label map.

    Pixels are annotation when black after adaptive binarization and
    inside some polygon, ambiguous when inside but white, background
    everywhere outside the polygons.
    """
    imaging.validate_image(img)
    h, w = img.shape[:2]
    if (h, w) != (gt.page_height, gt.page_width):
        raise ValueError(
            f"image is {h}x{w} but ground truth says "
            f"{gt.page_height}x{gt.page_width}"
        )
    black = imaging.binarize_adaptive(img, window, offset)
    inside = regions_mask(gt.regions, h, w)
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[inside & black] = LABEL_ANNOTATION
    labels[inside & ~black] = LABEL_AMBIGUOUS
    return labels


def validate_label_map(lm) -> None:
    if not isinstance(lm, np.ndarray) or lm.dtype != np.uint8 or lm.ndim != 2:
        raise ValueError("label map must be a 2-d uint8 array")
    if lm.max(initial=0) > LABEL_AMBIGUOUS:
        raise ValueError("label map contains values outside {0, 1, 2}")


def encode_label_png(lm):
    """Label map to RGB image: white background, red annotation, blue ambiguous."""
    validate_label_map(lm)
    return LABEL_COLORS[lm]


def decode_label_png(img):
    """Inverse of :func:`encode_label_png`; rejects any other color.

    The error names the first offending pixel and its color.
    """
    imaging.validate_image(img)
    if img.ndim != 3:
        raise ValueError("label PNG must be RGB")
    labels = np.full(img.shape[:2], 255, dtype=np.uint8)
    for value, color in enumerate(LABEL_COLORS):
        labels[(img == color).all(axis=2)] = value
    bad = np.argwhere(labels == 255)
    if len(bad):
        y, x = (int(v) for v in bad[0])
        r, g, b = (int(v) for v in img[y, x])
        raise ValueError(
            f"illegal label color ({r},{g},{b}) at pixel (x={x}, y={y})"
            f" and {len(bad) - 1} more"
        )
    return labels


def write_label_png(path, lm) -> None:
    imaging.write_png(path, encode_label_png(lm))


def read_label_png(path):
    return decode_label_png(imaging.read_png(path))
