"""Background removal by border-seeded flood fill.

The subject (a leaf photographed on a plain backdrop) never touches all four
edges, while the backdrop does.  So instead of thresholding colors globally,
we estimate the backdrop color from a thin border band, then flood-fill from
every edge pixel that matches it: whatever the fill reaches is background,
everything else -- including backdrop-colored pixels fully enclosed by the
subject -- stays foreground.  Background pixels are rewritten to black
(0, 0, 0); foreground pixels are copied verbatim.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DimensionTooSmall
from .imaging import BinaryMask, RgbImage


@dataclass
class SegmentationConfig:
    """Tuning knobs for backdrop detection.

    color_tolerance: max Euclidean RGB distance (8-bit units) for a pixel to
        count as backdrop-colored.
    border_margin: width in pixels of the edge band sampled when estimating
        the backdrop color.
    """

    color_tolerance: float = 40.0
    border_margin: int = 2

    def __post_init__(self) -> None:
        if self.color_tolerance < 0:
            raise ValueError("color_tolerance must be >= 0")
        if self.border_margin < 1:
            raise ValueError("border_margin must be >= 1")


def _require_border_fits(img: RgbImage, cfg: SegmentationConfig) -> None:
    need = 2 * cfg.border_margin + 1
    if img.width < need or img.height < need:
        raise DimensionTooSmall(
            f"{img.width}x{img.height} image too small for border margin {cfg.border_margin}"
        )


def estimate_background_color(img: RgbImage, cfg: SegmentationConfig) -> tuple[float, float, float]:
    """Per-channel median of all pixels within ``border_margin`` of any edge."""
    _require_border_fits(img, cfg)
    m = cfg.border_margin
    h, w = img.height, img.width
    on_border = np.zeros((h, w), dtype=bool)
    on_border[:m, :] = True
    on_border[h - m :, :] = True
    on_border[:, :m] = True
    on_border[:, w - m :] = True
    band = img.pixels[on_border].astype(np.float64)
    r, g, b = np.median(band, axis=0)
    return (float(r), float(g), float(b))


def compute_background_mask(img: RgbImage, cfg: SegmentationConfig) -> BinaryMask:
    """Foreground mask: pixels NOT reachable from the border through
    backdrop-colored pixels.

    A pixel is backdrop-colored when its Euclidean RGB distance to the
    estimated background color is within ``color_tolerance``.  The fill is
    4-connected and seeded from every edge pixel that passes the color test.
    """
    bg = estimate_background_color(img, cfg)
    h, w = img.height, img.width
    diff = img.pixels.astype(np.float64) - np.asarray(bg)
    within = (diff * diff).sum(axis=2) <= cfg.color_tolerance**2

    background = np.zeros((h, w), dtype=bool)
    queue: deque[tuple[int, int]] = deque()
    for x in range(w):
        for y in (0, h - 1):
            if within[y, x] and not background[y, x]:
                background[y, x] = True
                queue.append((y, x))
    for y in range(h):
        for x in (0, w - 1):
            if within[y, x] and not background[y, x]:
                background[y, x] = True
                queue.append((y, x))

    while queue:
        y, x = queue.popleft()
        if y > 0 and within[y - 1, x] and not background[y - 1, x]:
            background[y - 1, x] = True
            queue.append((y - 1, x))
        if y + 1 < h and within[y + 1, x] and not background[y + 1, x]:
            background[y + 1, x] = True
            queue.append((y + 1, x))
        if x > 0 and within[y, x - 1] and not background[y, x - 1]:
            background[y, x - 1] = True
            queue.append((y, x - 1))
        if x + 1 < w and within[y, x + 1] and not background[y, x + 1]:
            background[y, x + 1] = True
            queue.append((y, x + 1))

    return BinaryMask(~background)


def apply_mask(img: RgbImage, mask: BinaryMask) -> RgbImage:
    """Copy foreground pixels, paint background pixels black."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise DimensionMismatch(
            f"image {img.width}x{img.height} vs mask {mask.width}x{mask.height}"
        )
    out = np.where(mask.flags[:, :, None], img.pixels, np.uint8(0))
    return RgbImage(out)


def remove_background(img: RgbImage, cfg: SegmentationConfig | None = None) -> tuple[RgbImage, BinaryMask]:
    """Convenience wrapper: estimate, mask, and black out in one call."""
    cfg = cfg or SegmentationConfig()
    mask = compute_background_mask(img, cfg)
    return apply_mask(img, mask), mask
