"""Scale-invariant keypoint detection and description.

The detector finds blob-like structures as local extrema of a
difference-of-Gaussians pyramid, refines their position to sub-pixel and
sub-scale accuracy with a quadratic fit, discards low-contrast and edge-like
candidates, assigns one or more dominant gradient orientations, and
summarizes each keypoint's neighborhood as a 128-component histogram of
gradients (4x4 spatial cells x 8 orientation bins).

Coordinates, scales, and orientations of returned keypoints are expressed in
the frame of the image handed to :func:`detect_and_describe`, regardless of
the internal 2x upsampling.  Output ordering is deterministic:
(response descending, y, x, scale).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DimensionTooSmall
from .imaging import GrayImage, RgbImage, downsample2, gaussian_blur, resize_bilinear

_TWO_PI = 2.0 * math.pi

# Orientation histogram layout.
_ORI_BINS = 36
_ORI_SIGMA_FACTOR = 1.5
_ORI_RADIUS_FACTOR = 3.0
_ORI_PEAK_RATIO = 0.8
_ORI_SMOOTH_PASSES = 3

# Descriptor layout.
_DESC_CELLS = 4
_DESC_ORI_BINS = 8
_DESC_CELL_SIGMA_FACTOR = 3.0
_DESC_CLAMP = 0.2

# Octaves are never built below this side length.
_MIN_OCTAVE_SIDE = 8

_EPS = 1e-12


@dataclass
class SiftParams:
    """Detector configuration.  ``n_octaves=None`` selects
    max(1, floor(log2(min(w, h))) - 3) from the input dimensions."""

    n_octaves: int | None = None
    scales_per_octave: int = 3
    base_sigma: float = 1.6
    assumed_camera_sigma: float = 0.5
    contrast_threshold: float = 0.04
    edge_ratio: float = 10.0
    max_interp_steps: int = 5
    upsample: bool = True

    def __post_init__(self) -> None:
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.base_sigma <= self.assumed_camera_sigma:
            raise ValueError("base_sigma must exceed assumed_camera_sigma")
        if self.edge_ratio <= 1:
            raise ValueError("edge_ratio must be > 1")

    def default_octave_count(self, width: int, height: int) -> int:
        return max(1, int(math.floor(math.log2(min(width, height)))) - 3)


@dataclass
class Keypoint:
    """A detected feature.

    x, y: sub-pixel position, input-image pixels.
    scale: absolute blob sigma, input-image pixels.
    orientation: dominant gradient direction, radians in [0, 2pi).
    response: |interpolated DoG value| at the refined extremum.
    octave, layer: pyramid cell the keypoint came from.
    """

    x: float
    y: float
    scale: float
    orientation: float = 0.0
    response: float = 0.0
    octave: int = 0
    layer: int = 0


class Rejection(enum.Enum):
    """Why a raw extremum was dropped during refinement."""

    UNCONVERGED = "unconverged"
    LOW_CONTRAST = "low_contrast"
    EDGE_LIKE = "edge_like"


class RawExtremum(NamedTuple):
    octave: int
    layer: int
    row: int
    col: int


@dataclass
class ScaleSpace:
    """Gaussian pyramid: ``octaves[o]`` holds scales_per_octave + 3 images of
    identical size; ``sigmas[o][s]`` is the absolute blur of that level in
    pyramid-base pixels (= base_sigma * 2**(o + s/scales_per_octave))."""

    octaves: list[list[GrayImage]]
    sigmas: list[list[float]]
    input_scale: float  # pyramid-base pixels per input pixel (2.0 when upsampled)
    params: SiftParams = field(repr=False, default_factory=SiftParams)


@dataclass
class DogPyramid:
    """Adjacent-level differences: ``octaves[o][s] = gauss[o][s+1] - gauss[o][s]``."""

    octaves: list[list[GrayImage]]


# --- pyramid construction ----------------------------------------------------

def build_scale_space(img: GrayImage, p: SiftParams | None = None) -> ScaleSpace:
    """Build the Gaussian pyramid.

    The base level is the input upsampled 2x (when ``p.upsample``) and blurred
    up to ``base_sigma``; each following level adds the incremental blur
    sqrt(target^2 - current^2).  Each new octave starts from the level whose
    blur is exactly twice the octave base, subsampled by two.
    """
    p = p or SiftParams()
    if min(img.width, img.height) < 16:
        raise DimensionTooSmall(f"{img.width}x{img.height} input below the 16px minimum")

    n_oct = p.n_octaves if p.n_octaves is not None else p.default_octave_count(img.width, img.height)
    s = p.scales_per_octave

    if p.upsample:
        base = resize_bilinear(img, 2 * img.width, 2 * img.height)
        start_sigma = 2.0 * p.assumed_camera_sigma
        input_scale = 2.0
    else:
        base = GrayImage(img.values.copy())
        start_sigma = p.assumed_camera_sigma
        input_scale = 1.0
    base = gaussian_blur(base, math.sqrt(max(p.base_sigma**2 - start_sigma**2, 0.0)))

    # Clamp so the smallest octave keeps enough interior for a 3x3x3 scan.
    max_oct = int(math.floor(math.log2(min(base.width, base.height) / _MIN_OCTAVE_SIDE))) + 1
    n_oct = max(1, min(n_oct, max_oct))

    level_sigmas = [p.base_sigma * 2.0 ** (lvl / s) for lvl in range(s + 3)]
    increments = [
        math.sqrt(level_sigmas[lvl] ** 2 - level_sigmas[lvl - 1] ** 2)
        for lvl in range(1, s + 3)
    ]

    octaves: list[list[GrayImage]] = []
    sigmas: list[list[float]] = []
    seed = base
    for o in range(n_oct):
        levels = [seed]
        for inc in increments:
            levels.append(gaussian_blur(levels[-1], inc))
        octaves.append(levels)
        sigmas.append([sig * 2.0**o for sig in level_sigmas])
        if o + 1 < n_oct:
            seed = downsample2(levels[s])
    return ScaleSpace(octaves=octaves, sigmas=sigmas, input_scale=input_scale, params=p)


def compute_dog(ss: ScaleSpace) -> DogPyramid:
    """Difference-of-Gaussians: elementwise adjacent level differences."""
    octaves = [
        [GrayImage(upper.values - lower.values) for lower, upper in zip(levels, levels[1:])]
        for levels in ss.octaves
    ]
    return DogPyramid(octaves=octaves)


# --- extrema -----------------------------------------------------------------

def detect_extrema(dog: DogPyramid, p: SiftParams | None = None) -> list[RawExtremum]:
    """Voxels strictly above or strictly below all 26 neighbors.

    Candidate layers are 1..scales_per_octave and a 1-pixel spatial border is
    excluded.  Values must clear the prefilter
    |v| > 0.5 * contrast_threshold / scales_per_octave.
    """
    p = p or SiftParams()
    prefilter = 0.5 * p.contrast_threshold / p.scales_per_octave
    found: list[RawExtremum] = []
    for o, levels in enumerate(dog.octaves):
        arr = np.stack([lvl.values for lvl in levels])
        n_layers, h, w = arr.shape
        if h < 3 or w < 3:
            continue
        for layer in range(1, n_layers - 1):
            center = arr[layer, 1 : h - 1, 1 : w - 1]
            neigh_max = np.full_like(center, -np.inf)
            neigh_min = np.full_like(center, np.inf)
            for dl in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if dl == 0 and dy == 0 and dx == 0:
                            continue
                        view = arr[layer + dl, 1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
                        np.maximum(neigh_max, view, out=neigh_max)
                        np.minimum(neigh_min, view, out=neigh_min)
            hits = (np.abs(center) > prefilter) & ((center > neigh_max) | (center < neigh_min))
            rows, cols = np.nonzero(hits)
            found.extend(
                RawExtremum(o, layer, int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)
            )
    return found


def _cube_gradient(cube: np.ndarray) -> np.ndarray:
    dx = 0.5 * (cube[1, 1, 2] - cube[1, 1, 0])
    dy = 0.5 * (cube[1, 2, 1] - cube[1, 0, 1])
    ds = 0.5 * (cube[2, 1, 1] - cube[0, 1, 1])
    return np.array([dx, dy, ds])


def _cube_hessian(cube: np.ndarray) -> np.ndarray:
    c = cube[1, 1, 1]
    dxx = cube[1, 1, 2] - 2 * c + cube[1, 1, 0]
    dyy = cube[1, 2, 1] - 2 * c + cube[1, 0, 1]
    dss = cube[2, 1, 1] - 2 * c + cube[0, 1, 1]
    dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
    dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
    return np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])


def edge_curvature_cutoff(edge_ratio: float) -> float:
    """Threshold on trace^2/det of the spatial Hessian: (r+1)^2 / r."""
    return (edge_ratio + 1.0) ** 2 / edge_ratio


def refine_keypoint(
    dog: DogPyramid,
    raw: RawExtremum,
    p: SiftParams | None = None,
    input_scale: float = 2.0,
) -> Keypoint | Rejection:
    """Quadratic sub-voxel refinement with contrast and edge-response tests.

    Returns a :class:`Keypoint` in input-image coordinates, or the
    :class:`Rejection` explaining the drop.  ``input_scale`` is the
    pyramid-base-to-input pixel ratio (see :class:`ScaleSpace`).
    """
    p = p or SiftParams()
    s = p.scales_per_octave
    arr = np.stack([lvl.values for lvl in dog.octaves[raw.octave]])
    n_layers, h, w = arr.shape
    layer, row, col = raw.layer, raw.row, raw.col

    converged = False
    offset = np.zeros(3)
    grad = np.zeros(3)
    cube = arr[layer - 1 : layer + 2, row - 1 : row + 2, col - 1 : col + 2]
    for _ in range(p.max_interp_steps):
        cube = arr[layer - 1 : layer + 2, row - 1 : row + 2, col - 1 : col + 2]
        grad = _cube_gradient(cube)
        hess = _cube_hessian(cube)
        offset = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        if np.all(np.abs(offset) <= 0.5):
            converged = True
            break
        col += int(round(offset[0]))
        row += int(round(offset[1]))
        layer += int(round(offset[2]))
        if not (1 <= layer <= s and 1 <= row < h - 1 and 1 <= col < w - 1):
            return Rejection.UNCONVERGED
    if not converged:
        return Rejection.UNCONVERGED

    value = cube[1, 1, 1] + 0.5 * float(grad @ offset)
    if abs(value) < p.contrast_threshold / s:
        return Rejection.LOW_CONTRAST

    dxx = cube[1, 1, 2] - 2 * cube[1, 1, 1] + cube[1, 1, 0]
    dyy = cube[1, 2, 1] - 2 * cube[1, 1, 1] + cube[1, 0, 1]
    dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    trace = dxx + dyy
    det = dxx * dyy - dxy * dxy
    if det <= 0 or trace * trace / det >= edge_curvature_cutoff(p.edge_ratio):
        return Rejection.EDGE_LIKE

    oct_to_input = 2.0**raw.octave / input_scale
    sigma_base = p.base_sigma * 2.0 ** (raw.octave + (layer + offset[2]) / s)
    return Keypoint(
        x=(col + float(offset[0])) * oct_to_input,
        y=(row + float(offset[1])) * oct_to_input,
        scale=sigma_base / input_scale,
        response=abs(value),
        octave=raw.octave,
        layer=layer,
    )


# --- orientation -------------------------------------------------------------

def _keypoint_octave_frame(ss: ScaleSpace, kp: Keypoint) -> tuple[np.ndarray, float, float, float]:
    """Gaussian level values plus (x, y, sigma) in that octave's pixel units."""
    to_octave = ss.input_scale / 2.0**kp.octave
    level = ss.octaves[kp.octave][kp.layer]
    return level.values, kp.x * to_octave, kp.y * to_octave, kp.scale * to_octave


def _window_gradients(
    values: np.ndarray, cx: int, cy: int, radius: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Central-difference gradients on the interior window around (cx, cy).

    Returns (rows, cols, dx, dy) as flat arrays; rows/cols are absolute pixel
    indices kept at least one pixel away from the border.
    """
    h, w = values.shape
    ys = np.arange(max(cy - radius, 1), min(cy + radius, h - 2) + 1)
    xs = np.arange(max(cx - radius, 1), min(cx + radius, w - 2) + 1)
    if ys.size == 0 or xs.size == 0:
        empty = np.empty(0)
        return empty, empty, empty, empty
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    dx = values[yy, xx + 1] - values[yy, xx - 1]
    dy = values[yy + 1, xx] - values[yy - 1, xx]
    return yy.ravel().astype(np.float64), xx.ravel().astype(np.float64), dx.ravel(), dy.ravel()


def orientation_histogram(ss: ScaleSpace, kp: Keypoint) -> np.ndarray:
    """Smoothed 36-bin gradient-orientation histogram around the keypoint."""
    values, x_oct, y_oct, sigma_oct = _keypoint_octave_frame(ss, kp)
    weight_sigma = _ORI_SIGMA_FACTOR * sigma_oct
    radius = int(round(_ORI_RADIUS_FACTOR * weight_sigma))
    rows, cols, dx, dy = _window_gradients(values, int(round(x_oct)), int(round(y_oct)), radius)

    hist = np.zeros(_ORI_BINS)
    if rows.size:
        mag = np.hypot(dx, dy)
        ang = np.mod(np.arctan2(dy, dx), _TWO_PI)
        dist2 = (rows - y_oct) ** 2 + (cols - x_oct) ** 2
        weight = np.exp(-dist2 / (2.0 * weight_sigma**2))
        bins = np.round(ang * _ORI_BINS / _TWO_PI).astype(int) % _ORI_BINS
        np.add.at(hist, bins, weight * mag)

    for _ in range(_ORI_SMOOTH_PASSES):
        hist = (np.roll(hist, 1) + 2.0 * hist + np.roll(hist, -1)) / 4.0
    return hist


def assign_orientations(ss: ScaleSpace, kp: Keypoint) -> list[Keypoint]:
    """One keypoint per qualifying histogram peak.

    A bin qualifies when it is a circular local maximum and reaches at least
    80% of the histogram maximum; the peak angle is refined by a parabola
    through the bin and its neighbors.
    """
    hist = orientation_histogram(ss, kp)
    peak_floor = _ORI_PEAK_RATIO * hist.max()
    if hist.max() <= 0.0:
        return []
    out: list[Keypoint] = []
    for b in range(_ORI_BINS):
        left = hist[(b - 1) % _ORI_BINS]
        right = hist[(b + 1) % _ORI_BINS]
        if hist[b] < peak_floor or hist[b] < left or hist[b] < right:
            continue
        denom = left - 2.0 * hist[b] + right
        shift = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
        angle = ((b + shift) * _TWO_PI / _ORI_BINS) % _TWO_PI
        out.append(replace(kp, orientation=angle))
    return out


# --- descriptor ----------------------------------------------------------------

def compute_descriptor(ss: ScaleSpace, kp: Keypoint) -> np.ndarray:
    """128-component gradient histogram (4x4 cells x 8 orientation bins).

    The sampling window is rotated to the keypoint orientation and Gaussian
    weighted; contributions are trilinearly shared between neighboring cells
    and orientation bins.  The vector is L2-normalized, clamped at 0.2, and
    re-normalized.
    """
    values, x_oct, y_oct, sigma_oct = _keypoint_octave_frame(ss, kp)
    h, w = values.shape
    cell_width = _DESC_CELL_SIGMA_FACTOR * sigma_oct
    half_width = int(round(cell_width * math.sqrt(2) * (_DESC_CELLS + 1) * 0.5))
    half_width = min(half_width, int(math.hypot(h, w)))

    cx, cy = int(round(x_oct)), int(round(y_oct))
    rows, cols, dx, dy = _window_gradients(values, cx, cy, half_width)
    hist = np.zeros((_DESC_CELLS + 2, _DESC_CELLS + 2, _DESC_ORI_BINS))

    if rows.size:
        cos_t = math.cos(kp.orientation)
        sin_t = math.sin(kp.orientation)
        d_row = rows - y_oct
        d_col = cols - x_oct
        # Rotate into the keypoint frame, then express in cell units.
        col_rot = (cos_t * d_col + sin_t * d_row) / cell_width
        row_rot = (-sin_t * d_col + cos_t * d_row) / cell_width
        row_bin = row_rot + 0.5 * _DESC_CELLS - 0.5
        col_bin = col_rot + 0.5 * _DESC_CELLS - 0.5
        keep = (row_bin > -1) & (row_bin < _DESC_CELLS) & (col_bin > -1) & (col_bin < _DESC_CELLS)
        if keep.any():
            row_bin, col_bin = row_bin[keep], col_bin[keep]
            mag = np.hypot(dx[keep], dy[keep])
            ang = np.mod(np.arctan2(dy[keep], dx[keep]) - kp.orientation, _TWO_PI)
            ori_bin = ang * _DESC_ORI_BINS / _TWO_PI
            weight = np.exp(-(row_rot[keep] ** 2 + col_rot[keep] ** 2) / (2.0 * (0.5 * _DESC_CELLS) ** 2))
            contrib = weight * mag

            r0 = np.floor(row_bin).astype(int)
            c0 = np.floor(col_bin).astype(int)
            o0 = np.floor(ori_bin).astype(int)
            fr, fc, fo = row_bin - r0, col_bin - c0, ori_bin - o0
            o0 %= _DESC_ORI_BINS
            flat = hist.ravel()
            for dr in (0, 1):
                wr = contrib * (fr if dr else 1.0 - fr)
                for dc in (0, 1):
                    wc = wr * (fc if dc else 1.0 - fc)
                    for do in (0, 1):
                        wo = wc * (fo if do else 1.0 - fo)
                        idx = (
                            (r0 + 1 + dr) * (_DESC_CELLS + 2) * _DESC_ORI_BINS
                            + (c0 + 1 + dc) * _DESC_ORI_BINS
                            + (o0 + do) % _DESC_ORI_BINS
                        )
                        np.add.at(flat, idx, wo)

    vec = hist[1:-1, 1:-1, :].ravel()
    vec = vec / max(float(np.linalg.norm(vec)), _EPS)
    vec = np.minimum(vec, _DESC_CLAMP)
    return vec / max(float(np.linalg.norm(vec)), _EPS)


# --- full pipeline -------------------------------------------------------------

def detect_and_describe(
    img: GrayImage, p: SiftParams | None = None
) -> list[tuple[Keypoint, np.ndarray]]:
    """Run the whole detector and return (keypoint, descriptor) pairs sorted
    by (response descending, y, x, scale)."""
    p = p or SiftParams()
    ss = build_scale_space(img, p)
    dog = compute_dog(ss)
    oriented: list[Keypoint] = []
    seen: set[tuple[float, float, float, float]] = set()
    for raw in detect_extrema(dog, p):
        refined = refine_keypoint(dog, raw, p, input_scale=ss.input_scale)
        if isinstance(refined, Rejection):
            continue
        for kp in assign_orientations(ss, refined):
            key = (kp.x, kp.y, kp.scale, kp.orientation)
            if key not in seen:
                seen.add(key)
                oriented.append(kp)
    oriented.sort(key=lambda k: (-k.response, k.y, k.x, k.scale, k.orientation))
    return [(kp, compute_descriptor(ss, kp)) for kp in oriented]


def detect_keypoints(img: GrayImage, p: SiftParams | None = None) -> list[Keypoint]:
    """Detector only; same ordering contract as :func:`detect_and_describe`."""
    return [kp for kp, _ in detect_and_describe(img, p)]


def draw_keypoints(img: RgbImage, keypoints: list[Keypoint], color: tuple[int, int, int] = (255, 0, 0)) -> RgbImage:
    """Overlay one circle per keypoint (radius = scale) for visual checks."""
    canvas = img.pixels.copy()
    h, w = canvas.shape[:2]
    for kp in keypoints:
        radius = max(kp.scale, 1.0)
        steps = max(int(math.ceil(_TWO_PI * radius * 2)), 8)
        angles = np.arange(steps) * (_TWO_PI / steps)
        xs = np.round(kp.x + radius * np.cos(angles)).astype(int)
        ys = np.round(kp.y + radius * np.sin(angles)).astype(int)
        ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        canvas[ys[ok], xs[ok]] = color
    return RgbImage(canvas)
