"""Raster containers and bit-exact image primitives.

Everything downstream (segmentation, keypoint detection, patching, the
network input path) is built on the three containers here:

* :class:`RgbImage`  -- 8-bit interleaved RGB, row-major.
* :class:`GrayImage` -- real-valued intensities, conventionally in [0, 1].
* :class:`BinaryMask` -- per-pixel booleans, ``True`` = foreground.

PPM (P6, maxval 255) is the canonical on-disk format because it round-trips
bit-exactly.  Other formats are decoded through Pillow when it is installed;
those are convenience front-ends and make no bit-exactness promises.

All operations are pure: they never mutate their inputs and are safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, DimensionTooSmall, MalformedFile

# BT.601 luma weights.
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114

# Below this sigma the Gaussian kernel collapses to the identity.
_BLUR_IDENTITY_SIGMA = 0.01


@dataclass
class RgbImage:
    """8-bit RGB raster, shape (height, width, 3), C-contiguous."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise DimensionMismatch(f"expected (h, w, 3) pixels, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise DimensionTooSmall("images must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, rgb: tuple[int, int, int]) -> "RgbImage":
        return cls(np.full((height, width, 3), rgb, dtype=np.uint8))


@dataclass
class GrayImage:
    """Single-channel raster of finite reals, shape (height, width).

    Intensities are conventionally in [0, 1]; operations that emit other
    ranges (e.g. local-binary-pattern code maps) say so explicitly.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionMismatch(f"expected (h, w) values, got {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DimensionTooSmall("images must be at least 1x1")
        if not np.isfinite(self.values).all():
            raise ValueError("gray image contains non-finite values")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class BinaryMask:
    """Boolean raster, shape (height, width); ``True`` marks foreground."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        self.flags = np.ascontiguousarray(self.flags, dtype=bool)
        if self.flags.ndim != 2:
            raise DimensionMismatch(f"expected (h, w) flags, got {self.flags.shape}")

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def height(self) -> int:
        return self.flags.shape[0]


# --- PPM (P6) codec ----------------------------------------------------------

def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Return the next whitespace-delimited header token, skipping comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedFile("unexpected end of PPM header")
    return data[start:pos], pos


def decode_ppm(data: bytes) -> RgbImage:
    """Decode a binary PPM (P6, maxval 255) byte string.

    Header comments (``#`` to end of line) are accepted.  Raises
    :class:`MalformedFile` on a bad magic, a maxval other than 255, a zero
    dimension, or a truncated raster.
    """
    if data[:2] != b"P6":
        raise MalformedFile("not a P6 PPM file")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _read_header_token(data, pos)
        if not token.isdigit():
            raise MalformedFile(f"bad PPM {name}: {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedFile(f"zero PPM dimension: {width}x{height}")
    if maxval != 255:
        raise MalformedFile(f"unsupported PPM maxval {maxval} (only 255)")
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedFile("missing whitespace before PPM raster")
    pos += 1
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) < expected:
        raise MalformedFile(f"truncated PPM raster: {len(raster)} of {expected} bytes")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(pixels.copy())


def encode_ppm(img: RgbImage) -> bytes:
    """Serialize to the canonical P6 form: ``P6\\n{w} {h}\\n255\\n`` + raster."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_image(path: str | Path) -> RgbImage:
    """Load an image file; ``.ppm`` uses the built-in decoder, anything else
    goes through Pillow (optional dependency)."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".ppm" or data[:2] == b"P6":
        return decode_ppm(data)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise MalformedFile(
            f"{path.name}: only PPM is supported without Pillow installed"
        ) from exc
    with Image.open(path) as im:
        return RgbImage(np.asarray(im.convert("RGB"), dtype=np.uint8))


def write_ppm(path: str | Path, img: RgbImage) -> None:
    Path(path).write_bytes(encode_ppm(img))


# --- color and resampling ----------------------------------------------------

def to_grayscale(img: RgbImage) -> GrayImage:
    """BT.601 luminance, scaled to [0, 1]."""
    rgb = img.pixels.astype(np.float64)
    lum = _LUMA_R * rgb[:, :, 0] + _LUMA_G * rgb[:, :, 1] + _LUMA_B * rgb[:, :, 2]
    return GrayImage(lum / 255.0)


def _bilinear_axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-center source coordinates, edge clamped."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def _resize_bilinear_values(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = values.shape
    y0, y1, fy = _bilinear_axis_coords(h, out_h)
    x0, x1, fx = _bilinear_axis_coords(w, out_w)
    top = values[np.ix_(y0, x0)] * (1.0 - fx) + values[np.ix_(y0, x1)] * fx
    bot = values[np.ix_(y1, x0)] * (1.0 - fx) + values[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy)[:, None] + bot * fy[:, None]


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resample with half-pixel center alignment and edge clamping."""
    if out_w < 1 or out_h < 1:
        raise DimensionTooSmall("output dimensions must be at least 1")
    if out_w == img.width and out_h == img.height:
        return GrayImage(img.values.copy())
    return GrayImage(_resize_bilinear_values(img.values, out_w, out_h))


def resize_rgb(img: RgbImage, out_w: int, out_h: int) -> RgbImage:
    """Per-channel bilinear resample; result rounded back to 8 bits."""
    if out_w < 1 or out_h < 1:
        raise DimensionTooSmall("output dimensions must be at least 1")
    if out_w == img.width and out_h == img.height:
        return RgbImage(img.pixels.copy())
    channels = [
        _resize_bilinear_values(img.pixels[:, :, c].astype(np.float64), out_w, out_h)
        for c in range(3)
    ]
    resized = np.clip(np.rint(np.stack(channels, axis=2)), 0, 255)
    return RgbImage(resized.astype(np.uint8))


# --- Gaussian filtering --------------------------------------------------------

def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _reflect101_indices(n: int, pad: int) -> np.ndarray:
    """Index map implementing reflect-101 padding (edge sample not repeated).

    Valid for any pad length; a 1-sample axis degenerates to constant
    extension.
    """
    idx = np.arange(-pad, n + pad)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def _correlate1d_reflect(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    pad = (len(kernel) - 1) // 2
    if axis == 0:
        return _correlate1d_reflect(values.T, kernel, 1).T
    padded = values[:, _reflect101_indices(values.shape[1], pad)]
    return sliding_window_view(padded, len(kernel), axis=1) @ kernel


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian smoothing with reflect-101 borders.

    ``sigma`` below 0.01 returns the input unchanged.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma < _BLUR_IDENTITY_SIGMA:
        return img
    kernel = gaussian_kernel1d(sigma)
    blurred = _correlate1d_reflect(img.values, kernel, axis=1)
    blurred = _correlate1d_reflect(blurred, kernel, axis=0)
    return GrayImage(blurred)


def downsample2(img: GrayImage) -> GrayImage:
    """Halve both dimensions by keeping every even-indexed sample."""
    if img.width < 2 or img.height < 2:
        raise DimensionTooSmall(f"cannot halve a {img.width}x{img.height} image")
    out_h = img.height // 2
    out_w = img.width // 2
    return GrayImage(img.values[: 2 * out_h : 2, : 2 * out_w : 2].copy())
