"""Array kernels for the network runtime.

Activations are NCHW; parameters follow the usual conventions
(conv weights OIHW, dense weights (out, in)).  Kernels compute in float64
and cast the result back to the activation dtype, so float32 pipelines get
float64 accumulation for free and float64 inputs stay exact for numeric
tests.  All functions are pure.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionTooSmall, ShapeMismatch
from ..imaging import GrayImage
from .rng import uniform_stream

# Fixed spatial geometry of the ternary filter banks.
LBC_KERNEL = 3
LBC_STRIDE = 1
LBC_PAD = 1


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeMismatch(msg)


def conv_output_side(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _conv_windows(x: np.ndarray, kernel: int, stride: int, pad: int) -> np.ndarray:
    """(n, c, oh, ow, k, k) sliding view of the zero-padded input."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int = 1, pad: int = 0
) -> np.ndarray:
    """Standard cross-correlation with zero padding and per-channel bias."""
    _require(x.ndim == 4, f"conv input must be NCHW, got {x.shape}")
    _require(w.ndim == 4 and w.shape[2] == w.shape[3], f"conv weight must be OIKK, got {w.shape}")
    _require(w.shape[1] == x.shape[1], f"conv channels {w.shape[1]} != input channels {x.shape[1]}")
    _require(stride >= 1 and pad >= 0, f"bad stride/pad {stride}/{pad}")
    n, c, h, wd = x.shape
    oc, _, k, _ = w.shape
    oh = conv_output_side(h, k, stride, pad)
    ow = conv_output_side(wd, k, stride, pad)
    _require(oh >= 1 and ow >= 1, f"kernel {k} too large for {h}x{wd} input with pad {pad}")

    win = _conv_windows(x, k, stride, pad)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * k * k)
    out = cols.astype(np.float64) @ w.reshape(oc, c * k * k).astype(np.float64).T
    if b is not None:
        _require(b.shape == (oc,), f"bias shape {b.shape} != ({oc},)")
        out += b.astype(np.float64)
    return out.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2).astype(x.dtype)


def depthwise_conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int = 1, pad: int = 0
) -> np.ndarray:
    """Per-channel convolution: channel i sees only filter i."""
    _require(x.ndim == 4, f"depthwise input must be NCHW, got {x.shape}")
    _require(
        w.ndim == 4 and w.shape[1] == 1 and w.shape[2] == w.shape[3],
        f"depthwise weight must be (c, 1, k, k), got {w.shape}",
    )
    _require(w.shape[0] == x.shape[1], f"depthwise channels {w.shape[0]} != input {x.shape[1]}")
    n, c, h, wd = x.shape
    k = w.shape[2]
    oh = conv_output_side(h, k, stride, pad)
    ow = conv_output_side(wd, k, stride, pad)
    _require(oh >= 1 and ow >= 1, f"kernel {k} too large for {h}x{wd} input with pad {pad}")

    win = _conv_windows(x, k, stride, pad)
    out = np.einsum(
        "nchwkl,ckl->nchw", win.astype(np.float64), w[:, 0].astype(np.float64), optimize=True
    )
    if b is not None:
        _require(b.shape == (c,), f"bias shape {b.shape} != ({c},)")
        out += b.astype(np.float64)[:, None, None]
    return out.astype(x.dtype)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Affine map on the flattened input: y = x @ w.T + b."""
    _require(x.ndim >= 2, f"dense input must have a batch axis, got {x.shape}")
    flat = x.reshape(x.shape[0], -1)
    _require(w.ndim == 2 and w.shape[1] == flat.shape[1],
             f"dense weight {w.shape} incompatible with input {flat.shape}")
    out = flat.astype(np.float64) @ w.astype(np.float64).T
    if b is not None:
        _require(b.shape == (w.shape[0],), f"bias shape {b.shape} != ({w.shape[0]},)")
        out += b.astype(np.float64)
    return out.astype(x.dtype)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def maxpool_forward(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    _require(x.ndim == 4, f"pool input must be NCHW, got {x.shape}")
    n, c, h, w = x.shape
    oh = conv_output_side(h, kernel, stride, 0)
    ow = conv_output_side(w, kernel, stride, 0)
    _require(oh >= 1 and ow >= 1, f"pool window {kernel} too large for {h}x{w}")
    win = _conv_windows(x, kernel, stride, 0)
    return win.max(axis=(4, 5))


def avgpool_global_forward(x: np.ndarray) -> np.ndarray:
    _require(x.ndim == 4, f"pool input must be NCHW, got {x.shape}")
    return x.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(x.dtype)


def softmax_forward(x: np.ndarray) -> np.ndarray:
    """Row-wise exp-normalization with max subtraction for stability."""
    _require(x.ndim == 2, f"softmax input must be (n, d), got {x.shape}")
    shifted = x.astype(np.float64) - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=1, keepdims=True)).astype(x.dtype)


def residual_add(x: np.ndarray, earlier: np.ndarray) -> np.ndarray:
    _require(x.shape == earlier.shape, f"skip shapes differ: {x.shape} vs {earlier.shape}")
    return x + earlier


def flatten_forward(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


# --- local binary patterns -----------------------------------------------------

# Clockwise 3x3 neighborhood, starting at the top-left corner.
_LBP_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def lbp_map(img: GrayImage) -> GrayImage:
    """8-bit local-binary-pattern code per interior pixel.

    Bit i (weight 2**(7-i)) is set when the i-th clockwise neighbor, starting
    top-left, is >= the center.  Output is (h-2) x (w-2) with codes stored as
    reals in [0, 255].
    """
    if img.height < 3 or img.width < 3:
        raise DimensionTooSmall(f"{img.width}x{img.height} too small for a 3x3 neighborhood")
    v = img.values
    center = v[1:-1, 1:-1]
    codes = np.zeros_like(center)
    for i, (dy, dx) in enumerate(_LBP_OFFSETS):
        neighbor = v[1 + dy : v.shape[0] - 1 + dy, 1 + dx : v.shape[1] - 1 + dx]
        codes += (neighbor >= center) * float(2 ** (7 - i))
    return GrayImage(codes)


# --- local binary convolution ----------------------------------------------------

def generate_lbc_anchors(
    n_filters: int, in_channels: int, kernel: int, sparsity: float, seed: int
) -> np.ndarray:
    """Fixed ternary {-1, 0, +1} filter bank, shape (n_filters, in_ch, k, k).

    Two SplitMix64 uniforms are drawn per element in flat row-major order:
    the first zeroes the weight with probability ``sparsity``, the second
    picks the sign (+1 below 0.5) otherwise.  Identical (seed, sparsity,
    shape) always regenerate the identical bank.
    """
    count = n_filters * in_channels * kernel * kernel
    u = uniform_stream(seed, 2 * count)
    zero_draw = u[0::2]
    sign_draw = u[1::2]
    vals = np.where(zero_draw < sparsity, 0.0, np.where(sign_draw < 0.5, 1.0, -1.0))
    return vals.reshape(n_filters, in_channels, kernel, kernel).astype(np.float32)


def lbc_forward(
    x: np.ndarray,
    anchors: np.ndarray,
    linear_w: np.ndarray,
    b: np.ndarray | None,
    stride: int = LBC_STRIDE,
    pad: int = LBC_PAD,
) -> np.ndarray:
    """Fixed-filter convolution, relu, then a trainable 1x1 recombination."""
    _require(
        linear_w.ndim == 4 and linear_w.shape[1] == anchors.shape[0]
        and linear_w.shape[2] == 1 and linear_w.shape[3] == 1,
        f"lbc linear weights must be (out, {anchors.shape[0]}, 1, 1), got {linear_w.shape}",
    )
    responses = relu(conv2d_forward(x, anchors, None, stride, pad))
    return conv2d_forward(responses, linear_w, b, 1, 0)
