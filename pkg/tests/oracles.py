"""Independent brute-force reference implementations used by the tests.

Everything here is written the slow, obvious way (explicit loops, direct
definitions) so it shares no code path with the library; agreement between
the two is the evidence the tests rely on.
"""

from collections import deque

import numpy as np


# --- imaging -----------------------------------------------------------------

def reflect101(i: int, n: int) -> int:
    """Reflect an out-of-range index without repeating the edge sample."""
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = i % period
    return period - i if i >= n else i


def blur_direct2d(values: np.ndarray, sigma: float) -> np.ndarray:
    """Dense 2-D convolution with the outer-product Gaussian kernel."""
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-(xs**2) / (2.0 * sigma**2))
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    h, w = values.shape
    out = np.zeros_like(values)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    acc += (
                        k2[dy + radius, dx + radius]
                        * values[reflect101(y + dy, h), reflect101(x + dx, w)]
                    )
            out[y, x] = acc
    return out


# --- segmentation --------------------------------------------------------------

def flood_fill_background(within: np.ndarray) -> np.ndarray:
    """Set of pixels 4-connected to a border pixel through `within` cells."""
    h, w = within.shape
    seeds = [
        (y, x)
        for y in range(h)
        for x in range(w)
        if (y in (0, h - 1) or x in (0, w - 1)) and within[y, x]
    ]
    visited = np.zeros((h, w), dtype=bool)
    stack = deque(seeds)
    for y, x in seeds:
        visited[y, x] = True
    while stack:
        y, x = stack.pop()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and within[ny, nx] and not visited[ny, nx]:
                visited[ny, nx] = True
                stack.append((ny, nx))
    return visited


def median_by_sorting(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    if n % 2:
        return float(ordered[n // 2])
    return 0.5 * (ordered[n // 2 - 1] + ordered[n // 2])


# --- neural runtime --------------------------------------------------------------

def conv2d_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, pad: int) -> np.ndarray:
    n, c, h, wd = x.shape
    oc, _, k, _ = w.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    xp[:, :, pad : pad + h, pad : pad + wd] = x
    out = np.zeros((n, oc, oh, ow), dtype=np.float64)
    for ni in range(n):
        for oi in range(oc):
            for yi in range(oh):
                for xi in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (
                                    float(xp[ni, ci, yi * stride + ky, xi * stride + kx])
                                    * float(w[oi, ci, ky, kx])
                                )
                    out[ni, oi, yi, xi] = acc + (float(b[oi]) if b is not None else 0.0)
    return out


def depthwise_as_grouped_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, pad: int) -> np.ndarray:
    """Depthwise conv expressed as a block-diagonal standard convolution."""
    c, _, k, _ = w.shape
    big = np.zeros((c, c, k, k), dtype=np.float64)
    for ci in range(c):
        big[ci, ci] = w[ci, 0]
    return conv2d_loops(x, big, b, stride, pad)


def dense_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    flat = x.reshape(x.shape[0], -1)
    n, d = flat.shape
    out_dim = w.shape[0]
    out = np.zeros((n, out_dim), dtype=np.float64)
    for ni in range(n):
        for oi in range(out_dim):
            acc = 0.0
            for di in range(d):
                acc += float(flat[ni, di]) * float(w[oi, di])
            out[ni, oi] = acc + (float(b[oi]) if b is not None else 0.0)
    return out


# --- metrics ----------------------------------------------------------------------

def tally_confusion(true_labels, predicted_labels, k: int) -> np.ndarray:
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[t, p] += 1
    return counts


def roc_points_by_enumeration(scores, binary_labels) -> list[tuple[float, float]]:
    """One point per distinct threshold, plus (0, 0)."""
    scores = list(map(float, scores))
    labels = list(map(int, binary_labels))
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0)]
    for threshold in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= threshold and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= threshold and y == 0)
        points.append((fp / n_neg, tp / n_pos))
    return points


def auc_mann_whitney(scores, binary_labels) -> float:
    """Pairwise ranking statistic; ties count half."""
    pos = [float(s) for s, y in zip(scores, binary_labels) if y == 1]
    neg = [float(s) for s, y in zip(scores, binary_labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


# --- splitting ----------------------------------------------------------------------

def fnv1a64_alt(data: bytes) -> int:
    """FNV-1a written functionally, as an independent cross-check."""
    from functools import reduce

    return reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) % (1 << 64), data, 0xCBF29CE484222325
    )
