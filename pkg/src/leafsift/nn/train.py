"""Backpropagation and SGD for the small trainable network family.

Supported layers: Conv2d, the trainable half of Lbc, Dense, Relu, MaxPool,
Flatten, and a final Softmax trained with mean cross-entropy.  Anything else
(residual networks, depthwise stacks, global pooling) raises
:class:`UnsupportedLayerForTraining` -- the large architectures are
inference-only here.

Gradients are accumulated in float64; the parameter update casts back to the
stored dtype.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch, UnsupportedLayerForTraining
from . import ops
from .network import (
    Conv2d, Dense, Flatten, Lbc, MaxPool, NetworkSpec, Relu, Softmax,
    infer_shapes, layer_name, lbc_anchor_bank,
)
from .weights import WeightStore

_TRAINABLE = (Conv2d, Lbc, Dense, Relu, MaxPool, Flatten)


def validate_trainable(spec: NetworkSpec) -> None:
    if not spec.layers or not isinstance(spec.layers[-1], Softmax):
        raise UnsupportedLayerForTraining("training requires a final softmax layer")
    for i, layer in enumerate(spec.layers[:-1]):
        if not isinstance(layer, _TRAINABLE):
            raise UnsupportedLayerForTraining(
                f"layer {i} ({type(layer).__name__}) is not supported by the trainer"
            )


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits, (p - y)/n."""
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch(f"logits {logits.shape} vs labels {labels.shape}")
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    n = logits.shape[0]
    loss = float(-log_p[np.arange(n), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _conv_backward(
    x: np.ndarray, w: np.ndarray, stride: int, pad: int, dy: np.ndarray, need_dx: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    n, c, h, wd = x.shape
    oc, _, k, _ = w.shape
    oh, ow = dy.shape[2], dy.shape[3]
    dy64 = dy.astype(np.float64)
    win = ops._conv_windows(x, k, stride, pad)
    dw = np.tensordot(dy64, win.astype(np.float64), axes=([0, 2, 3], [0, 2, 3]))
    db = dy64.sum(axis=(0, 2, 3))
    dx = None
    if need_dx:
        dx_pad = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
        w64 = w.astype(np.float64)
        for kh in range(k):
            for kw in range(k):
                contrib = np.tensordot(dy64, w64[:, :, kh, kw], axes=([1], [0]))
                dx_pad[:, :, kh : kh + stride * oh : stride, kw : kw + stride * ow : stride] += (
                    contrib.transpose(0, 3, 1, 2)
                )
        dx = dx_pad[:, :, pad : pad + h, pad : pad + wd] if pad else dx_pad
    return dw, db, dx


def _maxpool_backward(x: np.ndarray, kernel: int, stride: int, dy: np.ndarray) -> np.ndarray:
    n, c, _, _ = x.shape
    oh, ow = dy.shape[2], dy.shape[3]
    win = ops._conv_windows(x, kernel, stride, 0)
    flat = win.reshape(n, c, oh, ow, kernel * kernel)
    argmax = flat.argmax(axis=-1)  # first maximum wins on ties
    ni, ci, yi, xi = np.indices((n, c, oh, ow))
    rows = yi * stride + argmax // kernel
    cols = xi * stride + argmax % kernel
    dx = np.zeros(x.shape, dtype=np.float64)
    np.add.at(dx, (ni, ci, rows, cols), dy.astype(np.float64))
    return dx


def compute_gradients(
    spec: NetworkSpec, weights: WeightStore, x: np.ndarray, labels: np.ndarray
) -> tuple[dict[str, np.ndarray], float]:
    """Parameter gradients of the mean cross-entropy loss, plus the loss."""
    validate_trainable(spec)
    infer_shapes(spec, batch=x.shape[0])

    # Forward pass keeping each layer input (and lbc hidden activations).
    inputs: list[np.ndarray] = []
    hidden: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    anchors: dict[int, np.ndarray] = {}
    cur = x
    for i, layer in enumerate(spec.layers):
        inputs.append(cur)
        if isinstance(layer, Conv2d):
            w = weights.require(f"{layer_name(i)}.weight")
            b = weights.require(f"{layer_name(i)}.bias")
            cur = ops.conv2d_forward(cur, w, b, layer.stride, layer.pad)
        elif isinstance(layer, Lbc):
            w = weights.require(f"{layer_name(i)}.weight")
            b = weights.require(f"{layer_name(i)}.bias")
            anchors[i] = lbc_anchor_bank(spec, i)
            pre = ops.conv2d_forward(cur, anchors[i], None, ops.LBC_STRIDE, ops.LBC_PAD)
            post = ops.relu(pre)
            hidden[i] = (pre, post)
            cur = ops.conv2d_forward(post, w, b, 1, 0)
        elif isinstance(layer, Dense):
            w = weights.require(f"{layer_name(i)}.weight")
            b = weights.require(f"{layer_name(i)}.bias")
            cur = ops.dense_forward(cur, w, b)
        elif isinstance(layer, Relu):
            cur = ops.relu(cur)
        elif isinstance(layer, MaxPool):
            cur = ops.maxpool_forward(cur, layer.kernel, layer.stride)
        elif isinstance(layer, Flatten):
            cur = ops.flatten_forward(cur)
        elif isinstance(layer, Softmax):
            pass  # folded into the loss below

    logits = inputs[-1]  # input of the final softmax
    loss, dy = softmax_cross_entropy(logits, labels)

    grads: dict[str, np.ndarray] = {}
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        x_in = inputs[i]
        if isinstance(layer, Conv2d):
            w = weights.require(f"{layer_name(i)}.weight")
            dw, db, dy = _conv_backward(x_in, w, layer.stride, layer.pad, dy, need_dx=i > 0)
            grads[f"{layer_name(i)}.weight"] = dw
            grads[f"{layer_name(i)}.bias"] = db
        elif isinstance(layer, Lbc):
            w = weights.require(f"{layer_name(i)}.weight")
            pre, post = hidden[i]
            dw, db, dpost = _conv_backward(post, w, 1, 0, dy, need_dx=True)
            grads[f"{layer_name(i)}.weight"] = dw
            grads[f"{layer_name(i)}.bias"] = db
            dpre = dpost * (pre > 0)
            if i > 0:
                _, _, dy = _conv_backward(x_in, anchors[i], ops.LBC_STRIDE, ops.LBC_PAD, dpre)
            else:
                dy = dpre
        elif isinstance(layer, Dense):
            w = weights.require(f"{layer_name(i)}.weight")
            flat = x_in.reshape(x_in.shape[0], -1).astype(np.float64)
            dy64 = dy.astype(np.float64)
            grads[f"{layer_name(i)}.weight"] = dy64.T @ flat
            grads[f"{layer_name(i)}.bias"] = dy64.sum(axis=0)
            dy = (dy64 @ w.astype(np.float64)).reshape(x_in.shape)
        elif isinstance(layer, Relu):
            dy = dy * (x_in > 0)
        elif isinstance(layer, MaxPool):
            dy = _maxpool_backward(x_in, layer.kernel, layer.stride, dy)
        elif isinstance(layer, Flatten):
            dy = dy.reshape(x_in.shape)
    return grads, loss


def backward_and_step(
    spec: NetworkSpec, weights: WeightStore, x: np.ndarray, labels: np.ndarray, lr: float
) -> tuple[WeightStore, float]:
    """One SGD step in place: p <- p - lr * dL/dp.  Returns (store, loss)."""
    grads, loss = compute_gradients(spec, weights, x, labels)
    for name, grad in grads.items():
        tensor = weights.tensors[name]
        tensor -= (lr * grad).astype(tensor.dtype)
    return weights, loss
