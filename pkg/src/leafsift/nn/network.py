"""Network definitions: layer variants, shape inference, and forward passes.

A network is an ordered list of layer specs plus an input shape; parameters
live separately in a :class:`~leafsift.nn.weights.WeightStore` keyed by
``layerNN.weight`` / ``layerNN.bias``.  Shape inference runs ahead of
execution and the executor asserts the two agree.

``build_architecture`` provides the six canonical classifiers: five large
inference-only networks and the small trainable conv + ternary-filter model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..errors import MissingWeight, ShapeMismatch, UnknownArchitecture
from . import ops

# Default seed for ternary filter banks in built-in architectures.
DEFAULT_LBC_SEED = 42


@dataclass(frozen=True)
class Conv2d:
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class DepthwiseConv2d:
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int


@dataclass(frozen=True)
class AvgPoolGlobal:
    pass


@dataclass(frozen=True)
class Dense:
    out_dim: int


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class ResidualAdd:
    from_layer_index: int


@dataclass(frozen=True)
class Lbc:
    n_anchor_filters: int
    sparsity: float
    seed: int
    out_channels: int


@dataclass(frozen=True)
class Flatten:
    pass


LayerSpec = Union[
    Conv2d, DepthwiseConv2d, Relu, MaxPool, AvgPoolGlobal,
    Dense, Softmax, ResidualAdd, Lbc, Flatten,
]

# Layers with stored parameters.
PARAMETRIC = (Conv2d, DepthwiseConv2d, Dense, Lbc)


@dataclass
class NetworkSpec:
    name: str
    input_shape: tuple[int, int, int]  # (c, h, w)
    layers: list[LayerSpec] = field(default_factory=list)
    class_count: int = 2


def layer_name(index: int) -> str:
    return f"layer{index:02d}"


def infer_shapes(spec: NetworkSpec, batch: int = 1) -> list[tuple[int, ...]]:
    """Output shape of every layer; raises :class:`ShapeMismatch` when the
    stack is inconsistent (including bad ResidualAdd references)."""
    c, h, w = spec.input_shape
    shapes: list[tuple[int, ...]] = []
    cur: tuple[int, ...] = (batch, c, h, w)

    def spatial(kernel: int, stride: int, pad: int) -> tuple[int, int]:
        if len(cur) != 4:
            raise ShapeMismatch(f"spatial layer on non-NCHW shape {cur}")
        oh = ops.conv_output_side(cur[2], kernel, stride, pad)
        ow = ops.conv_output_side(cur[3], kernel, stride, pad)
        if oh < 1 or ow < 1:
            raise ShapeMismatch(f"window {kernel} reduces {cur} below 1x1")
        return oh, ow

    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            oh, ow = spatial(layer.kernel, layer.stride, layer.pad)
            cur = (cur[0], layer.out_channels, oh, ow)
        elif isinstance(layer, DepthwiseConv2d):
            oh, ow = spatial(layer.kernel, layer.stride, layer.pad)
            cur = (cur[0], cur[1], oh, ow)
        elif isinstance(layer, Lbc):
            oh, ow = spatial(ops.LBC_KERNEL, ops.LBC_STRIDE, ops.LBC_PAD)
            cur = (cur[0], layer.out_channels, oh, ow)
        elif isinstance(layer, MaxPool):
            oh, ow = spatial(layer.kernel, layer.stride, 0)
            cur = (cur[0], cur[1], oh, ow)
        elif isinstance(layer, AvgPoolGlobal):
            if len(cur) != 4:
                raise ShapeMismatch(f"global pool on non-NCHW shape {cur}")
            cur = (cur[0], cur[1], 1, 1)
        elif isinstance(layer, Dense):
            cur = (cur[0], layer.out_dim)
        elif isinstance(layer, Flatten):
            cur = (cur[0], int(np.prod(cur[1:])))
        elif isinstance(layer, ResidualAdd):
            ref = layer.from_layer_index
            if not 0 <= ref < i:
                raise ShapeMismatch(f"layer {i} skip reference {ref} is not earlier")
            if shapes[ref] != cur:
                raise ShapeMismatch(
                    f"layer {i} skip shape {shapes[ref]} != current {cur}"
                )
        elif isinstance(layer, (Relu, Softmax)):
            pass
        else:
            raise ShapeMismatch(f"unknown layer variant {layer!r}")
        shapes.append(cur)

    if shapes and shapes[-1] != (batch, spec.class_count):
        raise ShapeMismatch(
            f"final shape {shapes[-1]} != (batch, {spec.class_count})"
        )
    return shapes


def lbc_input_channels(spec: NetworkSpec, index: int) -> int:
    """Channel count feeding the Lbc layer at ``index``."""
    shapes = infer_shapes(spec)
    c = spec.input_shape[0] if index == 0 else shapes[index - 1][1]
    return int(c)


def lbc_anchor_bank(spec: NetworkSpec, index: int) -> np.ndarray:
    layer = spec.layers[index]
    assert isinstance(layer, Lbc)
    return ops.generate_lbc_anchors(
        layer.n_anchor_filters, lbc_input_channels(spec, index),
        ops.LBC_KERNEL, layer.sparsity, layer.seed,
    )


def layer_forward(
    layer: LayerSpec,
    x: np.ndarray,
    extra: np.ndarray | None = None,
    w: np.ndarray | None = None,
    b: np.ndarray | None = None,
    anchors: np.ndarray | None = None,
) -> np.ndarray:
    """Apply one layer.  ``extra`` is the referenced activation for
    ResidualAdd; parametric layers take their tensors via w/b/anchors."""
    if isinstance(layer, Conv2d):
        if w is None:
            raise MissingWeight("conv layer requires weights")
        return ops.conv2d_forward(x, w, b, layer.stride, layer.pad)
    if isinstance(layer, DepthwiseConv2d):
        if w is None:
            raise MissingWeight("depthwise layer requires weights")
        return ops.depthwise_conv2d_forward(x, w, b, layer.stride, layer.pad)
    if isinstance(layer, Lbc):
        if w is None or anchors is None:
            raise MissingWeight("lbc layer requires anchors and linear weights")
        return ops.lbc_forward(x, anchors, w, b, ops.LBC_STRIDE, ops.LBC_PAD)
    if isinstance(layer, Dense):
        if w is None:
            raise MissingWeight("dense layer requires weights")
        return ops.dense_forward(x, w, b)
    if isinstance(layer, Relu):
        return ops.relu(x)
    if isinstance(layer, MaxPool):
        return ops.maxpool_forward(x, layer.kernel, layer.stride)
    if isinstance(layer, AvgPoolGlobal):
        return ops.avgpool_global_forward(x)
    if isinstance(layer, Softmax):
        return ops.softmax_forward(x)
    if isinstance(layer, ResidualAdd):
        if extra is None:
            raise ShapeMismatch("residual add requires the referenced activation")
        return ops.residual_add(x, extra)
    if isinstance(layer, Flatten):
        return ops.flatten_forward(x)
    raise ShapeMismatch(f"unknown layer variant {layer!r}")


def forward_activations(spec: NetworkSpec, weights, x: np.ndarray) -> list[np.ndarray]:
    """Run the network and keep every layer output.

    Predicted and actual shapes are asserted equal layer by layer.
    """
    from .weights import WeightStore  # local import to avoid a cycle

    assert isinstance(weights, WeightStore)
    expected = infer_shapes(spec, batch=x.shape[0])
    if x.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(f"input {x.shape} != spec input {spec.input_shape}")
    acts: list[np.ndarray] = []
    cur = x
    for i, layer in enumerate(spec.layers):
        w = b = anchors = extra = None
        if isinstance(layer, PARAMETRIC):
            w = weights.require(f"{layer_name(i)}.weight")
            b = weights.require(f"{layer_name(i)}.bias")
        if isinstance(layer, Lbc):
            anchors = lbc_anchor_bank(spec, i)
        if isinstance(layer, ResidualAdd):
            extra = acts[layer.from_layer_index]
        cur = layer_forward(layer, cur, extra=extra, w=w, b=b, anchors=anchors)
        if cur.shape != expected[i]:
            raise ShapeMismatch(
                f"layer {i} ({type(layer).__name__}) produced {cur.shape}, expected {expected[i]}"
            )
        acts.append(cur)
    return acts


def forward(spec: NetworkSpec, weights, x: np.ndarray) -> np.ndarray:
    """Full forward pass; returns the final layer output."""
    return forward_activations(spec, weights, x)[-1]


# --- architecture catalog ------------------------------------------------------

def _vgg(name: str, conv_plan: list[int | str], class_count: int) -> NetworkSpec:
    layers: list[LayerSpec] = []
    for entry in conv_plan:
        if entry == "M":
            layers.append(MaxPool(2, 2))
        else:
            layers.append(Conv2d(int(entry), 3, 1, 1))
            layers.append(Relu())
    layers.append(Flatten())
    for width in (4096, 4096):
        layers.append(Dense(width))
        layers.append(Relu())
    layers += [Dense(class_count), Softmax()]
    return NetworkSpec(name, (3, 224, 224), layers, class_count)


def _alexnet(class_count: int) -> NetworkSpec:
    layers: list[LayerSpec] = [
        Conv2d(96, 11, 4, 0), Relu(), MaxPool(3, 2),
        Conv2d(256, 5, 1, 2), Relu(), MaxPool(3, 2),
        Conv2d(384, 3, 1, 1), Relu(),
        Conv2d(384, 3, 1, 1), Relu(),
        Conv2d(256, 3, 1, 1), Relu(), MaxPool(3, 2),
        Flatten(),
        Dense(4096), Relu(),
        Dense(4096), Relu(),
        Dense(class_count), Softmax(),
    ]
    return NetworkSpec("alexnet", (3, 227, 227), layers, class_count)


def _resnet50(class_count: int) -> NetworkSpec:
    # Bottleneck stacks (mid channels, block count, first stride) per stage.
    stages = [(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)]
    layers: list[LayerSpec] = [Conv2d(64, 7, 2, 3), Relu(), MaxPool(3, 2)]
    for mid, blocks, first_stride in stages:
        out_ch = 4 * mid
        for block in range(blocks):
            entry_index = len(layers) - 1  # layer producing the block input
            stride = first_stride if block == 0 else 1
            layers += [
                Conv2d(mid, 1, stride, 0), Relu(),
                Conv2d(mid, 3, 1, 1), Relu(),
                Conv2d(out_ch, 1, 1, 0),
            ]
            # Identity skip only where the input shape already matches; the
            # layer grammar has no branch for projection shortcuts, so
            # dimension-changing blocks run skip-free.
            if block > 0:
                layers.append(ResidualAdd(entry_index))
            layers.append(Relu())
    layers += [AvgPoolGlobal(), Flatten(), Dense(class_count), Softmax()]
    return NetworkSpec("resnet50", (3, 224, 224), layers, class_count)


def _mobilenet(class_count: int) -> NetworkSpec:
    # (pointwise out channels, depthwise stride) pairs after the stem.
    plan = [
        (64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2),
        (512, 1), (512, 1), (512, 1), (512, 1), (512, 1), (1024, 2), (1024, 1),
    ]
    layers: list[LayerSpec] = [Conv2d(32, 3, 2, 1), Relu()]
    for out_ch, stride in plan:
        layers += [
            DepthwiseConv2d(3, stride, 1), Relu(),
            Conv2d(out_ch, 1, 1, 0), Relu(),
        ]
    layers += [AvgPoolGlobal(), Flatten(), Dense(class_count), Softmax()]
    return NetworkSpec("mobilenet", (3, 224, 224), layers, class_count)


def _cnn_lbp(class_count: int, lbc_seed: int) -> NetworkSpec:
    layers: list[LayerSpec] = [
        Conv2d(16, 3, 1, 1), Relu(), MaxPool(2, 2),
        Lbc(32, 0.9, lbc_seed, 32), MaxPool(2, 2),
        Flatten(),
        Dense(128), Relu(),
        Dense(class_count), Softmax(),
    ]
    return NetworkSpec("cnn_lbp", (3, 64, 64), layers, class_count)


_VGG16_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
               512, 512, 512, "M", 512, 512, 512, "M"]
_VGG19_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
               512, 512, 512, 512, "M", 512, 512, 512, 512, "M"]

ARCHITECTURES = ("alexnet", "vgg16", "vgg19", "resnet50", "mobilenet", "cnn_lbp")


def build_architecture(name: str, class_count: int, lbc_seed: int = DEFAULT_LBC_SEED) -> NetworkSpec:
    """Instantiate one of the built-in classifier networks."""
    if class_count < 2:
        raise ValueError("class_count must be >= 2")
    if name == "alexnet":
        spec = _alexnet(class_count)
    elif name == "vgg16":
        spec = _vgg("vgg16", _VGG16_PLAN, class_count)
    elif name == "vgg19":
        spec = _vgg("vgg19", _VGG19_PLAN, class_count)
    elif name == "resnet50":
        spec = _resnet50(class_count)
    elif name == "mobilenet":
        spec = _mobilenet(class_count)
    elif name == "cnn_lbp":
        spec = _cnn_lbp(class_count, lbc_seed)
    else:
        raise UnknownArchitecture(f"no architecture named {name!r}; options: {ARCHITECTURES}")
    infer_shapes(spec)  # fail fast if a plan is ever inconsistent
    return spec
