"""Parameter and multiply-accumulate counting.

Parameter rules (bias included):
    Conv2d      (k^2 * c_in + 1) * c_out
    Depthwise   (k^2 + 1) * c
    Dense       (d_in + 1) * d_out
    Lbc         (n_anchors + 1) * c_out        (the fixed bank is free)

MACs are kernel size per output element times output elements, at batch 1.
The fixed ternary bank still performs real multiplies, so Lbc MACs include
both its convolution and the trainable 1x1 recombination.  Element-wise and
pooling layers count zero MACs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .network import (
    AvgPoolGlobal, Conv2d, Dense, DepthwiseConv2d, Flatten, Lbc, MaxPool,
    NetworkSpec, Relu, ResidualAdd, Softmax, infer_shapes, layer_name,
)


@dataclass
class LayerCost:
    name: str
    kind: str
    params: int
    macs: int
    out_shape: tuple[int, ...]


def layer_costs(spec: NetworkSpec) -> list[LayerCost]:
    shapes = infer_shapes(spec)
    costs: list[LayerCost] = []
    cur_c = spec.input_shape[0]
    prev_shape: tuple[int, ...] = (1, *spec.input_shape)
    for i, layer in enumerate(spec.layers):
        out = shapes[i]
        out_elems = int(np.prod(out[1:]))
        params = 0
        macs = 0
        if isinstance(layer, Conv2d):
            params = (layer.kernel**2 * cur_c + 1) * layer.out_channels
            macs = out_elems * layer.kernel**2 * cur_c
        elif isinstance(layer, DepthwiseConv2d):
            params = (layer.kernel**2 + 1) * cur_c
            macs = out_elems * layer.kernel**2
        elif isinstance(layer, Lbc):
            params = (layer.n_anchor_filters + 1) * layer.out_channels
            spatial = int(np.prod(out[2:]))
            anchor_macs = layer.n_anchor_filters * spatial * ops.LBC_KERNEL**2 * cur_c
            mix_macs = out_elems * layer.n_anchor_filters
            macs = anchor_macs + mix_macs
        elif isinstance(layer, Dense):
            d_in = int(np.prod(prev_shape[1:]))
            params = (d_in + 1) * layer.out_dim
            macs = d_in * layer.out_dim
        elif isinstance(layer, (Relu, MaxPool, AvgPoolGlobal, Softmax, ResidualAdd, Flatten)):
            pass
        costs.append(LayerCost(layer_name(i), type(layer).__name__, params, macs, out))
        prev_shape = out
        if len(out) == 4:
            cur_c = out[1]
    return costs


def count_costs(spec: NetworkSpec) -> tuple[int, int]:
    """(total parameters, total MACs) for one sample through the network."""
    costs = layer_costs(spec)
    return sum(c.params for c in costs), sum(c.macs for c in costs)
