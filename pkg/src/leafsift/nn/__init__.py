"""Minimal NCHW tensor runtime: layer kernels, network specs, weights,
cost counting, and SGD training for the small conv + ternary-filter model."""

from .costs import LayerCost, count_costs, layer_costs
from .network import (
    ARCHITECTURES, DEFAULT_LBC_SEED,
    AvgPoolGlobal, Conv2d, Dense, DepthwiseConv2d, Flatten, Lbc, LayerSpec,
    MaxPool, NetworkSpec, Relu, ResidualAdd, Softmax,
    build_architecture, forward, forward_activations, infer_shapes,
    layer_forward, lbc_anchor_bank,
)
from .ops import (
    conv2d_forward, depthwise_conv2d_forward, dense_forward,
    generate_lbc_anchors, lbc_forward, lbp_map,
)
from .rng import SplitMix64, splitmix64_stream, uniform_stream
from .train import backward_and_step, compute_gradients, softmax_cross_entropy, validate_trainable
from .weights import WeightStore, init_weights, load_weights, param_shapes, save_weights

__all__ = [
    "ARCHITECTURES", "DEFAULT_LBC_SEED",
    "AvgPoolGlobal", "Conv2d", "Dense", "DepthwiseConv2d", "Flatten", "Lbc",
    "LayerCost", "LayerSpec", "MaxPool", "NetworkSpec", "Relu", "ResidualAdd",
    "Softmax", "SplitMix64", "WeightStore",
    "backward_and_step", "build_architecture", "compute_gradients",
    "conv2d_forward", "count_costs", "dense_forward",
    "depthwise_conv2d_forward", "forward", "forward_activations",
    "generate_lbc_anchors", "infer_shapes", "init_weights", "layer_costs",
    "layer_forward", "lbc_anchor_bank", "lbc_forward", "lbp_map",
    "load_weights", "param_shapes", "save_weights", "softmax_cross_entropy",
    "splitmix64_stream", "uniform_stream", "validate_trainable",
]
