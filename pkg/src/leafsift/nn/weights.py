"""Parameter storage and the LFWT weight-file format.

LFWT layout (all integers little-endian):

    magic   4 bytes  "LFWT"
    version u32      1
    count   u32      number of entries
    entry   repeated:
        name_len u16, name UTF-8
        rank     u8
        dims     rank x u32
        data     prod(dims) x float32, little-endian, row-major

Entries are written in network layer order, ``.weight`` before ``.bias``.
Loading validates every entry's shape against the network definition and
requires exactly the parameter set that definition implies.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import BadMagic, MissingWeight, ShapeMismatchWithSpec, Truncated
from .network import (
    Conv2d, Dense, DepthwiseConv2d, Lbc, NetworkSpec,
    infer_shapes, layer_name,
)
from .rng import uniform_stream

_MAGIC = b"LFWT"
_VERSION = 1


class WeightStore:
    """Named parameter tensors for one network."""

    def __init__(self, tensors: dict[str, np.ndarray] | None = None) -> None:
        self.tensors: dict[str, np.ndarray] = dict(tensors or {})

    def require(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingWeight(f"weight store has no entry {name!r}") from None

    def copy(self) -> "WeightStore":
        return WeightStore({k: v.copy() for k, v in self.tensors.items()})

    def total_elements(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def allclose(self, other: "WeightStore") -> bool:
        return set(self.tensors) == set(other.tensors) and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Expected (name -> shape) map for every trainable tensor."""
    shapes: dict[str, tuple[int, ...]] = {}
    cur_c = spec.input_shape[0]
    layer_out = [s for s in infer_shapes(spec)]
    for i, layer in enumerate(spec.layers):
        name = layer_name(i)
        if isinstance(layer, Conv2d):
            shapes[f"{name}.weight"] = (layer.out_channels, cur_c, layer.kernel, layer.kernel)
            shapes[f"{name}.bias"] = (layer.out_channels,)
        elif isinstance(layer, DepthwiseConv2d):
            shapes[f"{name}.weight"] = (cur_c, 1, layer.kernel, layer.kernel)
            shapes[f"{name}.bias"] = (cur_c,)
        elif isinstance(layer, Lbc):
            shapes[f"{name}.weight"] = (layer.out_channels, layer.n_anchor_filters, 1, 1)
            shapes[f"{name}.bias"] = (layer.out_channels,)
        elif isinstance(layer, Dense):
            in_dim = int(np.prod(layer_out[i - 1][1:])) if i else int(np.prod(spec.input_shape))
            shapes[f"{name}.weight"] = (layer.out_dim, in_dim)
            shapes[f"{name}.bias"] = (layer.out_dim,)
        out = layer_out[i]
        cur_c = out[1] if len(out) == 4 else cur_c
    return shapes


def _fan_in_out(name: str, shape: tuple[int, ...]) -> tuple[int, int]:
    if len(shape) == 4:  # conv-style (out, in, k, k)
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    if len(shape) == 2:  # dense (out, in)
        return shape[1], shape[0]
    return shape[0], shape[0]


def init_weights(spec: NetworkSpec, seed: int) -> WeightStore:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.

    Draws come from one SplitMix64 stream in layer order, so a (spec, seed)
    pair always produces bit-identical tensors.
    """
    shapes = param_shapes(spec)
    total = sum(int(np.prod(s)) for n, s in shapes.items() if n.endswith(".weight"))
    draws = uniform_stream(seed, total)
    store = WeightStore()
    pos = 0
    for name, shape in shapes.items():
        if name.endswith(".bias"):
            store.tensors[name] = np.zeros(shape, dtype=np.float32)
            continue
        size = int(np.prod(shape))
        fan_in, fan_out = _fan_in_out(name, shape)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        u = draws[pos : pos + size]
        pos += size
        store.tensors[name] = ((2.0 * u - 1.0) * limit).reshape(shape).astype(np.float32)
    return store


def save_weights(ws: WeightStore) -> bytes:
    """Serialize to LFWT bytes; entries in sorted-name order would also work,
    but insertion order is kept so files mirror layer order."""
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<II", _VERSION, len(ws.tensors))
    for name, tensor in ws.tensors.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    return bytes(blob)


def load_weights(data: bytes, spec: NetworkSpec) -> WeightStore:
    """Parse LFWT bytes and validate shapes against ``spec``."""
    if data[:4] != _MAGIC:
        raise BadMagic(f"expected {_MAGIC!r} header, got {data[:4]!r}")
    pos = 4

    def take(count: int) -> bytes:
        nonlocal pos
        if pos + count > len(data):
            raise Truncated(f"file ends at byte {len(data)}, needed {pos + count}")
        chunk = data[pos : pos + count]
        pos += count
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != _VERSION:
        raise BadMagic(f"unsupported weight file version {version}")

    expected = param_shapes(spec)
    store = WeightStore()
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        payload = take(4 * int(np.prod(dims)) if rank else 4)
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        if name not in expected:
            raise ShapeMismatchWithSpec(f"entry {name!r} not in network definition")
        if tuple(dims) != expected[name]:
            raise ShapeMismatchWithSpec(
                f"entry {name!r} has shape {tuple(dims)}, definition wants {expected[name]}"
            )
        store.tensors[name] = arr
    missing = set(expected) - set(store.tensors)
    if missing:
        raise ShapeMismatchWithSpec(f"weight file lacks entries: {sorted(missing)}")
    return store
