"""Portable CNN weight container and float32 forward pass.

Binary layout (all integers ``u32`` little-endian, all floats ``f32``
little-endian):

====================  =========================================================
magic                 ``SRW1``
version               ``1``
input spec            height, width, channels
n_layers              record count
layer records         kind tag, then the payload listed below
====================  =========================================================

Layer kinds:

====  ===============  =========================================================
tag   layer            payload
====  ===============  =========================================================
1     conv2d           kh, kw, cin, cout; kernel ``[kh][kw][cin][cout]``;
                       bias ``[cout]`` (stride 1, zero-padded 'same')
2     dense            n_in, n_out; weights ``[n_in][n_out]``; bias ``[n_out]``
3     relu             none
4     maxpool2         none (2x2 window, stride 2, floor on odd dims)
5     flatten          none (row-major over ``(H, W, C)``)
6     global_avg_pool  none (spatial mean per channel)
====  ===============  =========================================================

The forward pass accumulates in float32 throughout, matching the exporter
that produces the containers.  Containers whose dense layers are fed only
through global average pooling are spatially flexible: they accept any
input side with the declared channel count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from saliency_attacks.backend import ClassifierBackend

WEIGHTS_MAGIC = b"SRW1"
WEIGHTS_VERSION = 1

_CONV, _DENSE, _RELU, _MAXPOOL2, _FLATTEN, _GAP = 1, 2, 3, 4, 5, 6


class ContainerError(ValueError):
    """Corrupt or structurally invalid weight container."""


@dataclass(frozen=True)
class Conv2d:
    kernel: np.ndarray  # (kh, kw, cin, cout) float32
    bias: np.ndarray  # (cout,) float32


@dataclass(frozen=True)
class Dense:
    weights: np.ndarray  # (n_in, n_out) float32
    bias: np.ndarray  # (n_out,) float32


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class MaxPool2:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class PortableWeights:
    """Validated layer chain plus the input spec it was exported for."""

    input_shape: tuple  # (H, W, C)
    layers: tuple

    @property
    def n_classes(self) -> int:
        last = self.layers[-1]
        return int(last.bias.shape[0])

    @property
    def spatially_flexible(self) -> bool:
        """True when no flatten layer pins the dense widths to the input side."""
        return not any(isinstance(layer, Flatten) for layer in self.layers)


def _simulate_shapes(input_shape, layers):
    """Walk the layer chain, raising ContainerError on any incompatibility."""
    shape = tuple(input_shape)
    for i, layer in enumerate(layers):
        if isinstance(layer, Conv2d):
            if len(shape) != 3:
                raise ContainerError(f"layer {i}: conv2d applied to non-spatial input {shape}")
            kh, kw, cin, cout = layer.kernel.shape
            if cin != shape[2]:
                raise ContainerError(
                    f"layer {i}: conv2d expects {cin} channels, chain carries {shape[2]}"
                )
            shape = (shape[0], shape[1], cout)
        elif isinstance(layer, MaxPool2):
            if len(shape) != 3:
                raise ContainerError(f"layer {i}: maxpool applied to non-spatial input {shape}")
            if shape[0] < 2 or shape[1] < 2:
                raise ContainerError(f"layer {i}: maxpool input too small {shape}")
            shape = (shape[0] // 2, shape[1] // 2, shape[2])
        elif isinstance(layer, Flatten):
            if len(shape) != 3:
                raise ContainerError(f"layer {i}: flatten applied to non-spatial input {shape}")
            shape = (shape[0] * shape[1] * shape[2],)
        elif isinstance(layer, GlobalAvgPool):
            if len(shape) != 3:
                raise ContainerError(f"layer {i}: pool applied to non-spatial input {shape}")
            shape = (shape[2],)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ContainerError(f"layer {i}: dense applied to spatial input {shape}")
            n_in, n_out = layer.weights.shape
            if n_in != shape[0]:
                raise ContainerError(f"layer {i}: dense expects {n_in} inputs, chain carries {shape[0]}")
            shape = (n_out,)
        elif isinstance(layer, Relu):
            pass
        else:
            raise ContainerError(f"layer {i}: unknown layer {layer!r}")
    if len(shape) != 1 or shape[0] < 2:
        raise ContainerError(f"chain must end in >= 2 class scores, got {shape}")
    return shape


def _validate(weights: PortableWeights) -> PortableWeights:
    if len(weights.layers) == 0:
        raise ContainerError("container holds no layers")
    if not isinstance(weights.layers[-1], Dense):
        raise ContainerError("final layer must be dense")
    _simulate_shapes(weights.input_shape, weights.layers)
    return weights


def save_weights(weights: PortableWeights, path) -> None:
    """Serialize a layer chain to the SRW1 container."""
    _validate(weights)
    h, w, c = weights.input_shape
    out = [WEIGHTS_MAGIC, struct.pack("<IIIII", WEIGHTS_VERSION, h, w, c, len(weights.layers))]
    for layer in weights.layers:
        if isinstance(layer, Conv2d):
            kh, kw, cin, cout = layer.kernel.shape
            out.append(struct.pack("<IIIII", _CONV, kh, kw, cin, cout))
            out.append(np.ascontiguousarray(layer.kernel, dtype="<f4").tobytes())
            out.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
        elif isinstance(layer, Dense):
            n_in, n_out = layer.weights.shape
            out.append(struct.pack("<III", _DENSE, n_in, n_out))
            out.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            out.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
        elif isinstance(layer, Relu):
            out.append(struct.pack("<I", _RELU))
        elif isinstance(layer, MaxPool2):
            out.append(struct.pack("<I", _MAXPOOL2))
        elif isinstance(layer, Flatten):
            out.append(struct.pack("<I", _FLATTEN))
        elif isinstance(layer, GlobalAvgPool):
            out.append(struct.pack("<I", _GAP))
        else:
            raise ContainerError(f"cannot serialize layer {layer!r}")
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise ContainerError(f"truncated weight container: {self.path!r}")
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals[0] if count == 1 else vals

    def f32(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()


def load_weights(path) -> PortableWeights:
    """Parse and validate an SRW1 container."""
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != WEIGHTS_MAGIC:
        raise ContainerError(f"not an SRW1 weight container: {path!r}")
    version = reader.u32()
    if version != WEIGHTS_VERSION:
        raise ContainerError(f"unsupported container version {version}")
    h, w, c = reader.u32(3)
    n_layers = reader.u32()
    layers = []
    for _ in range(n_layers):
        kind = reader.u32()
        if kind == _CONV:
            kh, kw, cin, cout = reader.u32(4)
            kernel = reader.f32(kh * kw * cin * cout).reshape(kh, kw, cin, cout)
            bias = reader.f32(cout)
            layers.append(Conv2d(kernel, bias))
        elif kind == _DENSE:
            n_in, n_out = reader.u32(2)
            mat = reader.f32(n_in * n_out).reshape(n_in, n_out)
            bias = reader.f32(n_out)
            layers.append(Dense(mat, bias))
        elif kind == _RELU:
            layers.append(Relu())
        elif kind == _MAXPOOL2:
            layers.append(MaxPool2())
        elif kind == _FLATTEN:
            layers.append(Flatten())
        elif kind == _GAP:
            layers.append(GlobalAvgPool())
        else:
            raise ContainerError(f"unknown layer tag {kind} in {path!r}")
    return _validate(PortableWeights((h, w, c), tuple(layers)))


def _conv2d_same(x: np.ndarray, layer: Conv2d) -> np.ndarray:
    kh, kw, cin, cout = layer.kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((ph, kh - 1 - ph), (pw, kw - 1 - pw), (0, 0)))
    windows = sliding_window_view(padded, (kh, kw), axis=(0, 1))  # (H, W, C, kh, kw)
    windows = windows.transpose(0, 1, 3, 4, 2)  # (H, W, kh, kw, C)
    h, w = x.shape[:2]
    flat = np.ascontiguousarray(windows, dtype=np.float32).reshape(h * w, kh * kw * cin)
    kernel = layer.kernel.reshape(kh * kw * cin, cout)
    return (flat @ kernel + layer.bias).reshape(h, w, cout)


def infer(weights: PortableWeights, x: np.ndarray) -> np.ndarray:
    """Run the forward pass; returns the final class scores as float32."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) input, got shape {x.shape}")
    exp_h, exp_w, exp_c = weights.input_shape
    if x.shape[2] != exp_c:
        raise ValueError(f"input has {x.shape[2]} channels, container expects {exp_c}")
    if not weights.spatially_flexible and x.shape[:2] != (exp_h, exp_w):
        raise ValueError(f"input {x.shape[:2]} does not match container spec {(exp_h, exp_w)}")
    _simulate_shapes(x.shape, weights.layers)
    out = x
    for layer in weights.layers:
        if isinstance(layer, Conv2d):
            out = _conv2d_same(out, layer)
        elif isinstance(layer, Relu):
            out = np.maximum(out, np.float32(0))
        elif isinstance(layer, MaxPool2):
            h2, w2 = out.shape[0] // 2, out.shape[1] // 2
            out = out[: h2 * 2, : w2 * 2].reshape(h2, 2, w2, 2, -1).max(axis=(1, 3))
        elif isinstance(layer, Flatten):
            out = out.reshape(-1)
        elif isinstance(layer, GlobalAvgPool):
            out = out.mean(axis=(0, 1), dtype=np.float32)
        elif isinstance(layer, Dense):
            out = out @ layer.weights + layer.bias
    return np.asarray(out, dtype=np.float32)


class EmbeddedBackend(ClassifierBackend):
    """Deterministic in-process classifier over a portable weight container."""

    def __init__(self, weights: PortableWeights):
        self.weights = weights
        self.n_classes = weights.n_classes

    @property
    def input_shape(self):
        return None if self.weights.spatially_flexible else self.weights.input_shape

    @classmethod
    def from_file(cls, path) -> "EmbeddedBackend":
        return cls(load_weights(path))

    def raw_logits(self, x: np.ndarray) -> np.ndarray:
        return infer(self.weights, x)
