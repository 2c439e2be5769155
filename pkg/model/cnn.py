"""CNN8by8: four conv+relu+maxpool blocks and a dense head.

Shape trace on a [1, 8, 8] input:

    block1  conv 1->2 3x3 valid   8 -> 6, pool k2 s2  -> 3   (GradCAM target)
    block2  conv 2->3 3x3 pad 1   3 -> 3, pool k2 s1  -> 2
    block3  conv 3->4 2x2 valid   2 -> 1, pool k1 s1  -> 1
    block4  conv 4->4 1x1         1 -> 1, pool k1 s1  -> 1
    head    dense 4 -> 2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from constants import IMAGE_SIZE, N_CLASSES
from engine import functional as F
from engine.exceptions import FormatError
from engine.save_load import BinaryReader, atomic_write_bytes, pack, pack_array, read_bytes
from engine.tensor import Tape, Tensor
from model.base import Classifier, ForwardPass

MAGIC = b"CNN8W1"


@dataclass(frozen=True)
class BlockSpec:
    name: str
    c_in: int
    c_out: int
    kernel: int
    padding: int
    pool_k: int
    pool_stride: int


DEFAULT_LAYOUT: Tuple[BlockSpec, ...] = (
    BlockSpec("block1", 1, 2, 3, 0, 2, 2),
    BlockSpec("block2", 2, 3, 3, 1, 2, 1),
    BlockSpec("block3", 3, 4, 2, 0, 1, 1),
    BlockSpec("block4", 4, 4, 1, 0, 1, 1),
)


def spatial_trace(layout: Sequence[BlockSpec], size: int = IMAGE_SIZE) -> List[int]:
    """Spatial size after every conv and every pool, starting with the input."""
    trace = [size]
    for block in layout:
        size = size + 2 * block.padding - block.kernel + 1
        trace.append(size)
        size = (size - block.pool_k) // block.pool_stride + 1
        trace.append(size)
    return trace


class Cnn8by8(Classifier):
    def __init__(self, layout: Sequence[BlockSpec] = DEFAULT_LAYOUT,
                 n_classes: int = N_CLASSES) -> None:
        self.layout = tuple(layout)
        self.n_classes = n_classes
        if not self.layout:
            raise FormatError("layout has no blocks")
        trace = spatial_trace(self.layout)
        if min(trace) < 1:
            raise FormatError(f"layout collapses below 1x1: {trace}")
        self.head_in = self.layout[-1].c_out * trace[-1] ** 2
        self.feature_layers = tuple(b.name for b in self.layout)

        self.kernels: List[Tensor] = []
        self.biases: List[Tensor] = []
        for b in self.layout:
            self.kernels.append(Tensor(np.zeros((b.c_out, b.c_in, b.kernel, b.kernel)),
                                       name=f"{b.name}.kernel"))
            self.biases.append(Tensor(np.zeros(b.c_out), name=f"{b.name}.bias"))
        self.head_weight = Tensor(np.zeros((n_classes, self.head_in)), name="head.weight")
        self.head_bias = Tensor(np.zeros(n_classes), name="head.bias")

    def parameters(self) -> List[Tensor]:
        params: List[Tensor] = []
        for kernel, bias in zip(self.kernels, self.biases):
            params += [kernel, bias]
        return params + [self.head_weight, self.head_bias]

    def fan_in(self, index: int) -> int:
        """Fan-in of the layer owning parameters()[index]."""
        layer = index // 2
        if layer < len(self.layout):
            b = self.layout[layer]
            return b.c_in * b.kernel * b.kernel
        return self.head_in

    def spatial_size(self, layer: str) -> int:
        trace = spatial_trace(self.layout)
        position = self.feature_layers.index(layer)
        return trace[2 * position + 2]

    # -----------------------------------------------------------------------
    # Forward
    # -----------------------------------------------------------------------

    def forward(self, tape: Tape, image: Tensor) -> ForwardPass:
        h = image
        activations = {}
        for b, kernel, bias in zip(self.layout, self.kernels, self.biases):
            h = tape.conv2d(h, kernel, bias, padding=b.padding, name=f"{b.name}.conv")
            h = tape.relu(h, name=f"{b.name}.relu")
            h = tape.maxpool2d(h, b.pool_k, b.pool_stride, name=b.name)
            activations[b.name] = h
        logits = tape.dense(tape.flatten(h), self.head_weight, self.head_bias, name="logits")
        return ForwardPass(tape=tape, image=image, logits=logits, activations=activations)

    def predict_logits(self, images: np.ndarray) -> np.ndarray:
        h = np.asarray(images, dtype=np.float64)
        for b, kernel, bias in zip(self.layout, self.kernels, self.biases):
            h = F.relu_forward(F.conv2d_forward(h, kernel.data, bias.data, b.padding))
            h, _ = F.maxpool2d_forward(h, b.pool_k, b.pool_stride)
        flat = h.reshape(h.shape[:-3] + (-1,))
        return F.dense_forward(flat, self.head_weight.data, self.head_bias.data)

    def __repr__(self) -> str:
        return f"Cnn8by8(blocks={len(self.layout)}, params={self.parameter_count()})"


def build_cnn8by8(seed: int, layout: Sequence[BlockSpec] = DEFAULT_LAYOUT) -> Cnn8by8:
    """Deterministic init: every weight and bias uniform in ±1/sqrt(fan_in)."""
    model = Cnn8by8(layout)
    rng = np.random.default_rng(seed)
    for index, param in enumerate(model.parameters()):
        bound = 1.0 / math.sqrt(model.fan_in(index))
        param.data = rng.uniform(-bound, bound, size=param.shape)
    return model


# ---------------------------------------------------------------------------
# Serialization: magic, layout descriptor, f64 weights in declaration order
# ---------------------------------------------------------------------------

def encode_model(model: Cnn8by8) -> bytes:
    parts = [MAGIC, pack("II", len(model.layout), model.n_classes)]
    for b in model.layout:
        name = b.name.encode("utf-8")
        parts.append(pack("B", len(name)) + name)
        parts.append(pack("6I", b.c_in, b.c_out, b.kernel, b.padding, b.pool_k, b.pool_stride))
    for param in model.parameters():
        parts.append(pack_array(param.data.reshape(-1), "f8"))
    return b"".join(parts)


def decode_model(payload: bytes, path: str | None = None) -> Cnn8by8:
    reader = BinaryReader(payload, path)
    reader.expect_magic(MAGIC)
    n_blocks, n_classes = reader.unpack("II")
    layout: List[BlockSpec] = []
    for _ in range(n_blocks):
        (name_len,) = reader.unpack("B")
        name = reader.raw(name_len).decode("utf-8")
        block_offset = reader.offset
        spec = BlockSpec(name, *reader.unpack("6I"))
        expected_in = layout[-1].c_out if layout else 1
        if spec.c_in != expected_in:
            raise FormatError(f"block {name} expects {spec.c_in} input channels, "
                              f"previous block yields {expected_in}", block_offset, path)
        layout.append(spec)
    try:
        model = Cnn8by8(layout, n_classes)
    except FormatError as exc:
        raise FormatError(str(exc), reader.offset, path) from None
    for param in model.parameters():
        param.data = reader.array("f8", param.size).reshape(param.shape)
    reader.expect_end()
    return model


def save_model(path: str, model: Cnn8by8) -> None:
    atomic_write_bytes(path, encode_model(model))


def load_model(path: str) -> Cnn8by8:
    return decode_model(read_bytes(path), path)
