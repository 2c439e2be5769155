"""Tensor and Tape: a Wengert-list reverse-mode differentiation engine.

Primitives are methods on Tape. Each call computes its output eagerly with the
kernels in engine.functional and appends one Node holding the operands, the
forward values the backward rule needs, and the output. backward() walks the
list in reverse and accumulates adjoints.

    tape = Tape()
    x = Tensor(image)
    h = tape.relu(tape.conv2d(x, kernel, bias, padding=1))
    loss = tape.sum(h)
    (grad_x,) = backward(tape, loss, [x])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from engine import functional as F
from engine.exceptions import ContractError, DimensionError, ParameterError


@dataclass(eq=False)
class Tensor:
    """Dense float64 array. Identity (not value) decides tape membership."""
    data: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"


@dataclass
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    saved: Dict[str, Any] = field(default_factory=dict)


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self) -> None:
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(self, op: str, inputs: Sequence[Tensor], out: np.ndarray,
                name: str = "", **saved: Any) -> Tensor:
        output = Tensor(out, name=name)
        self.nodes.append(Node(op, tuple(inputs), output, saved))
        return output

    def produced(self, tensor: Tensor) -> bool:
        return any(node.output is tensor for node in self.nodes)

    # -----------------------------------------------------------------------
    # Primitives used by CNN8by8
    # -----------------------------------------------------------------------

    def conv2d(self, x: Tensor, kernel: Tensor, bias: Tensor, padding: int = 0,
               name: str = "") -> Tensor:
        if x.data.ndim != 3:
            raise DimensionError(f"conv2d input must be [C,H,W], got {x.shape}", axis="input")
        out = F.conv2d_forward(x.data, kernel.data, bias.data, padding)
        return self._record("conv2d", (x, kernel, bias), out, name, padding=padding)

    def maxpool2d(self, x: Tensor, k: int, stride: int, name: str = "") -> Tensor:
        if x.data.ndim != 3:
            raise DimensionError(f"maxpool2d input must be [C,H,W], got {x.shape}",
                                 axis="input")
        out, argmax = F.maxpool2d_forward(x.data, k, stride)
        return self._record("maxpool2d", (x,), out, name, k=k, stride=stride, argmax=argmax)

    def relu(self, x: Tensor, name: str = "") -> Tensor:
        return self._record("relu", (x,), F.relu_forward(x.data), name)

    def dense(self, x: Tensor, weight: Tensor, bias: Tensor, name: str = "") -> Tensor:
        if x.data.ndim != 1:
            raise DimensionError(f"dense input must be a vector, got {x.shape}", axis="input")
        out = F.dense_forward(x.data, weight.data, bias.data)
        return self._record("dense", (x, weight, bias), out, name)

    def cross_entropy_loss(self, logits: Tensor, label: int, name: str = "") -> Tensor:
        if logits.data.ndim != 1:
            raise DimensionError(f"logits must be a vector, got {logits.shape}", axis="K")
        n_classes = logits.shape[0]
        if not 0 <= label < n_classes:
            raise ParameterError(f"label {label} out of range for {n_classes} classes")
        loss = -F.log_softmax(logits.data)[label]
        return self._record("cross_entropy", (logits,), np.asarray(loss), name,
                            label=label, probs=F.softmax(logits.data))

    # -----------------------------------------------------------------------
    # Plumbing primitives
    # -----------------------------------------------------------------------

    def flatten(self, x: Tensor, name: str = "") -> Tensor:
        return self._record("reshape", (x,), x.data.reshape(-1), name, shape=x.shape)

    def take(self, x: Tensor, index: int, name: str = "") -> Tensor:
        """Select one entry of a vector as a scalar (e.g. the logit of class c)."""
        if x.data.ndim != 1:
            raise DimensionError(f"take needs a vector, got {x.shape}", axis="input")
        if not 0 <= index < x.shape[0]:
            raise ParameterError(f"index {index} out of range for length {x.shape[0]}")
        return self._record("take", (x,), np.asarray(x.data[index]), name, index=index)

    def sum(self, x: Tensor, name: str = "") -> Tensor:
        return self._record("sum", (x,), np.asarray(x.data.sum()), name)

    def scale(self, x: Tensor, factor: float, name: str = "") -> Tensor:
        return self._record("scale", (x,), x.data * factor, name, factor=float(factor))

    def add(self, a: Tensor, b: Tensor, name: str = "") -> Tensor:
        if a.shape != b.shape:
            raise DimensionError(f"add of {a.shape} and {b.shape}", axis="shape")
        return self._record("add", (a, b), a.data + b.data, name)


# ---------------------------------------------------------------------------
# Backward rules: op -> fn(node, upstream) -> tuple of input gradients
# ---------------------------------------------------------------------------

def _conv2d_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    x, kernel, _ = node.inputs
    return F.conv2d_backward(x.data, kernel.data, node.saved["padding"], g)


def _maxpool2d_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    (x,) = node.inputs
    s = node.saved
    return (F.maxpool2d_backward(x.shape, s["argmax"], s["k"], s["stride"], g),)


def _relu_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    return (F.relu_backward(node.inputs[0].data, g),)


def _dense_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    x, weight, _ = node.inputs
    return weight.data.T @ g, np.outer(g, x.data), g.copy()


def _cross_entropy_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    grad = node.saved["probs"].copy()
    grad[node.saved["label"]] -= 1.0
    return (grad * g,)


def _reshape_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    return (g.reshape(node.saved["shape"]),)


def _take_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    grad = np.zeros(node.inputs[0].shape)
    grad[node.saved["index"]] = g
    return (grad,)


def _sum_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    return (np.full(node.inputs[0].shape, float(g)),)


def _scale_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    return (g * node.saved["factor"],)


def _add_rule(node: Node, g: np.ndarray) -> Tuple[np.ndarray, ...]:
    return g, g


BACKWARD_RULES: Dict[str, Callable[[Node, np.ndarray], Tuple[np.ndarray, ...]]] = {
    "conv2d": _conv2d_rule,
    "maxpool2d": _maxpool2d_rule,
    "relu": _relu_rule,
    "dense": _dense_rule,
    "cross_entropy": _cross_entropy_rule,
    "reshape": _reshape_rule,
    "take": _take_rule,
    "sum": _sum_rule,
    "scale": _scale_rule,
    "add": _add_rule,
}


def backward(tape: Tape, output: Tensor, wrt: Sequence[Tensor],
             seed: Optional[float] = None) -> List[np.ndarray]:
    """Reverse-mode gradients of a scalar `output` w.r.t. each tensor in `wrt`.

    `wrt` may hold leaves or intermediate tensors recorded on the tape.
    Tensors the output does not depend on get zero gradients. The tape and
    its forward values are left untouched, so backward may be called again.
    """
    if output.size != 1:
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
    if not tape.produced(output):
        raise ContractError("output was not recorded on this tape")

    adjoints: Dict[int, np.ndarray] = {id(output): np.full(output.shape, 1.0 if seed is None
                                                           else float(seed))}
    for node in reversed(tape.nodes):
        upstream = adjoints.get(id(node.output))
        if upstream is None:
            continue
        grads = BACKWARD_RULES[node.op](node, upstream)
        for tensor, grad in zip(node.inputs, grads):
            key = id(tensor)
            if key in adjoints:
                adjoints[key] = adjoints[key] + grad
            else:
                adjoints[key] = np.asarray(grad, dtype=np.float64)

    return [adjoints.get(id(t), np.zeros(t.shape)).reshape(t.shape).copy() for t in wrt]
