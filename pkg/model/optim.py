"""Adam with L2 weight decay and a cosine-annealed learning rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from engine.exceptions import DimensionError, ParameterError


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """lr0 * (1 + cos(pi * step / total_steps)) / 2."""
    if total_steps <= 0:
        raise ParameterError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ParameterError(f"step {step} outside [0, {total_steps}]")
    return lr0 * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


@dataclass
class AdamState:
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, weight_decay: float) -> List[np.ndarray]:
    """One bias-corrected Adam update; weight decay is folded into the gradient.

    Returns the updated parameter arrays and advances `state` in place.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError(
            f"{len(params)} params, {len(grads)} grads, {len(state.m)} moment slots",
            axis="params")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t

    updated: List[np.ndarray] = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DimensionError(f"param {i} shape {p.shape} vs grad {g.shape}", axis=f"param{i}")
        g = g + weight_decay * p
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated
