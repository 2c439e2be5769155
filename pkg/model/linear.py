"""Linear probe: logits = W·flatten(x) + b."""

from __future__ import annotations

import math
from typing import List, Optional

import numpy as np

from constants import N_CLASSES, N_PIXELS
from engine import functional as F
from engine.tensor import Tape, Tensor
from model.base import Classifier, ForwardPass


class LinearProbe(Classifier):
    def __init__(self, weight: Optional[np.ndarray] = None,
                 bias: Optional[np.ndarray] = None, n_classes: int = N_CLASSES) -> None:
        self.weight = Tensor(np.zeros((n_classes, N_PIXELS)) if weight is None else weight,
                             name="probe.weight")
        self.bias = Tensor(np.zeros(n_classes) if bias is None else bias, name="probe.bias")

    @classmethod
    def from_pixel_weights(cls, w: np.ndarray) -> "LinearProbe":
        """Probe with logits (-w·x, w·x): every class has input-gradient ±w."""
        w = np.asarray(w, dtype=np.float64).reshape(-1)
        weight = np.stack([-w, w])
        return cls(weight=weight)

    def parameters(self) -> List[Tensor]:
        return [self.weight, self.bias]

    def forward(self, tape: Tape, image: Tensor) -> ForwardPass:
        logits = tape.dense(tape.flatten(image), self.weight, self.bias, name="logits")
        return ForwardPass(tape=tape, image=image, logits=logits)

    def predict_logits(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        flat = images.reshape(images.shape[:-3] + (-1,))
        return F.dense_forward(flat, self.weight.data, self.bias.data)


def build_linear_probe(seed: int) -> LinearProbe:
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(N_PIXELS)
    return LinearProbe(weight=rng.uniform(-bound, bound, size=(N_CLASSES, N_PIXELS)),
                       bias=rng.uniform(-bound, bound, size=N_CLASSES))
