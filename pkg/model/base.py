"""Classifier interface shared by CNN8by8 and the linear probe."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from engine.tensor import Tape, Tensor


@dataclass
class ForwardPass:
    """Result of one taped forward: logits plus named intermediate activations."""
    tape: Tape
    image: Tensor
    logits: Tensor
    activations: Dict[str, Tensor] = field(default_factory=dict)

    @property
    def predicted(self) -> int:
        # np.argmax picks the lower class index on ties.
        return int(np.argmax(self.logits.data))


class Classifier(ABC):
    """A model mapping a [1, 8, 8] image to class logits through a Tape."""

    #: Layers exposing a spatial feature map, in forward order.
    feature_layers: tuple[str, ...] = ()

    @abstractmethod
    def parameters(self) -> List[Tensor]:
        raise NotImplementedError

    @abstractmethod
    def forward(self, tape: Tape, image: Tensor) -> ForwardPass:
        raise NotImplementedError

    @abstractmethod
    def predict_logits(self, images: np.ndarray) -> np.ndarray:
        """Tape-free logits for a [N, 1, 8, 8] batch (or a single [1, 8, 8] image)."""
        raise NotImplementedError

    def run(self, image: np.ndarray) -> ForwardPass:
        """Fresh tape, leaf tensor for the image, forward pass."""
        return self.forward(Tape(), Tensor(np.array(image, dtype=np.float64), name="x"))

    def predict(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_logits(images), axis=-1)

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters()])

    def load_parameter_vector(self, vector: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p.data = np.array(vector[offset:offset + p.size], dtype=np.float64).reshape(p.shape)
            offset += p.size
