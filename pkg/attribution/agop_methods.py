"""AGOP-Local / AGOP-Weighted / AGOP-Global, plus the random reference map."""

from __future__ import annotations

import numpy as np

from constants import IMAGE_SIZE
from engine.exceptions import DimensionError, ParameterError
from model.base import Classifier
from agop.diagonal import AgopDiagonal
from agop.hook import predicted_class_gradient
from attribution.saliency import SaliencyMap, timed


@timed
def agop_local(model: Classifier, image: np.ndarray) -> SaliencyMap:
    """Single-sample AGOP: |g| of the predicted-class gradient.

    Goes through the hook's per-sample gradient routine, not vanilla_grad, so
    their agreement is checked rather than assumed.
    """
    image = np.asarray(image, dtype=np.float64)
    gradient, _ = predicted_class_gradient(model, image)
    per_channel = np.abs(gradient).reshape(image.shape)
    return SaliencyMap(per_channel.sum(axis=0), method="agop_local")


@timed
def agop_weighted(model: Classifier, image: np.ndarray, diag: AgopDiagonal) -> SaliencyMap:
    """|∂f_ĉ/∂x| ⊙ sqrt(diag / max diag)."""
    image = np.asarray(image, dtype=np.float64)
    if diag.d != image.size:
        raise DimensionError(f"diag has {diag.d} entries, image has {image.size}", axis="d")
    v = diag.weights().reshape(image.shape)
    gradient, _ = predicted_class_gradient(model, image)
    attribution = np.abs(gradient).reshape(image.shape) * v
    return SaliencyMap(attribution.sum(axis=0), method="agop_weighted")


@timed
def agop_global(diag: AgopDiagonal) -> SaliencyMap:
    """diag(M) reshaped to the image grid; identical for every input."""
    if diag.d != IMAGE_SIZE * IMAGE_SIZE:
        raise ParameterError(f"agop_global needs a {IMAGE_SIZE * IMAGE_SIZE}-entry diag, "
                             f"got {diag.d}")
    return SaliencyMap(diag.as_map(IMAGE_SIZE), method="agop_global")


@timed
def random_baseline(seed: int) -> SaliencyMap:
    """i.i.d. uniform [0, 1) values."""
    rng = np.random.default_rng(seed)
    return SaliencyMap(rng.random((IMAGE_SIZE, IMAGE_SIZE)), method="random")
