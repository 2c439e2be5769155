"""Class activation maps on a convolutional feature layer (GradCAM, GradCAM++)."""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from constants import GRADCAM_LAYER, IMAGE_SIZE
from engine.exceptions import ParameterError
from engine.tensor import backward
from model.base import Classifier
from attribution.saliency import SaliencyMap, timed, upsample_bilinear

logger = logging.getLogger(__name__)


def _layer_and_gradient(model: Classifier, image: np.ndarray,
                        target_layer: str) -> Tuple[np.ndarray, np.ndarray]:
    """(activation A [C, h, w], ∂f_ĉ/∂A) at the target layer."""
    fwd = model.run(image)
    if target_layer not in fwd.activations:
        valid = ", ".join(fwd.activations) or "none"
        raise ParameterError(f"unknown target layer {target_layer!r} (valid: {valid})")
    activation = fwd.activations[target_layer]
    score = fwd.tape.take(fwd.logits, fwd.predicted)
    (grad,) = backward(fwd.tape, score, [activation])
    if activation.shape[1:] == (1, 1):
        logger.warning("target layer %s is 1x1: the upsampled map is constant", target_layer)
    return activation.data, grad


def _finish(cam: np.ndarray, method: str) -> SaliencyMap:
    cam = np.maximum(cam, 0.0)
    return SaliencyMap(np.maximum(upsample_bilinear(cam, IMAGE_SIZE), 0.0), method=method)


@timed
def gradcam(model: Classifier, image: np.ndarray,
            target_layer: str = GRADCAM_LAYER) -> SaliencyMap:
    """relu(Σ_ch mean(∂f/∂A_ch) · A_ch), bilinearly upsampled to the input."""
    activation, grad = _layer_and_gradient(model, image, target_layer)
    weights = grad.mean(axis=(1, 2))
    return _finish(np.einsum("c,chw->hw", weights, activation), "gradcam")


@timed
def gradcam_pp(model: Classifier, image: np.ndarray,
               target_layer: str = GRADCAM_LAYER) -> SaliencyMap:
    """GradCAM++ channel weights (Chattopadhay et al., 2018).

    α = g² / (2g² + Σ_ab A·g³), w_ch = Σ_ij α·relu(g); a zero denominator
    gives α = 0 at that position.
    """
    activation, grad = _layer_and_gradient(model, image, target_layer)
    grad_2 = grad ** 2
    grad_3 = grad ** 3
    spatial_sum = activation.sum(axis=(1, 2), keepdims=True)
    denom = 2.0 * grad_2 + spatial_sum * grad_3
    alpha = np.divide(grad_2, denom, out=np.zeros_like(grad_2), where=denom != 0.0)
    weights = (alpha * np.maximum(grad, 0.0)).sum(axis=(1, 2))
    return _finish(np.einsum("c,chw->hw", weights, activation), "gradcam_pp")
