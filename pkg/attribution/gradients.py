"""Gradient saliency: VanillaGrad, Integrated Gradients, SmoothGrad."""

from __future__ import annotations

from typing import Optional

import numpy as np

from constants import IG_STEPS, SMOOTHGRAD_SAMPLES, SMOOTHGRAD_SIGMA
from engine.exceptions import DimensionError, ParameterError
from model.base import Classifier
from attribution.saliency import SaliencyMap, channel_abs_sum, class_gradient, timed


@timed
def vanilla_grad(model: Classifier, image: np.ndarray) -> SaliencyMap:
    """Σ_ch |∂f_ĉ/∂x| with ĉ the predicted class."""
    grad, _ = class_gradient(model, image)
    return SaliencyMap(channel_abs_sum(grad), method="vanilla_grad")


@timed
def integrated_gradients(model: Classifier, image: np.ndarray, steps: int = IG_STEPS,
                         baseline: Optional[np.ndarray] = None) -> SaliencyMap:
    """Right-endpoint Riemann sum over k = 1..T of the path baseline -> image.

    The signed attribution (whose sum approaches f_ĉ(x) - f_ĉ(x')) is kept on
    the returned map; `values` holds its per-pixel absolute value.
    """
    if steps < 1:
        raise ParameterError(f"integrated_gradients needs steps >= 1, got {steps}")
    image = np.asarray(image, dtype=np.float64)
    baseline = np.zeros_like(image) if baseline is None else np.asarray(baseline, np.float64)
    if baseline.shape != image.shape:
        raise DimensionError(f"baseline {baseline.shape} vs image {image.shape}", axis="image")

    target = int(np.argmax(model.predict_logits(image)))
    delta = image - baseline
    total = np.zeros_like(image)
    for k in range(1, steps + 1):
        grad, _ = class_gradient(model, baseline + (k / steps) * delta, target=target)
        total += grad
    signed = delta * total / steps
    return SaliencyMap(channel_abs_sum(signed), method="integrated_gradients",
                       signed=signed.sum(axis=0) if signed.ndim == 3 else signed)


@timed
def smoothgrad(model: Classifier, image: np.ndarray, k: int = SMOOTHGRAD_SAMPLES,
               sigma: float = SMOOTHGRAD_SIGMA, seed: int = 0) -> SaliencyMap:
    """|mean of ∇ₓ f_ĉ(x + ε)| over k draws ε ~ N(0, σ²I); ĉ fixed on the clean input."""
    if k < 1:
        raise ParameterError(f"smoothgrad needs k >= 1, got {k}")
    if sigma < 0:
        raise ParameterError(f"smoothgrad needs sigma >= 0, got {sigma}")
    image = np.asarray(image, dtype=np.float64)
    target = int(np.argmax(model.predict_logits(image)))
    rng = np.random.default_rng(seed)
    total = np.zeros_like(image)
    for _ in range(k):
        noisy = image + sigma * rng.standard_normal(image.shape)
        grad, _ = class_gradient(model, noisy, target=target)
        total += grad
    return SaliencyMap(channel_abs_sum(total / k), method="smoothgrad")
