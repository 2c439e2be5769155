"""Deletion / insertion faithfulness curves.

Pixels are processed in descending saliency order (ties by row-major index).
Deletion replaces them one by one with the baseline; insertion starts from the
baseline and reveals them. Each curve has d+1 points (step 0 included) holding
the softmax probability of the clean input's predicted class; its AUC is the
arithmetic mean of those points.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from engine import functional as F
from engine.exceptions import DimensionError
from model.base import Classifier
from metrics.localization import ranking


def _states(source: np.ndarray, target: np.ndarray, order: np.ndarray) -> np.ndarray:
    """[d+1, *shape]: state t has the first t ordered pixels of source set to target."""
    shape = source.shape
    d = source.size
    steps = np.tile(source.reshape(-1), (d + 1, 1))
    # Row t (t >= 1) has order[:t] switched; lower-triangular selection.
    switched = np.tril(np.ones((d + 1, d), dtype=bool), k=-1)
    positions = np.empty(d, dtype=int)
    positions[order] = np.arange(d)
    selector = switched[:, positions]
    steps[selector] = np.broadcast_to(target.reshape(-1), steps.shape)[selector]
    return steps.reshape((d + 1,) + shape)


def _resolve(model: Classifier, image: np.ndarray, saliency: np.ndarray,
             baseline: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    image = np.asarray(image, dtype=np.float64)
    baseline = np.zeros_like(image) if baseline is None else np.asarray(baseline, np.float64)
    if baseline.shape != image.shape:
        raise DimensionError(f"baseline {baseline.shape} vs image {image.shape}", axis="image")
    saliency = np.asarray(saliency, dtype=np.float64)
    if saliency.size != image.size:
        raise DimensionError(f"map has {saliency.size} pixels, image has {image.size}",
                             axis="pixels")
    target = int(np.argmax(model.predict_logits(image)))
    return image, baseline, ranking(saliency), target


def _curve(model: Classifier, states: np.ndarray, target: int) -> np.ndarray:
    return F.softmax(model.predict_logits(states))[:, target]


def deletion_curve(model: Classifier, image: np.ndarray, saliency: np.ndarray,
                   baseline: Optional[np.ndarray] = None) -> np.ndarray:
    image, baseline, order, target = _resolve(model, image, saliency, baseline)
    return _curve(model, _states(image, baseline, order), target)


def insertion_curve(model: Classifier, image: np.ndarray, saliency: np.ndarray,
                    baseline: Optional[np.ndarray] = None) -> np.ndarray:
    image, baseline, order, target = _resolve(model, image, saliency, baseline)
    return _curve(model, _states(baseline, image, order), target)


def deletion_auc(model: Classifier, image: np.ndarray, saliency: np.ndarray,
                 baseline: Optional[np.ndarray] = None) -> float:
    """Lower is more faithful."""
    return float(np.mean(deletion_curve(model, image, saliency, baseline)))


def insertion_auc(model: Classifier, image: np.ndarray, saliency: np.ndarray,
                  baseline: Optional[np.ndarray] = None) -> float:
    """Higher is more faithful."""
    return float(np.mean(insertion_curve(model, image, saliency, baseline)))
