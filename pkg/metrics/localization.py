"""Ground-truth localization metrics: Pointing Game, top-k mIoU, Energy-GT.

Ties in the saliency ranking always go to the lower row-major index.
"""

from __future__ import annotations

from math import comb

import numpy as np

from constants import N_PIXELS
from engine.exceptions import DimensionError, ParameterError, UndefinedMassError


def _flat(saliency: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(saliency, dtype=np.float64).reshape(-1)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if values.size != mask.size:
        raise DimensionError(f"map has {values.size} pixels, mask has {mask.size}", axis="pixels")
    if not mask.any():
        raise ParameterError("ground-truth mask is empty")
    return values, mask


def ranking(saliency: np.ndarray) -> np.ndarray:
    """Pixel indices by descending value; stable, so ties keep row-major order."""
    values = np.asarray(saliency, dtype=np.float64).reshape(-1)
    return np.argsort(-values, kind="stable")


def pointing_game(saliency: np.ndarray, mask: np.ndarray) -> int:
    values, mask = _flat(saliency, mask)
    return int(mask[int(np.argmax(values))])


def miou(saliency: np.ndarray, mask: np.ndarray) -> float:
    """IoU of the top-k pixels (k = |mask|) with the mask."""
    values, mask = _flat(saliency, mask)
    k = int(mask.sum())
    top = np.zeros_like(mask)
    top[ranking(values)[:k]] = True
    intersection = int(np.sum(top & mask))
    return intersection / int(np.sum(top | mask))


def energy_gt(saliency: np.ndarray, mask: np.ndarray) -> float:
    values, mask = _flat(saliency, mask)
    total = float(values.sum())
    if total <= 0.0:
        raise UndefinedMassError("saliency map has no mass; Energy-GT undefined")
    return float(values[mask].sum()) / total


# ---------------------------------------------------------------------------
# Closed-form expectations for a uniformly random ranking
# ---------------------------------------------------------------------------

def expected_random_pg(k: int, d: int = N_PIXELS) -> float:
    return k / d


def expected_random_energy(k: int, d: int = N_PIXELS) -> float:
    return k / d


def expected_random_miou(k: int, d: int = N_PIXELS) -> float:
    """E[I / (2k - I)] with I ~ Hypergeometric(d, k, k)."""
    if not 1 <= k <= d:
        raise ParameterError(f"mask size {k} outside [1, {d}]")
    total = comb(d, k)
    expectation = 0.0
    for i in range(0, k + 1):
        ways = comb(k, i) * comb(d - k, k - i)
        expectation += ways / total * i / (2 * k - i)
    return expectation
