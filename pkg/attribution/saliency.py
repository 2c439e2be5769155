"""SaliencyMap, shared gradient plumbing, upsampling and PGM dumps."""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from constants import IMAGE_SIZE
from engine.exceptions import ParameterError
from engine.save_load import atomic_write_bytes
from engine.tensor import backward
from model.base import Classifier, ForwardPass


@dataclass
class SaliencyMap:
    values: np.ndarray          # [8, 8], non-negative
    method: str
    ms_elapsed: float = 0.0
    # Pre-absolute attribution where the method has one (IG); kept for checks.
    signed: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError(f"saliency map must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError(f"{self.method}: saliency map contains non-finite values")
        if np.any(self.values < 0):
            raise ParameterError(f"{self.method}: saliency map has negative entries")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def timed(method: Callable[..., SaliencyMap]) -> Callable[..., SaliencyMap]:
    """Record the wall-clock duration of an attribution call on its result."""
    @functools.wraps(method)
    def wrapper(*args, **kwargs) -> SaliencyMap:
        start = time.perf_counter()
        result = method(*args, **kwargs)
        result.ms_elapsed = (time.perf_counter() - start) * 1000.0
        return result
    return wrapper


def class_gradient(model: Classifier, image: np.ndarray,
                   target: Optional[int] = None) -> Tuple[np.ndarray, ForwardPass]:
    """∂f_c/∂x for c = target (default: the predicted class), shaped like image."""
    fwd = model.run(image)
    c = fwd.predicted if target is None else target
    score = fwd.tape.take(fwd.logits, c)
    (grad,) = backward(fwd.tape, score, [fwd.image])
    return grad, fwd


def channel_abs_sum(attribution: np.ndarray) -> np.ndarray:
    """Σ_ch |a[ch, h, w]|; a no-op reduction for single-channel inputs."""
    attribution = np.asarray(attribution)
    if attribution.ndim == 2:
        return np.abs(attribution)
    return np.abs(attribution).sum(axis=0)


# ---------------------------------------------------------------------------
# Bilinear upsampling, corner-aligned (source corners map onto target corners)
# ---------------------------------------------------------------------------

def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """[n_out, n_in] weights sampling source position i*(n_in-1)/(n_out-1)."""
    weights = np.zeros((n_out, n_in))
    if n_in == 1:
        weights[:, 0] = 1.0
        return weights
    positions = np.arange(n_out) * (n_in - 1) / (n_out - 1) if n_out > 1 else np.zeros(1)
    lower = np.minimum(np.floor(positions).astype(int), n_in - 2)
    frac = positions - lower
    weights[np.arange(n_out), lower] = 1.0 - frac
    weights[np.arange(n_out), lower + 1] += frac
    return weights


def upsample_bilinear(values: np.ndarray, size: int = IMAGE_SIZE) -> np.ndarray:
    rows = interpolation_matrix(values.shape[0], size)
    cols = interpolation_matrix(values.shape[1], size)
    return rows @ values @ cols.T


# ---------------------------------------------------------------------------
# PGM dump (8-bit, min-max scaled per map)
# ---------------------------------------------------------------------------

def to_pgm(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if high > low:
        scaled = np.round((values - low) / (high - low) * 255.0)
    else:
        scaled = np.zeros_like(values)
    height, width = values.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + scaled.astype(np.uint8).tobytes()


def write_pgm(path: str, saliency: SaliencyMap) -> None:
    atomic_write_bytes(path, to_pgm(saliency.values))


def pgm_filename(method: str, index: int) -> str:
    return f"{method}_{index}.pgm"
