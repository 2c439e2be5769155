"""XAI-TRIS-style 8x8 scenario generation with ground-truth masks."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from constants import ALPHA, IMAGE_SIZE
from engine.exceptions import ParameterError
from tris.patterns import (
    GEOMETRY, Offset, class_template, place, rotate, tetromino_patterns, valid_anchors,
)

logger = logging.getLogger(__name__)


class Scenario(Enum):
    LINEAR = "linear"
    MULTIPLICATIVE = "multiplicative"
    TRANSROT = "transrot"
    XOR = "xor"


class Background(Enum):
    UNCORRELATED = "uncorrelated"
    CORRELATED = "correlated"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


MIXING_MODES = ("energy", "raw")


def _coerce(enum_cls: type, value: object, what: str) -> Enum:
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        valid = ", ".join(m.value for m in enum_cls)  # type: ignore[attr-defined]
        raise ParameterError(f"unknown {what} {value!r} (valid: {valid})") from None


@dataclass
class Sample:
    image: np.ndarray   # [1, 8, 8] float64 (float32-representable)
    label: int
    mask: np.ndarray    # [64] bool, row-major

    @property
    def mask_size(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario
    background: Background
    n: int
    seed: int
    alpha: float = ALPHA
    split: Split = Split.TRAIN
    mixing: str = field(default=GEOMETRY.default_mixing)
    # Test hook: 0.0 removes the background noise entirely.
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", _coerce(Scenario, self.scenario, "scenario"))
        object.__setattr__(self, "background",
                           _coerce(Background, self.background, "background"))
        object.__setattr__(self, "split", _coerce(Split, self.split, "split"))
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.n < 2:
            raise ParameterError(f"n must be at least 2, got {self.n}")
        if self.n % 2:
            raise ParameterError(f"n must be even for exact class balance, got {self.n}")
        if self.mixing not in MIXING_MODES:
            raise ParameterError(f"unknown mixing {self.mixing!r} (valid: energy, raw)")
        if self.noise_scale < 0:
            raise ParameterError(f"noise_scale must be non-negative, got {self.noise_scale}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["scenario"] = self.scenario.value
        data["background"] = self.background.value
        data["split"] = self.split.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(**data)


# ---------------------------------------------------------------------------
# Per-scenario signal construction
# ---------------------------------------------------------------------------

def _signal(spec: ScenarioSpec, label: int,
            rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Return (signed signal image [8,8], mask [8,8]) for one sample."""
    shapes = tetromino_patterns()
    if spec.scenario in (Scenario.LINEAR, Scenario.MULTIPLICATIVE):
        mask = place(shapes[label], GEOMETRY.fixed_anchor)
        return mask.astype(np.float64), mask
    if spec.scenario is Scenario.TRANSROT:
        offsets = rotate(shapes[label], int(rng.integers(4)))
        anchors: List[Offset] = valid_anchors(offsets)
        anchor = anchors[int(rng.integers(len(anchors)))]
        mask = place(offsets, anchor)
        return mask.astype(np.float64), mask
    # XOR: one shape per site, independent sign per site, label = signs differ.
    site_a, site_b = GEOMETRY.xor_sites
    sign_a = 1.0 if rng.integers(2) else -1.0
    sign_b = -sign_a if label == 1 else sign_a
    mask_a = place(GEOMETRY.patterns[site_a.pattern], site_a.anchor)
    mask_b = place(GEOMETRY.patterns[site_b.pattern], site_b.anchor)
    return sign_a * mask_a + sign_b * mask_b, mask_a | mask_b


def _unit(x: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(x))
    return x / norm if norm > 0 else np.zeros_like(x)


def _compose(spec: ScenarioSpec, signal: np.ndarray, mask: np.ndarray,
             noise: np.ndarray, template_sign: float) -> np.ndarray:
    alpha = spec.alpha
    gain = GEOMETRY.signal_gain[spec.scenario.value]
    if spec.mixing == "energy":
        # Unit-norm mixing, rescaled so pixels keep the raw mode's unit scale.
        background = _unit(noise) * IMAGE_SIZE
        pattern = _unit(signal) * IMAGE_SIZE
        amplitude = alpha * gain * IMAGE_SIZE / float(np.linalg.norm(signal))
    else:
        background, pattern = noise, signal
        amplitude = alpha * gain

    if spec.scenario is Scenario.MULTIPLICATIVE:
        image = background.copy()
        image[mask] *= 1.0 + alpha * GEOMETRY.multiplicative_kappa
    else:
        image = alpha * gain * pattern + (1.0 - alpha) * background

    if spec.background is Background.CORRELATED:
        image = image + amplitude * GEOMETRY.template_gain * template_sign * class_template(1)
    return image


def generate_dataset(spec: ScenarioSpec) -> List[Sample]:
    """Generate spec.n samples, exactly half per class, as a pure function of spec."""
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat([0, 1], spec.n // 2)
    rng.shuffle(labels)

    samples: List[Sample] = []
    for label in labels.tolist():
        noise = rng.standard_normal((IMAGE_SIZE, IMAGE_SIZE)) * spec.noise_scale
        signal, mask = _signal(spec, label, rng)
        if spec.split is Split.TRAIN:
            template_sign = 1.0 if label == 1 else -1.0
        else:
            template_sign = 1.0 if rng.integers(2) else -1.0
        image = _compose(spec, signal, mask, noise, template_sign)
        image = image.astype(np.float32).astype(np.float64)
        samples.append(Sample(image=image[None, :, :], label=label, mask=mask.reshape(-1)))

    logger.debug("generated %d %s/%s samples (split=%s, seed=%d)", spec.n,
                 spec.scenario.value, spec.background.value, spec.split.value, spec.seed)
    return samples


# ---------------------------------------------------------------------------
# Dataset helpers
# ---------------------------------------------------------------------------

def stack_images(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.image for s in samples])


def stack_labels(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.int64)


def pixel_mean(samples: Sequence[Sample]) -> np.ndarray:
    """Per-pixel mean image [1, 8, 8] (deletion/insertion baseline)."""
    if not samples:
        raise ParameterError("pixel_mean of an empty dataset")
    return stack_images(samples).mean(axis=0)


def class_counts(samples: Sequence[Sample]) -> Tuple[int, int]:
    labels = stack_labels(samples)
    return int((labels == 0).sum()), int((labels == 1).sum())


def mask_popcounts(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.mask_size for s in samples])

