"""Tetromino shapes, placements and background templates.

Geometry is loaded from data/scenarios.json at import time.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from constants import IMAGE_SIZE

Offset = Tuple[int, int]


@dataclass(frozen=True)
class XorSite:
    pattern: str
    anchor: Offset


@dataclass(frozen=True)
class Geometry:
    patterns: Dict[str, Tuple[Offset, ...]]
    class_patterns: Tuple[str, str]
    fixed_anchor: Offset
    xor_sites: Tuple[XorSite, XorSite]
    multiplicative_kappa: float
    # Scenario name -> multiplier on the mixed-in signal.
    signal_gain: Dict[str, float]
    # Half-open [start, stop) row and column span of the correlated template.
    template_rows: Tuple[int, int]
    template_cols: Tuple[int, int]
    # Template amplitude in units of the per-pixel signal amplitude.
    template_gain: float
    default_mixing: str


def _load_geometry() -> Geometry:
    path = os.path.join(os.path.dirname(__file__), "..", "data", "scenarios.json")
    with open(path, "r") as f:
        raw = json.load(f)
    return Geometry(
        patterns={k: tuple((int(r), int(c)) for r, c in v) for k, v in raw["patterns"].items()},
        class_patterns=tuple(raw["class_patterns"]),  # type: ignore[arg-type]
        fixed_anchor=tuple(raw["fixed_anchor"]),  # type: ignore[arg-type]
        xor_sites=tuple(
            XorSite(s["pattern"], tuple(s["anchor"])) for s in raw["xor_sites"]
        ),  # type: ignore[arg-type]
        multiplicative_kappa=float(raw["multiplicative_kappa"]),
        signal_gain={k: float(v) for k, v in raw["signal_gain"].items()},
        template_rows=tuple(raw["template"]["rows"]),  # type: ignore[arg-type]
        template_cols=tuple(raw["template"]["cols"]),  # type: ignore[arg-type]
        template_gain=float(raw["template"]["gain"]),
        default_mixing=raw["default_mixing"],
    )


GEOMETRY: Geometry = _load_geometry()


def tetromino_patterns() -> Tuple[Tuple[Offset, ...], Tuple[Offset, ...]]:
    """(class 0 shape, class 1 shape) as (row, col) offset tuples: T then L."""
    first, second = GEOMETRY.class_patterns
    return GEOMETRY.patterns[first], GEOMETRY.patterns[second]


def rotate(offsets: Tuple[Offset, ...], quarter_turns: int) -> Tuple[Offset, ...]:
    """Rotate by 90° steps, re-anchored so the minimum row and column are 0."""
    pts = list(offsets)
    for _ in range(quarter_turns % 4):
        pts = [(c, -r) for r, c in pts]
    min_r = min(r for r, _ in pts)
    min_c = min(c for _, c in pts)
    return tuple(sorted((r - min_r, c - min_c) for r, c in pts))


def normalize(offsets: Tuple[Offset, ...]) -> Tuple[Offset, ...]:
    return rotate(offsets, 0)


def extent(offsets: Tuple[Offset, ...]) -> Tuple[int, int]:
    """(height, width) of the bounding box."""
    return (max(r for r, _ in offsets) + 1, max(c for _, c in offsets) + 1)


def valid_anchors(offsets: Tuple[Offset, ...], size: int = IMAGE_SIZE) -> List[Offset]:
    height, width = extent(offsets)
    return [(r, c) for r in range(size - height + 1) for c in range(size - width + 1)]


def place(offsets: Tuple[Offset, ...], anchor: Offset, size: int = IMAGE_SIZE) -> np.ndarray:
    """Boolean [size, size] mask with the shape placed at anchor."""
    mask = np.zeros((size, size), dtype=bool)
    for r, c in offsets:
        mask[anchor[0] + r, anchor[1] + c] = True
    return mask


def class_template(label: int, size: int = IMAGE_SIZE) -> np.ndarray:
    """Class-signed constant block over the template span, zero elsewhere, unit amplitude.

    The span sits in the lower-right quadrant, clear of the fixed-anchor shapes.
    """
    template = np.zeros((size, size))
    (r0, r1), (c0, c1) = GEOMETRY.template_rows, GEOMETRY.template_cols
    template[r0:r1, c0:c1] = 1.0
    return template if label == 1 else -template
