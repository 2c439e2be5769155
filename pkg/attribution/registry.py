"""Attribution method registry: name -> MethodDef, shared by the suite and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from engine.exceptions import ConfigurationError, ParameterError
from model.base import Classifier
from agop.diagonal import AgopDiagonal
from attribution.agop_methods import agop_global, agop_local, agop_weighted, random_baseline
from attribution.cam import gradcam, gradcam_pp
from attribution.gradients import integrated_gradients, smoothgrad, vanilla_grad
from attribution.saliency import SaliencyMap

Runner = Callable[[Optional[Classifier], np.ndarray, Optional[AgopDiagonal], int], SaliencyMap]


@dataclass(frozen=True)
class MethodDef:
    name: str
    label: str
    run: Runner
    needs_diag: bool = False
    seeded: bool = False


METHODS: Dict[str, MethodDef] = {
    m.name: m for m in (
        MethodDef("vanilla_grad", "VanillaGrad",
                  lambda model, x, diag, seed: vanilla_grad(model, x)),
        MethodDef("integrated_gradients", "IG",
                  lambda model, x, diag, seed: integrated_gradients(model, x)),
        MethodDef("smoothgrad", "SmoothGrad",
                  lambda model, x, diag, seed: smoothgrad(model, x, seed=seed), seeded=True),
        MethodDef("gradcam", "GradCAM",
                  lambda model, x, diag, seed: gradcam(model, x)),
        MethodDef("gradcam_pp", "GradCAM++",
                  lambda model, x, diag, seed: gradcam_pp(model, x)),
        MethodDef("agop_local", "AGOP-Local",
                  lambda model, x, diag, seed: agop_local(model, x)),
        MethodDef("agop_weighted", "AGOP-Weighted",
                  lambda model, x, diag, seed: agop_weighted(model, x, diag),  # type: ignore[arg-type]
                  needs_diag=True),
        MethodDef("agop_global", "AGOP-Global",
                  lambda model, x, diag, seed: agop_global(diag),  # type: ignore[arg-type]
                  needs_diag=True),
        MethodDef("random", "Random",
                  lambda model, x, diag, seed: random_baseline(seed), seeded=True),
    )
}


def method_names() -> List[str]:
    return list(METHODS)


def get_method(name: str) -> MethodDef:
    try:
        return METHODS[name]
    except KeyError:
        raise ParameterError(
            f"unknown method {name!r} (valid: {', '.join(METHODS)})") from None


def resolve_methods(selection: str | List[str]) -> List[MethodDef]:
    """'all', a comma-separated string, or a list of names."""
    if isinstance(selection, str):
        if selection.strip() == "all":
            return list(METHODS.values())
        selection = [part.strip() for part in selection.split(",") if part.strip()]
    return [get_method(name) for name in selection]


def sample_seed(seed: int, index: int) -> int:
    """Independent per-sample stream derived from (seed, sample index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def attribute(name: str, model: Optional[Classifier], image: np.ndarray,
              diag: Optional[AgopDiagonal] = None, seed: int = 0) -> SaliencyMap:
    method = get_method(name)
    if method.needs_diag and diag is None:
        raise ConfigurationError(f"method {name} needs an AGOP diagonal (--diag)")
    return method.run(model, image, diag, seed)
