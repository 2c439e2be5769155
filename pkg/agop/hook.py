"""AGOP diagonal accumulation during training, and its post-hoc oracle.

For every observed sample the hook takes the predicted class ŷ = argmax f(x),
optionally skips misclassified samples, and adds (∂f_ŷ/∂x)² to a running sum.
finalize() divides by the number of accumulated samples exactly once. The hook
builds its own tapes and never touches model parameters or optimizer state.
"""

from __future__ import annotations

import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from constants import N_PIXELS, ONLY_CORRECT, SNAPSHOT_EVERY
from engine.exceptions import DimensionError, EmptyAccumulationError, ParameterError, StateError
from engine.tensor import Tape, Tensor, backward
from model.base import Classifier
from tris.scenarios import Sample
from agop.diagonal import AgopDiagonal, save_diag

logger = logging.getLogger(__name__)


def predicted_class_gradient(model: Classifier, image: np.ndarray) -> Tuple[np.ndarray, int]:
    """(∇ₓ f_ŷ(x) flattened, ŷ) from one forward and one backward pass."""
    tape = Tape()
    x = Tensor(np.array(image, dtype=np.float64), name="x")
    fwd = model.forward(tape, x)
    predicted = int(np.argmax(fwd.logits.data))
    score = tape.take(fwd.logits, predicted)
    (grad,) = backward(tape, score, [x])
    return grad.reshape(-1), predicted


def snapshot_filename(step: int) -> str:
    return f"agop_step{step}.diag"


class AgopTrainingHook:
    def __init__(self, d: int = N_PIXELS, only_correct: bool = ONLY_CORRECT,
                 snapshot_dir: Optional[str] = None,
                 snapshot_every: int = SNAPSHOT_EVERY) -> None:
        if snapshot_every < 1:
            raise ParameterError(f"snapshot_every must be >= 1, got {snapshot_every}")
        self.d = d
        self.only_correct = only_correct
        self.snapshot_dir = snapshot_dir
        self.snapshot_every = snapshot_every
        self.running_sum = np.zeros(d)
        self.n_acc = 0
        self.n_seen = 0
        self.step = 0
        self.finalized = False
        self.snapshots: List[Tuple[int, str]] = []

    def _check_open(self) -> None:
        if self.finalized:
            raise StateError("hook already finalized")

    def accumulate(self, gradient: np.ndarray) -> None:
        """Add one per-sample input-gradient to the running sum of squares."""
        self._check_open()
        gradient = np.asarray(gradient, dtype=np.float64).reshape(-1)
        if gradient.size != self.d:
            raise DimensionError(f"gradient has {gradient.size} entries, hook expects {self.d}",
                                 axis="d")
        self.running_sum += gradient * gradient
        self.n_acc += 1

    def observe(self, model: Classifier, images: Sequence[np.ndarray],
                labels: Sequence[int]) -> int:
        """Accumulate one batch; returns how many samples passed the gate."""
        self._check_open()
        accepted = 0
        for image, label in zip(images, labels):
            self.n_seen += 1
            gradient, predicted = predicted_class_gradient(model, image)
            if self.only_correct and predicted != int(label):
                continue
            self.accumulate(gradient)
            accepted += 1
        return accepted

    def current(self, step: Optional[int] = None) -> AgopDiagonal:
        """Running mean so far (sum / n_acc); accumulation is unaffected."""
        if self.n_acc == 0:
            raise EmptyAccumulationError(
                "no samples accumulated"
                + (" (only_correct gate rejected every sample)" if self.only_correct else ""))
        return AgopDiagonal(values=self.running_sum / self.n_acc, n_acc=self.n_acc,
                            step=self.step if step is None else step,
                            only_correct=self.only_correct)

    def snapshot(self, step: int, directory: Optional[str] = None) -> str:
        """Persist the running mean at `step`; returns the written path."""
        directory = directory or self.snapshot_dir
        if directory is None:
            raise ParameterError("snapshot needs a directory")
        diag = self.current(step)
        path = os.path.join(directory, snapshot_filename(step))
        try:
            save_diag(path, diag)
        except OSError as exc:
            raise OSError(exc.errno, f"could not write snapshot: {exc.strerror}", path) from exc
        self.snapshots.append((step, path))
        return path

    def on_step(self, step: int) -> None:
        """Training-loop trigger, called after every optimizer step."""
        self.step = step
        if self.snapshot_dir is None or step % self.snapshot_every:
            return
        if self.n_acc == 0:
            logger.warning("step %d: nothing accumulated yet, snapshot skipped", step)
            return
        self.snapshot(step)

    def finalize(self, step: Optional[int] = None) -> AgopDiagonal:
        self._check_open()
        diag = self.current(step)
        self.finalized = True
        return diag


def posthoc_diag(model: Classifier, dataset: Sequence[Sample],
                 only_correct: bool = ONLY_CORRECT) -> AgopDiagonal:
    """One full pass at a fixed model: same math as observe + finalize."""
    if not dataset:
        raise ParameterError("posthoc_diag needs a non-empty dataset")
    hook = AgopTrainingHook(d=dataset[0].image.size, only_correct=only_correct)
    hook.observe(model, [s.image for s in dataset], [s.label for s in dataset])
    return hook.finalize(step=0)
