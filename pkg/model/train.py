"""Training loop: per-sample backprop, Adam + cosine schedule, AGOP hook driving."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from constants import (
    BATCH_SIZE, EPOCHS, LR0, ONLY_CORRECT, SNAPSHOT_EVERY, WEIGHT_DECAY,
)
from engine.exceptions import BenchError, DivergedTrainingError, HookError, ParameterError
from engine.save_load import atomic_write_bytes
from engine.tensor import Tape, Tensor, backward
from model.base import Classifier
from model.optim import AdamState, adam_step, cosine_lr
from tris.scenarios import Sample, stack_images, stack_labels

if TYPE_CHECKING:
    from agop.hook import AgopTrainingHook

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = EPOCHS
    lr0: float = LR0
    weight_decay: float = WEIGHT_DECAY
    batch_size: int = BATCH_SIZE
    seed: int = 0
    snapshot_every: int = SNAPSHOT_EVERY
    only_correct: bool = ONLY_CORRECT
    # 0 disables periodic model checkpoints.
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        for name in ("lr0", "batch_size", "snapshot_every"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.weight_decay < 0 or self.checkpoint_every < 0:
            raise ParameterError("weight_decay and checkpoint_every must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    test_acc: float
    lr: float
    train_loss: float


@dataclass
class TrainResult:
    model: Classifier
    history: List[EpochRecord] = field(default_factory=list)
    checkpoints: List[Tuple[int, str]] = field(default_factory=list)
    steps: int = 0


def evaluate_accuracy(model: Classifier, dataset: Sequence[Sample]) -> float:
    """Fraction of argmax-correct predictions (ties go to the lower class)."""
    if not dataset:
        raise ParameterError("evaluate_accuracy needs a non-empty dataset")
    predictions = model.predict(stack_images(dataset))
    return float(np.mean(predictions == stack_labels(dataset)))


def _sample_loss_grads(model: Classifier, params: Sequence[Tensor], image: np.ndarray,
                       label: int) -> Tuple[float, List[np.ndarray]]:
    tape = Tape()
    fwd = model.forward(tape, Tensor(image, name="x"))
    loss = tape.cross_entropy_loss(fwd.logits, label)
    return loss.item(), backward(tape, loss, params)


def train(model: Classifier, train_set: Sequence[Sample], test_set: Sequence[Sample],
          config: TrainConfig, hook: Optional[AgopTrainingHook] = None,
          checkpoint_dir: Optional[str] = None, progress: bool = False) -> TrainResult:
    """Train in place; the hook (if any) sees every batch before the optimizer step."""
    if not train_set or not test_set:
        raise ParameterError("train and test sets must be non-empty")

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdamState.zeros_like([p.data for p in params])
    n = len(train_set)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    result = TrainResult(model=model)

    step = 0
    lr = config.lr0
    for epoch in tqdm(range(1, config.epochs + 1), desc="train", unit="epoch",
                      disable=not progress):
        order = rng.permutation(n)
        loss_total = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            grads = [np.zeros_like(p.data) for p in params]
            for sample in batch:
                loss, sample_grads = _sample_loss_grads(model, params, sample.image, sample.label)
                if not math.isfinite(loss):
                    raise DivergedTrainingError(step + 1)
                loss_total += loss
                for acc, g in zip(grads, sample_grads):
                    acc += g
            grads = [g / len(batch) for g in grads]

            if hook is not None:
                try:
                    hook.observe(model, [s.image for s in batch], [s.label for s in batch])
                except BenchError as exc:
                    raise HookError(f"AGOP hook failed at step {step + 1}: {exc}") from exc

            lr = cosine_lr(step, total_steps, config.lr0)
            updated = adam_step([p.data for p in params], grads, state, lr,
                                config.weight_decay)
            for p, new in zip(params, updated):
                p.data = new
            step += 1

            if hook is not None:
                try:
                    hook.on_step(step)
                except (BenchError, OSError) as exc:
                    raise HookError(f"AGOP snapshot failed at step {step}: {exc}") from exc

        record = EpochRecord(
            epoch=epoch,
            train_acc=evaluate_accuracy(model, train_set),
            test_acc=evaluate_accuracy(model, test_set),
            lr=lr,
            train_loss=loss_total / n,
        )
        result.history.append(record)
        logger.info("epoch %d/%d loss=%.4f train_acc=%.3f test_acc=%.3f lr=%.2e", epoch,
                    config.epochs, record.train_loss, record.train_acc, record.test_acc, lr)

        if checkpoint_dir and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            result.checkpoints.append((epoch, _checkpoint(model, checkpoint_dir, epoch)))

    result.steps = step
    return result


def _checkpoint(model: Classifier, directory: str, epoch: int) -> str:
    from model.cnn import Cnn8by8, save_model

    if not isinstance(model, Cnn8by8):
        raise ParameterError("checkpoints are only supported for Cnn8by8")
    path = os.path.join(directory, f"model_epoch{epoch}.cnn8")
    save_model(path, model)
    return path


def write_history(path: str, history: Sequence[EpochRecord]) -> None:
    """CSV: epoch, train_acc, test_acc, lr, train_loss."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["epoch", "train_acc", "test_acc", "lr", "train_loss"])
    for r in history:
        writer.writerow([r.epoch, f"{r.train_acc:.6g}", f"{r.test_acc:.6g}",
                         f"{r.lr:.6g}", f"{r.train_loss:.6g}"])
    atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))
