"""Training loop, learning-rate schedule, early stopping and evaluation."""

from __future__ import annotations

import copy
import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError
from .model import DuplicateModel, EncodedPair
from .tensorcore import adam_step, softmax_cross_entropy

LOGGER = logging.getLogger(__name__)

EVAL_BATCH = 256
HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "val_acc", "lr", "seconds")


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_factor: float = 0.1
    decay_period_epochs: int = 2
    early_stop_patience_epochs: int = 3
    max_epochs: int = 30
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigurationError("decay_factor must be in (0, 1)")
        if self.max_epochs < 1 or self.decay_period_epochs < 1 or self.early_stop_patience_epochs < 1:
            raise ConfigurationError("max_epochs, decay_period_epochs and patience must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            for r in self.epochs:
                writer.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_acc), repr(r.lr), f"{r.seconds:.3f}"])

    @staticmethod
    def read_csv(path: str | Path) -> list[dict[str, str]]:
        with Path(path).open("r", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))


@dataclass
class EvalResult:
    accuracy: float
    tp: int
    fp: int
    tn: int
    fn: int
    loss: float
    probs: np.ndarray
    predictions: np.ndarray

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_text(self) -> str:
        return (
            f"accuracy={self.accuracy:.4f}\n"
            f"total={self.total}\nTP={self.tp}\nFP={self.fp}\nTN={self.tn}\nFN={self.fn}\n"
            f"loss={self.loss:.6f}\n"
        )


@dataclass
class TrainState:
    """Everything needed to resume or reproduce the model at one epoch."""

    arrays: dict[str, np.ndarray]
    adam: dict[str, tuple[np.ndarray, np.ndarray, int]]
    rng_state: dict
    epoch: int = 0
    lr: float = 0.0
    val_acc: float = float("nan")
    val_loss: float = float("nan")


def snapshot(model: DuplicateModel, rng: np.random.Generator | None, **meta) -> TrainState:
    return TrainState(
        arrays={k: v.copy() for k, v in model.state_arrays().items()},
        adam={p.name: (p.m.copy(), p.v.copy(), p.t) for p in model.parameters()},
        rng_state=copy.deepcopy(rng.bit_generator.state) if rng is not None else {},
        **meta,
    )


def restore(model: DuplicateModel, state: TrainState) -> None:
    model.load_state_arrays(state.arrays)
    for p in model.parameters():
        if p.name in state.adam:
            m, v, t = state.adam[p.name]
            p.m, p.v, p.t = m.copy(), v.copy(), t


def labels_of(pairs: Sequence[EncodedPair]) -> np.ndarray:
    labels = [p.label for p in pairs]
    if any(l not in (0, 1) for l in labels):
        raise ConfigurationError("every pair needs a 0/1 label")
    return np.array(labels, dtype=np.int64)


def evaluate(model: DuplicateModel, pairs: Sequence[EncodedPair], batch_size: int = EVAL_BATCH) -> EvalResult:
    """Inference-mode accuracy, loss and confusion counts (duplicate = positive)."""
    if not pairs:
        raise ConfigurationError("evaluate needs at least one pair")
    labels = labels_of(pairs)
    probs = np.concatenate(
        [model.predict_proba(pairs[i : i + batch_size]) for i in range(0, len(pairs), batch_size)]
    )
    preds = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    p_true = np.clip(probs[np.arange(len(labels)), labels], 1e-300, None)
    return EvalResult(
        accuracy=float(np.mean(preds == labels)),
        tp=int(np.sum((preds == 1) & (labels == 1))),
        fp=int(np.sum((preds == 1) & (labels == 0))),
        tn=int(np.sum((preds == 0) & (labels == 0))),
        fn=int(np.sum((preds == 0) & (labels == 1))),
        loss=float(-np.mean(np.log(p_true))),
        probs=probs,
        predictions=preds,
    )


def train_step(
    model: DuplicateModel,
    batch: Sequence[EncodedPair],
    cfg: TrainConfig,
    lr: float,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> float:
    try:
        result = model.forward(batch, training=True, rng=rng)
        loss, _ = softmax_cross_entropy(result.logits, labels_of(batch))
        loss.backward()
    except NumericalError as exc:
        raise NumericalError(f"batch {batch_index}: {exc}") from exc
    adam_step(model.parameters(), lr, cfg.beta1, cfg.beta2, cfg.eps)
    return float(loss.data)


def _lr_should_decay(val_losses: list[float], prev_check: int, epoch: int) -> bool:
    """True when the best loss since the previous schedule check is no better than before it."""
    split = max(prev_check, 1)
    before = min(val_losses[:split])
    since = min(val_losses[split:epoch])
    return since >= before


def train(
    model: DuplicateModel,
    train_pairs: Sequence[EncodedPair],
    val_pairs: Sequence[EncodedPair],
    cfg: TrainConfig,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[TrainState, TrainHistory]:
    """Adam over shuffled mini-batches; returns the best-validation-accuracy state.

    Every ``decay_period_epochs`` the rate is multiplied by ``decay_factor``
    unless validation loss improved since the previous check. Training stops
    once validation accuracy has not improved for ``early_stop_patience_epochs``.
    """
    cfg.validate()
    if not train_pairs or not val_pairs:
        raise ConfigurationError("train and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    history = TrainHistory()
    decays = 0
    prev_check = 0
    best: TrainState | None = None
    best_epoch = 0
    val_losses: list[float] = []
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cfg.lr * cfg.decay_factor**decays
        started = time.perf_counter()
        order = rng.permutation(len(train_pairs))
        total, seen = 0.0, 0
        for b, lo in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [train_pairs[i] for i in order[lo : lo + cfg.batch_size]]
            total += train_step(model, batch, cfg, lr, rng, b) * len(batch)
            seen += len(batch)
        val = evaluate(model, val_pairs)
        val_losses.append(val.loss)
        record = EpochRecord(epoch, total / seen, val.loss, val.accuracy, lr, time.perf_counter() - started)
        history.epochs.append(record)
        LOGGER.info(
            "epoch %d train_loss=%.4f val_loss=%.4f val_acc=%.4f lr=%g",
            epoch, record.train_loss, val.loss, val.accuracy, lr,
        )
        if on_epoch is not None:
            on_epoch(record)
        if best is None or val.accuracy > best.val_acc:
            best = snapshot(model, rng, epoch=epoch, lr=lr, val_acc=val.accuracy, val_loss=val.loss)
            best_epoch = epoch
        if epoch % cfg.decay_period_epochs == 0:
            if _lr_should_decay(val_losses, prev_check, epoch):
                decays += 1
            prev_check = epoch
        if epoch - best_epoch >= cfg.early_stop_patience_epochs:
            history.stopped_early = True
            break
    assert best is not None
    return best, history
