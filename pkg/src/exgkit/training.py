"""Cross-entropy training with Adam and stratified k-fold evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .epidenet import EpiDeNetParams, build_epidenet, forward, loss_and_grad
from .errors import ParameterError

__all__ = [
    "TrainConfig",
    "AdamState",
    "FoldReport",
    "TrainResult",
    "init_adam",
    "adam_step",
    "evaluate",
    "train",
    "kfold_cv",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 500
    seed: int = 0
    weight_decay: float = 0.0
    val_fraction: float = 0.2

    def validate(self):
        if self.lr <= 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.weight_decay < 0:
            raise ParameterError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0 < self.val_fraction < 1:
            raise ParameterError(f"val_fraction must be in (0, 1), got {self.val_fraction}")


@dataclass
class AdamState:
    step: int
    m: dict
    v: dict


def init_adam(params: EpiDeNetParams) -> AdamState:
    return AdamState(
        step=0,
        m={k: np.zeros_like(v) for k, v in params.tensors.items()},
        v={k: np.zeros_like(v) for k, v in params.tensors.items()},
    )


def adam_step(state: AdamState, params: EpiDeNetParams, grads: dict, config: TrainConfig):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    new_params = params.copy()
    t = state.step + 1
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    new_m, new_v = {}, {}
    for k, w in new_params.tensors.items():
        g = grads[k]
        if g.shape != w.shape:
            raise ParameterError(f"gradient for {k} has shape {g.shape}, expected {w.shape}")
        if config.weight_decay:
            g = g + config.weight_decay * w
        m = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        w -= (config.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(w.dtype)
        new_m[k], new_v[k] = m, v
    return new_params, AdamState(step=t, m=new_m, v=new_v)


def evaluate(params: EpiDeNetParams, x: np.ndarray, y: np.ndarray, batch_size: int = 256):
    """(accuracy, predictions) of a parameter set over a dataset."""
    x = np.asarray(x)
    y = np.asarray(y).ravel()
    preds = np.empty(y.size, dtype=np.int64)
    for lo in range(0, x.shape[0], batch_size):
        logits = forward(params, x[lo : lo + batch_size])
        preds[lo : lo + batch_size] = np.argmax(logits, axis=1)
    acc = float(np.mean(preds == y)) if y.size else float("nan")
    return acc, preds


def _stratified_holdout(y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class random split keeping at least one sample of each class in
    the training part."""
    train_idx, val_idx = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = rng.permutation(idx)
        n_val = int(round(fraction * idx.size))
        n_val = min(n_val, idx.size - 1)
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(val_idx))


@dataclass(frozen=True)
class TrainResult:
    params: EpiDeNetParams
    history: list  # one dict per epoch
    best_epoch: int
    best_val_accuracy: float


def train(
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    pool_height: int = 1,
    num_classes: int | None = None,
    dtype=np.float32,
) -> TrainResult:
    """Train on (n, C, T) windows with integer labels.

    An internal stratified 80/20 (val_fraction) holdout tracks validation
    accuracy; the returned parameters are those of the best-validation
    epoch (earliest on ties). Fully deterministic given config.seed.
    """
    config.validate()
    x = np.asarray(x, dtype=dtype)
    y = np.asarray(y).ravel().astype(np.int64)
    if x.ndim != 3 or x.shape[0] == 0:
        raise ParameterError(f"dataset must be a non-empty (n, C, T) array, got {x.shape}")
    if y.size != x.shape[0]:
        raise ParameterError(f"{x.shape[0]} windows for {y.size} labels")
    if num_classes is None:
        num_classes = int(y.max()) + 1
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _stratified_holdout(y, config.val_fraction, rng)
    if val_idx.size == 0:
        raise ParameterError("dataset too small to carve out a validation split")
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    params = build_epidenet(
        channels=x.shape[1],
        samples=x.shape[2],
        pool_height=pool_height,
        num_classes=num_classes,
        seed=config.seed,
        dtype=dtype,
    )
    opt = init_adam(params)
    best = params.copy()
    best_acc = -1.0
    best_epoch = -1
    history = []
    n = x_train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        hits = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads = loss_and_grad(params, x_train[idx], y_train[idx])
            params, opt = adam_step(opt, params, grads, config)
            losses.append(loss * idx.size)
            logits = forward(params, x_train[idx])
            hits += int(np.sum(np.argmax(logits, axis=1) == y_train[idx]))
        val_acc, _ = evaluate(params, x_val, y_val)
        entry = {
            "epoch": epoch,
            "train_loss": float(np.sum(losses) / n),
            "train_accuracy": hits / n,
            "val_accuracy": val_acc,
        }
        history.append(entry)
        # ties go to the later epoch: once a small validation split
        # saturates, the most-trained parameters are the better model
        if val_acc >= best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best = params.copy()
    return TrainResult(params=best, history=history, best_epoch=best_epoch, best_val_accuracy=best_acc)


@dataclass(frozen=True)
class FoldReport:
    """Per-fold metrics in percent, plus their mean and standard deviation."""

    accuracy: tuple
    sensitivity: tuple | None
    specificity: tuple | None

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracy))

    @property
    def sd_accuracy(self) -> float:
        return float(np.std(self.accuracy))

    @property
    def mean_sensitivity(self) -> float | None:
        return None if self.sensitivity is None else float(np.mean(self.sensitivity))

    @property
    def mean_specificity(self) -> float | None:
        return None if self.specificity is None else float(np.mean(self.specificity))


def kfold_cv(
    x: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    config: TrainConfig = TrainConfig(),
    pool_height: int = 1,
    positive_class: int = 1,
) -> FoldReport:
    """Stratified k-fold cross-validation.

    Binary datasets additionally get per-fold sensitivity and specificity
    for the designated positive class.
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    y = np.asarray(y).ravel().astype(np.int64)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        raise ParameterError(
            f"smallest class has {counts.min()} samples; cannot stratify into {k} folds"
        )
    num_classes = int(classes.max()) + 1
    binary = classes.size == 2
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=config.seed)
    accs, sens, specs = [], [], []
    for train_rows, test_rows in skf.split(np.zeros(y.size), y):
        result = train(
            np.asarray(x)[train_rows], y[train_rows], config,
            pool_height=pool_height, num_classes=num_classes,
        )
        acc, preds = evaluate(result.params, np.asarray(x)[test_rows], y[test_rows])
        accs.append(100.0 * acc)
        if binary:
            truth = y[test_rows]
            tp = np.sum((preds == positive_class) & (truth == positive_class))
            fn = np.sum((preds != positive_class) & (truth == positive_class))
            tn = np.sum((preds != positive_class) & (truth != positive_class))
            fp = np.sum((preds == positive_class) & (truth != positive_class))
            sens.append(100.0 * tp / (tp + fn) if tp + fn else float("nan"))
            specs.append(100.0 * tn / (tn + fp) if tn + fp else float("nan"))
    return FoldReport(
        accuracy=tuple(accs),
        sensitivity=tuple(sens) if binary else None,
        specificity=tuple(specs) if binary else None,
    )
