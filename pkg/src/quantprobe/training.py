"""Probe training: embed a dataset with a frozen provider, fit with
mini-batch SGD and patience-based early stopping, evaluate on the held-out
test split.

The fit stage only ever receives the training split; test features enter at
final evaluation, so test data cannot influence updates, stopping, or grid
selection. Diverged runs (non-finite loss or gradient) are an admissible
outcome: they are flagged and scored with the all-zeros predictor.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .embeddings import EmbeddingProvider
from .errors import ConfigError
from .metrics import accuracy, log_rmse, predict_zero_metric, rmse
from .nn import NonFiniteGradient, sgd_step
from .probes import ProbeConfig, build_probe, pad_and_flatten
from .synthgen import Dataset, TaskKind
from .tokenizer import build_vocab, tokenize

DEFAULT_LR_GRID = (3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6)
DEFAULT_MOMENTUM_GRID = (0.5, 0.7)


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    momentum: float = 0.5
    batch_size: int = 128
    clip_norm: float = 5.0
    max_epochs: int = 1000
    patience: int = 20
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (1e-6 <= self.lr <= 0.3):
            raise ConfigError(f"lr {self.lr} outside [1e-06, 0.3]")
        if not (0.0 < self.val_fraction < 0.5):
            raise ConfigError(f"val_fraction {self.val_fraction} outside (0, 0.5)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be >= 1")


@dataclass
class SplitFeatures:
    """Frozen features of one dataset split."""

    kind: str  # "regression" | "classification"
    x: np.ndarray  # [N, max_len*dim] or [N, T, dim]
    y: np.ndarray | None = None  # [N, arity]
    lengths: np.ndarray | None = None  # [N], classification only
    labels: np.ndarray | None = None  # [N], classification only

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def batch(self, idx: np.ndarray) -> tuple:
        if self.kind == "classification":
            return self.x[idx], self.lengths[idx], self.labels[idx]
        return self.x[idx], self.y[idx]


@dataclass
class DatasetFeatures:
    task: TaskKind
    dim: int
    max_len: int
    n_classes: int
    train: SplitFeatures
    test: SplitFeatures


def embed_dataset(dataset: Dataset, provider: EmbeddingProvider) -> DatasetFeatures:
    """Embed both splits and assemble padded arrays. max_len is the maximum
    token count over train plus test for this dataset/provider pair."""
    vocab = build_vocab(dataset.lexicon)
    matrices: dict[str, list[np.ndarray]] = {}
    for split in ("train", "test"):
        emb = provider.split_embedder(split)
        out = []
        for ex in dataset.split(split):
            tokens = tokenize(ex.input_text, vocab) if provider.needs_tokens else None
            out.append(emb(ex, tokens))
        matrices[split] = out
    dim = provider.dim
    max_len = max(m.shape[0] for split in matrices.values() for m in split)

    def assemble(split: str) -> SplitFeatures:
        examples = dataset.split(split)
        mats = matrices[split]
        if dataset.task.is_classification:
            x = np.zeros((len(mats), max_len, dim))
            lengths = np.empty(len(mats), dtype=np.int64)
            for i, m in enumerate(mats):
                x[i, : m.shape[0]] = m
                lengths[i] = m.shape[0]
            labels = np.asarray([ex.label_index for ex in examples], dtype=np.int64)
            return SplitFeatures("classification", x, lengths=lengths, labels=labels)
        x = np.empty((len(mats), max_len * dim))
        for i, m in enumerate(mats):
            x[i] = pad_and_flatten(m, max_len)
        y = np.asarray([ex.targets for ex in examples], dtype=np.float64)
        return SplitFeatures("regression", x, y=y)

    n_classes = len(dataset.lexicon) if dataset.task.is_classification else 0
    return DatasetFeatures(dataset.task, dim, max_len,
                           n_classes, assemble("train"), assemble("test"))


@dataclass
class FitResult:
    probe: object | None
    best_epoch: int
    epochs_run: int
    best_val_loss: float
    val_losses: list[float]
    diverged: bool


@dataclass
class RunResult:
    task: TaskKind
    provider_name: str
    metric_kind: str
    value: float
    best_epoch: int
    epochs_run: int
    best_val_loss: float
    val_losses: list[float] = field(repr=False, default_factory=list)
    diverged: bool = False
    wall_time: float = 0.0
    seed: int = 0
    max_len: int = 0
    config: TrainConfig | None = None


def fit_probe(task: TaskKind, train_features: SplitFeatures, probe_config: ProbeConfig,
              config: TrainConfig, epoch_hook=None, val_loss_fn=None) -> FitResult:
    """Train one probe on the training split alone.

    The split shuffle, probe init, and per-epoch batch order all come from a
    single stream seeded by config.seed, so a rerun is bit-identical.
    epoch_hook(epoch, val_loss, probe) observes each epoch; val_loss_fn
    replaces the validation criterion (defaults to the task loss).
    """
    n = train_features.n
    n_val = max(1, int(round(n * config.val_fraction)))
    if n_val >= n:
        raise ConfigError(f"validation split ({n_val}) would consume all {n} examples")
    if config.batch_size > n - n_val:
        raise ConfigError(f"batch_size {config.batch_size} exceeds fit split size {n - n_val}")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((config.seed, 7))))
    perm = rng.permutation(n)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    probe = build_probe(probe_config, rng)
    val_batch = train_features.batch(val_idx)

    best_val = np.inf
    best_epoch = 0
    best_snapshot = None
    val_losses: list[float] = []
    diverged = False
    epoch = 0

    for epoch in range(1, config.max_epochs + 1):
        order = fit_idx[rng.permutation(fit_idx.size)]
        try:
            for start in range(0, order.size, config.batch_size):
                idx = order[start : start + config.batch_size]
                loss = probe.loss_and_grad(*train_features.batch(idx))
                if not np.isfinite(loss):
                    raise NonFiniteGradient(f"batch loss is {loss}")
                sgd_step(probe.params, config.lr, config.momentum, config.clip_norm)
        except NonFiniteGradient:
            diverged = True
            break
        if val_loss_fn is not None:
            val_loss = float(val_loss_fn(probe, val_batch))
        else:
            val_loss = _loss_on(probe, val_batch)
        val_losses.append(val_loss)
        if not np.isfinite(val_loss):
            diverged = True
            break
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snapshot = probe.params.snapshot()
        if epoch_hook is not None:
            epoch_hook(epoch, val_loss, probe)
        if epoch - best_epoch >= config.patience:
            break

    if diverged or best_snapshot is None:
        return FitResult(None, best_epoch, epoch, float(best_val), val_losses, True)
    probe.params.restore(best_snapshot)
    return FitResult(probe, best_epoch, epoch, float(best_val), val_losses, False)


def _loss_on(probe, batch: tuple) -> float:
    return probe.loss(*batch)


def evaluate_probe(task: TaskKind, fit: FitResult, test_features: SplitFeatures) -> tuple[str, float]:
    """Task metric of a fitted probe on the untouched test split."""
    kind = task.metric_kind
    if task.is_classification:
        if fit.diverged:
            return kind, predict_zero_metric(task, test_features.labels)
        preds = fit.probe.predict(test_features.x, test_features.lengths)
        return kind, accuracy(preds, test_features.labels)
    if fit.diverged:
        return kind, predict_zero_metric(task, test_features.y)
    preds = fit.probe.predict(test_features.x)
    if kind == "log_rmse":
        return kind, log_rmse(preds, test_features.y)
    return kind, rmse(preds, test_features.y)


def probe_config_for(features: DatasetFeatures, hidden_dim: int = 0) -> ProbeConfig:
    return ProbeConfig(task=features.task, embed_dim=features.dim, max_len=features.max_len,
                       hidden_dim=hidden_dim, n_classes=features.n_classes)


def train_probe(dataset: Dataset, provider: EmbeddingProvider, config: TrainConfig,
                hidden_dim: int = 0, epoch_hook=None,
                features: DatasetFeatures | None = None) -> RunResult:
    """Full single-run protocol: embed, fit with early stopping, restore the
    best-validation parameters, evaluate the task metric on the test split."""
    t0 = time.perf_counter()
    if features is None:
        features = embed_dataset(dataset, provider)
    probe_config = probe_config_for(features, hidden_dim)
    fit = fit_probe(features.task, features.train, probe_config, config, epoch_hook)
    kind, value = evaluate_probe(features.task, fit, features.test)
    return RunResult(
        task=features.task,
        provider_name=provider.name,
        metric_kind=kind,
        value=value,
        best_epoch=fit.best_epoch,
        epochs_run=fit.epochs_run,
        best_val_loss=fit.best_val_loss,
        val_losses=fit.val_losses,
        diverged=fit.diverged,
        wall_time=time.perf_counter() - t0,
        seed=config.seed,
        max_len=features.max_len,
        config=config,
    )


@dataclass
class GridCell:
    lr: float
    momentum: float
    best_val_loss: float
    best_epoch: int
    epochs_run: int
    diverged: bool


def grid_search(dataset: Dataset, provider: EmbeddingProvider, config: TrainConfig,
                lr_grid=DEFAULT_LR_GRID, momentum_grid=DEFAULT_MOMENTUM_GRID,
                hidden_dim: int = 0) -> tuple[TrainConfig, list[GridCell]]:
    """One run per (lr, momentum) cell on the dedicated search seed; the cell
    with the lowest best validation loss wins, ties toward smaller lr."""
    if not lr_grid or not momentum_grid:
        raise ConfigError("grids must be non-empty")
    features = embed_dataset(dataset, provider)
    probe_config = probe_config_for(features, hidden_dim)
    cells: list[GridCell] = []
    for momentum in momentum_grid:
        for lr in lr_grid:
            cell_config = replace(config, lr=lr, momentum=momentum)
            fit = fit_probe(features.task, features.train, probe_config, cell_config)
            cells.append(GridCell(lr, momentum, fit.best_val_loss, fit.best_epoch,
                                  fit.epochs_run, fit.diverged))
    best = select_best_cell(cells)
    return replace(config, lr=best.lr, momentum=best.momentum), cells


def select_best_cell(cells: list[GridCell]) -> GridCell:
    """Lowest best validation loss wins; ties break toward the smaller lr,
    then the smaller momentum."""
    viable = [c for c in cells if not c.diverged and np.isfinite(c.best_val_loss)]
    if not viable:
        detail = ", ".join(f"(lr={c.lr:g}, m={c.momentum:g})" for c in cells)
        raise ConfigError(f"all grid cells diverged: {detail}")
    return min(viable, key=lambda c: (c.best_val_loss, c.lr, c.momentum))
