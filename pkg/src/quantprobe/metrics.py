"""Task metrics and multi-run aggregation."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .synthgen import TaskKind

METRIC_FOR_TASK = {task: task.metric_kind for task in TaskKind}


def rmse(preds, targets) -> float:
    """sqrt(mean((p - t)^2)) over flattened pairs; multi-output predictions
    pool every output stream into one error population."""
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.size != t.size:
        raise ConfigError(f"rmse: {p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ConfigError("rmse: empty input")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def log_rmse(preds, log_targets) -> float:
    """RMSE where both sides already live in log space."""
    return rmse(preds, log_targets)


def accuracy(pred_labels, labels) -> float:
    p = np.asarray(pred_labels).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.size != t.size:
        raise ConfigError(f"accuracy: {p.size} predictions vs {t.size} labels")
    if p.size == 0:
        raise ConfigError("accuracy: empty input")
    return float(np.mean(p == t))


def aggregate(values: list[float]) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (n-1 denominator)."""
    if len(values) < 2:
        raise ConfigError(f"aggregate needs at least 2 values, got {len(values)}")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1))


def format_cell(mean: float, std: float | None) -> str:
    """Report cell text, 3 decimals (python's round-half-even formatting)."""
    if std is None:
        return f"{mean:.3f}"
    return f"{mean:.3f}±{std:.3f}"


def predict_mean_rmse(lo: float, hi: float, transform) -> float:
    """RMSE of the constant mean predictor over the uniform single-decimal
    grid [lo, hi] with targets transform(v): the population std."""
    tenths = np.arange(round(lo * 10), round(hi * 10) + 1)
    targets = np.asarray([transform(t / 10.0) for t in tenths], dtype=np.float64)
    return float(targets.std(ddof=0))


def predict_zero_metric(task: TaskKind, targets_or_labels) -> float:
    """Metric value of the all-zeros predictor (recorded for diverged runs)."""
    if task.is_classification:
        labels = np.asarray(targets_or_labels)
        return accuracy(np.zeros_like(labels), labels)
    t = np.asarray(targets_or_labels, dtype=np.float64)
    return rmse(np.zeros_like(t), t)


def is_better(metric_kind: str, a: float, b: float) -> bool:
    """True when value a beats value b for the given metric kind."""
    if metric_kind == "accuracy":
        return a > b
    return a < b


def check_metric_finite(value: float) -> bool:
    return math.isfinite(value)
