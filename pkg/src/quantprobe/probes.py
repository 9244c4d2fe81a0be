"""The three probe architectures over padded embedding inputs.

Regression probes consume the zero-padded, flattened concatenation of the
per-token vectors (three dense layers, ReLU on the first two, linear output).
The unit classifier runs a BiLSTM over the unpadded token vectors and feeds
the concatenated final hidden states through a dense softmax layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError, ShapeError
from .nn import BiLSTM, Dense, ParamSet, ReLU, mse, softmax, softmax_xent, summed_mse
from .synthgen import TaskKind

REGRESSION_HIDDEN = 100
RANGE_HIDDEN = 50
BILSTM_HIDDEN = 5


def default_hidden_dim(task: TaskKind) -> int:
    if task is TaskKind.RANGE:
        return RANGE_HIDDEN
    if task is TaskKind.UNITID:
        return BILSTM_HIDDEN
    return REGRESSION_HIDDEN


@dataclass(frozen=True)
class ProbeConfig:
    task: TaskKind
    embed_dim: int
    max_len: int
    hidden_dim: int = 0  # 0 -> task default
    n_classes: int = 0  # unitid only

    def __post_init__(self):
        if self.embed_dim <= 0 or self.max_len <= 0:
            raise ConfigError("embed_dim and max_len must be positive")
        if self.hidden_dim == 0:
            object.__setattr__(self, "hidden_dim", default_hidden_dim(self.task))
        if self.task is TaskKind.UNITID and self.n_classes < 2:
            raise ConfigError("unitid probe needs n_classes >= 2")

    @property
    def output_arity(self) -> int:
        return self.n_classes if self.task is TaskKind.UNITID else self.task.target_arity


def pad_and_flatten(matrix: np.ndarray, max_len: int) -> np.ndarray:
    """Right-pad with zero rows to max_len, then row-major flatten."""
    rows, dim = matrix.shape
    if rows > max_len:
        raise DataFormatError(
            f"example has {rows} tokens but max_len is {max_len} (dataset/provider mismatch)")
    out = np.zeros(max_len * dim)
    out[: rows * dim] = matrix.reshape(-1)
    return out


class MLPProbe:
    """dense -> ReLU -> dense -> ReLU -> dense, linear outputs."""

    def __init__(self, config: ProbeConfig, rng: np.random.Generator):
        if config.task is TaskKind.UNITID:
            raise ConfigError("unitid uses the BiLSTM probe")
        self.config = config
        self.params = ParamSet()
        in_dim = config.max_len * config.embed_dim
        h = config.hidden_dim
        self._l1 = Dense(self.params, "l1", in_dim, h, rng)
        self._a1 = ReLU()
        self._l2 = Dense(self.params, "l2", h, h, rng)
        self._a2 = ReLU()
        self._l3 = Dense(self.params, "l3", h, config.output_arity, rng)
        self._loss = summed_mse if config.task is TaskKind.RANGE else mse

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = self._a1.forward(self._l1.forward(x))
        out = self._a2.forward(self._l2.forward(out))
        return self._l3.forward(out)

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        value, _ = self._loss(self.predict(x), y)
        return value

    def loss_and_grad(self, x: np.ndarray, y: np.ndarray) -> float:
        value, dpred = self._loss(self.predict(x), y)
        dout = self._l3.backward(dpred)
        dout = self._l2.backward(self._a2.backward(dout))
        self._l1.backward(self._a1.backward(dout))
        return value


class BiLSTMProbe:
    """BiLSTM over token vectors; final states of both directions feed a
    dense softmax classifier."""

    def __init__(self, config: ProbeConfig, rng: np.random.Generator):
        if config.task is not TaskKind.UNITID:
            raise ConfigError("BiLSTM probe is for the unitid task")
        self.config = config
        self.params = ParamSet()
        self._lstm = BiLSTM(self.params, "lstm", config.embed_dim, config.hidden_dim, rng)
        self._out = Dense(self.params, "out", 2 * config.hidden_dim, config.n_classes, rng)

    def logits(self, x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        return self._out.forward(self._lstm.forward(x, lengths))

    def predict_proba(self, x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x, lengths))

    def predict(self, x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        # np.argmax takes the first maximum: ties resolve to the smallest index
        return np.argmax(self.logits(x, lengths), axis=1)

    def loss(self, x: np.ndarray, lengths: np.ndarray, labels: np.ndarray) -> float:
        value, _ = softmax_xent(self.logits(x, lengths), labels)
        return value

    def loss_and_grad(self, x: np.ndarray, lengths: np.ndarray, labels: np.ndarray) -> float:
        value, dlogits = softmax_xent(self.logits(x, lengths), labels)
        self._lstm.backward(self._out.backward(dlogits))
        return value


def build_probe(config: ProbeConfig, rng: np.random.Generator):
    if config.task is TaskKind.UNITID:
        return BiLSTMProbe(config, rng)
    return MLPProbe(config, rng)


def probe_loss(probe, batch: tuple) -> float:
    """Task loss on a batch without touching gradients."""
    if isinstance(probe, BiLSTMProbe):
        x, lengths, labels = batch
        return probe.loss(x, lengths, labels)
    x, y = batch
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"batch size mismatch: {x.shape[0]} inputs vs {y.shape[0]} targets")
    return probe.loss(x, y)
