"""Embedding providers: frozen maps from a tokenized example to a matrix of
per-token vectors.

Three kinds exist: a seeded random lookup table (the chance baseline), a test
oracle that hides the target in the first vector component (positive control
for the training pipeline), and a file-backed provider serving matrices
exported by external encoders via QPEMB files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, MissingDataError
from .qpemb import read_qpemb
from .synthgen import Example
from .tokenizer import PAD_ID, TokenSeq

DEFAULT_DIM = 768
ORACLE_NOISE_STD = 0.01


@dataclass(frozen=True)
class ProviderSpec:
    kind: str  # "random" | "oracle" | "file"
    dim: int = DEFAULT_DIM
    seed: int = 0
    init_std: float | None = None  # random kind only; default dim^(-1/2)
    path: str | None = None  # file kind only: directory of .qpemb files

    def __post_init__(self):
        if self.kind not in ("random", "oracle", "file"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.kind != "file" and self.dim <= 0:
            raise ConfigError(f"provider dim must be positive, got {self.dim}")
        if self.kind == "file" and not self.path:
            raise ConfigError("file provider requires a path")

    @property
    def name(self) -> str:
        return self.kind if self.kind != "file" else f"file:{self.path}"


def parse_provider(text: str, dim: int = DEFAULT_DIM, seed: int = 0,
                   init_std: float | None = None) -> ProviderSpec:
    """Parse the CLI provider syntax: random | oracle | file:DIR."""
    text = text.strip()
    if text in ("random", "oracle"):
        return ProviderSpec(kind=text, dim=dim, seed=seed, init_std=init_std)
    if text.startswith("file:"):
        return ProviderSpec(kind="file", dim=dim, seed=seed, path=text[5:])
    raise ConfigError(f"unknown provider {text!r}; expected random, oracle, or file:DIR")


def random_table(vocab_size: int, dim: int, seed: int, init_std: float | None = None) -> np.ndarray:
    """Seeded i.i.d. Gaussian embedding table with the PAD row zeroed."""
    if vocab_size <= 0 or dim <= 0:
        raise ConfigError(f"table shape must be positive, got {vocab_size}x{dim}")
    std = dim ** -0.5 if init_std is None else init_std
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    table = rng.normal(0.0, std, (vocab_size, dim))
    table[PAD_ID] = 0.0
    return table


class EmbeddingProvider:
    """Base interface. Providers are immutable after construction; embed is
    referentially transparent."""

    dim: int
    name: str
    needs_tokens = True

    def split_embedder(self, split: str):
        """Per-split embed callable; split-independent by default."""
        return self.embed

    def embed(self, example: Example, tokens: TokenSeq | None) -> np.ndarray:
        raise NotImplementedError


class RandomVectorsProvider(EmbeddingProvider):
    def __init__(self, vocab_size: int, dim: int = DEFAULT_DIM, seed: int = 0,
                 init_std: float | None = None):
        self.dim = dim
        self.name = "random"
        self.table = random_table(vocab_size, dim, seed, init_std)

    def embed(self, example: Example, tokens: TokenSeq | None) -> np.ndarray:
        return self.table[np.asarray(tokens.ids)]


class OracleProvider(EmbeddingProvider):
    """Positive control: component 0 of every token vector carries the
    example's first target (or its label index), the rest is seeded noise."""

    needs_tokens = True

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0, noise_std: float = ORACLE_NOISE_STD):
        self.dim = dim
        self.seed = seed
        self.noise_std = noise_std
        self.name = "oracle"

    def embed(self, example: Example, tokens: TokenSeq | None) -> np.ndarray:
        value = example.targets[0] if example.targets else float(example.label_index)
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((self.seed, example.id))))
        matrix = rng.normal(0.0, self.noise_std, (len(tokens), self.dim))
        matrix[:, 0] = value
        return matrix


class QpembEmbeddings(EmbeddingProvider):
    """Matrices for one dataset split, loaded from a QPEMB file."""

    needs_tokens = False

    def __init__(self, path: str | Path, expected_dim: int | None = None):
        self.path = str(path)
        self.name = f"file:{path}"
        dim, records = read_qpemb(path)
        if expected_dim is not None and dim != expected_dim:
            raise DataFormatError(
                f"{path}: file dim {dim} does not match expected dim {expected_dim}")
        self.dim = dim
        self._records = records

    def __len__(self) -> int:
        return len(self._records)

    def embed(self, example: Example, tokens: TokenSeq | None = None) -> np.ndarray:
        try:
            return self._records[example.id].astype(np.float64)
        except KeyError:
            raise MissingDataError(
                f"{self.path}: no embedding record for example id {example.id}") from None


class FilePairProvider(EmbeddingProvider):
    """Routes train/test splits to their respective QPEMB files."""

    needs_tokens = False

    def __init__(self, train: QpembEmbeddings, test: QpembEmbeddings):
        if train.dim != test.dim:
            raise DataFormatError(
                f"split dim mismatch: train {train.dim} vs test {test.dim}")
        self.dim = train.dim
        self.name = "file"
        self._splits = {"train": train, "test": test}

    def split_embedder(self, split: str):
        return self._splits[split].embed

    def embed(self, example: Example, tokens: TokenSeq | None) -> np.ndarray:
        raise ConfigError("file provider requires a split-bound embedder")
