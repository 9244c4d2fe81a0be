"""Pydantic request/response models for the probing service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class ProviderModel(BaseModel):
    kind: Literal["random", "oracle", "file"]
    dim: int = 768
    seed: int = 0
    init_std: float | None = None
    path: str | None = None


class TrainSettings(BaseModel):
    lr: float = 1e-3
    momentum: float = 0.5
    batch_size: int = 128
    clip_norm: float = 5.0
    max_epochs: int = 1000
    patience: int = 20
    val_fraction: float = 0.1


class GenerateRequest(BaseModel):
    task: str
    lo: float
    hi: float
    seed: int = 0
    train_n: int = 10_000
    test_n: int = 1_000
    lexicon: str | None = None
    log_base: float = 10.0
    out_dir: str


class GenerateResponse(BaseModel):
    out_dir: str
    files: dict[str, str]
    sha256: dict[str, str]
    expected_embeddings: dict[str, str]
    header: dict


class ExpectedFile(BaseModel):
    split: str
    dataset: str
    sha256: str
    qpemb: str


class ExpectResponse(BaseModel):
    dim: int
    files: list[ExpectedFile]


class ExpectRequest(BaseModel):
    dir: str
    dim: int = 768


class ExperimentRequest(BaseModel):
    task: str
    lo: float
    hi: float
    provider: ProviderModel
    runs: int = 5
    seed: int = 0
    train_n: int = 10_000
    test_n: int = 1_000
    grid: bool = False
    settings: TrainSettings = Field(default_factory=TrainSettings)
    lexicon: str | None = None
    log_base: float = 10.0
    hidden_dim: int = 0
    out_dir: str | None = None
    threads: int | None = None


class RunResultModel(BaseModel):
    run_index: int
    seed: int
    metric_kind: str
    value: float
    best_epoch: int
    epochs_run: int
    best_val_loss: float
    diverged: bool
    wall_time: float
    max_len: int


class ExperimentResponse(BaseModel):
    task: str
    lo: float
    hi: float
    provider: str
    metric_kind: str
    runs: list[RunResultModel]
    mean: float
    std: float | None
    diverged_count: int
    lr: float
    momentum: float
    out_dir: str | None
    csv: str
    table: str


class GridRequest(BaseModel):
    task: str
    lo: float
    hi: float
    provider: ProviderModel
    seed: int = 0
    train_n: int = 10_000
    test_n: int = 1_000
    settings: TrainSettings = Field(default_factory=TrainSettings)
    lr_grid: list[float] | None = None
    momentum_grid: list[float] | None = None
    lexicon: str | None = None
    log_base: float = 10.0
    hidden_dim: int = 0
    out_dir: str | None = None


class GridCellModel(BaseModel):
    lr: float
    momentum: float
    best_val_loss: float
    best_epoch: int
    epochs_run: int
    diverged: bool


class GridResponse(BaseModel):
    lr: float
    momentum: float
    cells: list[GridCellModel]
    out_dir: str | None


class RenderRequest(BaseModel):
    csv_paths: list[str]


class RenderResponse(BaseModel):
    table: str


class SelftestCheck(BaseModel):
    name: str
    ok: bool
    detail: str


class SelftestResponse(BaseModel):
    ok: bool
    checks: list[SelftestCheck]


class JobInfo(BaseModel):
    id: str
    kind: str
    status: Literal["queued", "running", "done", "error"]
    error: dict | None = None
    result: ExperimentResponse | GridResponse | None = None


class HealthResponse(BaseModel):
    status: str
    version: str


class TaskInfo(BaseModel):
    name: str
    metric_kind: str
    target_arity: int
    classification: bool
    needs_lexicon: bool
