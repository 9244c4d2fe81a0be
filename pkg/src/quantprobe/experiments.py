"""Experiment protocol: per (task, range, provider), five runs on freshly
sampled data, aggregated as mean and sample std, persisted as run manifests
plus CSV and text report tables.

Run i (1-based) uses seed base_seed + i for both dataset resampling and
training; a requested grid search runs once on seed base_seed - 1 and its
chosen configuration is reused for every evaluation run. File-backed
experiments expect one QPEMB file per generated split, named by the sha256
of the split's serialized bytes.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .embeddings import (EmbeddingProvider, FilePairProvider, OracleProvider, ProviderSpec,
                         QpembEmbeddings, RandomVectorsProvider)
from .errors import ConfigError, DataFormatError, MissingDataError
from .metrics import aggregate, format_cell
from .synthgen import (Dataset, TaskKind, UnitLexicon, ValueRange, default_lexicon,
                       generate_dataset, load_lexicon, split_sha256, write_split)
from .tokenizer import build_vocab
from .training import (DEFAULT_LR_GRID, DEFAULT_MOMENTUM_GRID, GridCell, RunResult,
                       TrainConfig, grid_search, train_probe)

CSV_COLUMNS = ("task", "range_lo", "range_hi", "provider", "run_index",
               "metric_kind", "value", "diverged", "best_epoch", "seed")

TASK_DISPLAY = {
    TaskKind.PERCENT: "Percents",
    TaskKind.BASISPOINT: "Basis Points",
    TaskKind.ORDER: "Orders",
    TaskKind.RANGE: "Ranges",
    TaskKind.ADDITION: "Addition",
    TaskKind.UNITID: "Unit ID",
}


@dataclass
class ExperimentSpec:
    task: TaskKind
    vrange: ValueRange
    provider: ProviderSpec
    train_config: TrainConfig
    runs: int = 5
    base_seed: int = 0
    train_n: int = 10_000
    test_n: int = 1_000
    grid: bool = False
    lexicon_path: str | None = None
    log_base: float = 10.0
    hidden_dim: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    runs: list[RunResult]
    mean: float
    std: float | None
    diverged_count: int
    chosen_config: TrainConfig
    grid_cells: list[GridCell] | None = None

    @property
    def metric_kind(self) -> str:
        return self.runs[0].metric_kind


def _lexicon_for(spec: ExperimentSpec) -> UnitLexicon | None:
    if not spec.task.needs_lexicon:
        return None
    if spec.lexicon_path:
        return load_lexicon(spec.lexicon_path)
    return default_lexicon()


def _generate(spec: ExperimentSpec, seed: int, lexicon: UnitLexicon | None) -> Dataset:
    return generate_dataset(spec.task, spec.vrange, seed, spec.train_n, spec.test_n,
                            lexicon, spec.log_base)


def _expected_qpemb_paths(spec: ExperimentSpec, dataset: Dataset) -> dict[str, Path]:
    emb_dir = Path(spec.provider.path)
    return {split: emb_dir / f"{split_sha256(dataset, split)}.qpemb"
            for split in ("train", "test")}


def build_provider(spec: ExperimentSpec, dataset: Dataset,
                   out_dir: Path | None = None, run_index: int = 0) -> EmbeddingProvider:
    p = spec.provider
    if p.kind == "random":
        vocab = build_vocab(dataset.lexicon)
        return RandomVectorsProvider(len(vocab), p.dim, p.seed, p.init_std)
    if p.kind == "oracle":
        return OracleProvider(p.dim, p.seed)
    # file provider: per-split QPEMB files named by the split's content hash
    splits = {}
    missing = []
    for split, qpemb in _expected_qpemb_paths(spec, dataset).items():
        if not qpemb.exists():
            missing.append(str(qpemb))
            if out_dir is not None:
                _write_dataset_for_export(dataset, split, out_dir, run_index)
        else:
            splits[split] = QpembEmbeddings(qpemb)
    if missing:
        raise MissingDataError(
            f"run {run_index}: missing embedding files (datasets written for export)", missing)
    return FilePairProvider(splits["train"], splits["test"])


def _write_dataset_for_export(dataset: Dataset, split: str, out_dir: Path, run_index: int):
    ds_dir = out_dir / "datasets"
    ds_dir.mkdir(parents=True, exist_ok=True)
    write_split(dataset, split, ds_dir / f"run{run_index}.{split}.jsonl")


def run_experiment(spec: ExperimentSpec, out_dir: str | Path | None = None,
                   threads: int = 1) -> ExperimentReport:
    """Execute the full protocol for one (task, range, provider) cell."""
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    lexicon = _lexicon_for(spec)

    # Generate every dataset first and, for file-backed experiments, report
    # all missing embedding files at once (writing the datasets out so the
    # exporter can be driven batch-wise). Embedding files themselves load
    # lazily per run to keep peak memory at one run's worth.
    search_ds = _generate(spec, spec.base_seed - 1, lexicon) if spec.grid else None
    datasets = [_generate(spec, spec.base_seed + i, lexicon)
                for i in range(1, spec.runs + 1)]
    if spec.provider.kind == "file":
        missing: list[str] = []
        indexed = ([(0, search_ds)] if search_ds is not None else []) + list(
            enumerate(datasets, start=1))
        for i, ds in indexed:
            for split, qpemb in _expected_qpemb_paths(spec, ds).items():
                if not qpemb.exists():
                    missing.append(str(qpemb))
                    if out_path is not None:
                        _write_dataset_for_export(ds, split, out_path, i)
        if missing:
            raise MissingDataError(
                f"{len(missing)} embedding file(s) missing; generated datasets were "
                f"written under {out_path / 'datasets' if out_path else 'the output directory'}",
                missing)

    chosen = spec.train_config
    grid_cells = None
    if spec.grid:
        search_provider = build_provider(spec, search_ds, out_path, 0)
        search_config = replace(chosen, seed=spec.base_seed - 1)
        chosen, grid_cells = grid_search(search_ds, search_provider, search_config,
                                         DEFAULT_LR_GRID, DEFAULT_MOMENTUM_GRID,
                                         spec.hidden_dim)

    def one_run(i: int) -> RunResult:
        config = replace(chosen, seed=spec.base_seed + i)
        provider = build_provider(spec, datasets[i - 1], out_path, i)
        return train_probe(datasets[i - 1], provider, config, spec.hidden_dim)

    indices = list(range(1, spec.runs + 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_run, indices))
    else:
        results = [one_run(i) for i in indices]

    values = [r.value for r in results]
    if len(values) >= 2:
        mean, std = aggregate(values)
    else:
        mean, std = values[0], None
    report = ExperimentReport(
        spec=spec,
        runs=results,
        mean=mean,
        std=std,
        diverged_count=sum(r.diverged for r in results),
        chosen_config=chosen,
        grid_cells=grid_cells,
    )
    if out_path is not None:
        persist_report(report, out_path)
    return report


# --- persistence -----------------------------------------------------------


def run_manifest(spec: ExperimentSpec, result: RunResult) -> dict:
    return {
        "task": spec.task.value,
        "range": {"lo": spec.vrange.lo, "hi": spec.vrange.hi},
        "provider": {
            "kind": spec.provider.kind,
            "dim": spec.provider.dim,
            "seed": spec.provider.seed,
            "init_std": spec.provider.init_std,
            "path": spec.provider.path,
        },
        "train_n": spec.train_n,
        "test_n": spec.test_n,
        "log_base": spec.log_base,
        "config": {
            "lr": result.config.lr,
            "momentum": result.config.momentum,
            "batch_size": result.config.batch_size,
            "clip_norm": result.config.clip_norm,
            "max_epochs": result.config.max_epochs,
            "patience": result.config.patience,
            "val_fraction": result.config.val_fraction,
        },
        "seed": result.seed,
        "max_len": result.max_len,
        "metric_kind": result.metric_kind,
        "value": result.value,
        "best_epoch": result.best_epoch,
        "epochs_run": result.epochs_run,
        "best_val_loss": result.best_val_loss,
        "val_losses": result.val_losses,
        "diverged": result.diverged,
        "wall_time": result.wall_time,
    }


def persist_report(report: ExperimentReport, out_dir: Path):
    for i, result in enumerate(report.runs, start=1):
        manifest = run_manifest(report.spec, result)
        manifest["run_index"] = i
        path = out_dir / f"run{i}_manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if report.grid_cells is not None:
        cells = [{"lr": c.lr, "momentum": c.momentum, "best_val_loss": c.best_val_loss,
                  "best_epoch": c.best_epoch, "epochs_run": c.epochs_run,
                  "diverged": c.diverged} for c in report.grid_cells]
        grid = {"chosen": {"lr": report.chosen_config.lr,
                           "momentum": report.chosen_config.momentum},
                "cells": cells}
        (out_dir / "grid.json").write_text(json.dumps(grid, indent=2) + "\n", encoding="utf-8")
    (out_dir / "report.csv").write_bytes(report_csv([report]).encode("utf-8"))
    (out_dir / "report.txt").write_bytes(render_table(report_rows([report])).encode("utf-8"))


# --- report rendering --------------------------------------------------------


def report_rows(reports: list[ExperimentReport]) -> list[dict]:
    """Flatten reports into CSV-shaped row dicts (per-run plus aggregates)."""
    rows = []
    for rep in reports:
        base = {
            "task": rep.spec.task.value,
            "range_lo": rep.spec.vrange.lo,
            "range_hi": rep.spec.vrange.hi,
            "provider": rep.spec.provider.kind,
            "metric_kind": rep.metric_kind,
        }
        for i, r in enumerate(rep.runs, start=1):
            rows.append({**base, "run_index": str(i), "value": r.value,
                         "diverged": int(r.diverged), "best_epoch": r.best_epoch,
                         "seed": r.seed})
        rows.append({**base, "run_index": "mean", "value": rep.mean,
                     "diverged": rep.diverged_count, "best_epoch": "", "seed": ""})
        if rep.std is not None:
            rows.append({**base, "run_index": "std", "value": rep.std,
                         "diverged": "", "best_epoch": "", "seed": ""})
    return rows


def report_csv(reports: list[ExperimentReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report_rows(reports):
        writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})
    return buf.getvalue()


def parse_report_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise DataFormatError(f"report CSV must have columns {','.join(CSV_COLUMNS)}")
    return list(reader)


def render_table(rows: list[dict]) -> str:
    """Text table of mean+-std cells: providers as rows, (task, range) as
    columns, mirroring the experiment summary layout."""
    per_run: dict[tuple, dict[str, list]] = {}
    for row in rows:
        if row["run_index"] in ("mean", "std"):
            continue
        task = TaskKind.parse(str(row["task"]))
        col = (task, float(row["range_lo"]), float(row["range_hi"]))
        cell = per_run.setdefault(col, {}).setdefault(str(row["provider"]), [])
        cell.append((str(row["metric_kind"]), float(row["value"])))
    if not per_run:
        raise DataFormatError("no per-run rows to render")

    columns = sorted(per_run.keys(), key=lambda c: (c[0].value, c[1], c[2]))
    providers: list[str] = []
    for col in columns:
        for name in per_run[col]:
            if name not in providers:
                providers.append(name)

    headers = ["provider"]
    for task, lo, hi in columns:
        kinds = {k for cells in per_run[(task, lo, hi)].values() for k, _ in cells}
        if len(kinds) != 1:
            raise DataFormatError(
                f"mixed metric kinds {sorted(kinds)} in column {task.value} [{lo:.1f}, {hi:.1f}]")
        headers.append(f"{TASK_DISPLAY[task]} ({kinds.pop()}) [{lo:.1f}, {hi:.1f}]")

    body = []
    for name in providers:
        cells = [name]
        for col in columns:
            values = [v for _, v in per_run[col].get(name, [])]
            if not values:
                cells.append("-")
            elif len(values) == 1:
                cells.append(format_cell(values[0], None))
            else:
                mean, std = aggregate(values)
                cells.append(format_cell(mean, std))
        body.append(cells)

    widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_report(reports: list[ExperimentReport]) -> tuple[str, str]:
    """(csv_text, table_text) for a batch of experiment reports."""
    if not reports:
        raise ConfigError("render_report needs at least one report")
    return report_csv(reports), render_table(report_rows(reports))


def expected_embedding_files(dataset: Dataset, emb_dir: str | Path | None = None) -> dict[str, str]:
    """QPEMB file names a file provider will demand for this dataset."""
    names = {}
    for split in ("train", "test"):
        name = f"{split_sha256(dataset, split)}.qpemb"
        names[split] = str(Path(emb_dir) / name) if emb_dir else name
    return names


def default_threads() -> int:
    env = os.environ.get("QUANTPROBE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QUANTPROBE_THREADS={env!r} is not an integer") from None
    return 1
