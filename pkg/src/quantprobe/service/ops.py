"""Service operations: the functions behind each endpoint.

Everything here speaks pydantic models on the outside and core dataclasses on
the inside; the CLI and the HTTP routes both funnel through these.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

import numpy as np

from ..embeddings import OracleProvider, ProviderSpec
from ..errors import ConfigError, DataFormatError
from ..experiments import (ExperimentReport, ExperimentSpec, default_threads,
                           parse_report_csv, render_table, run_experiment)
from ..metrics import rmse
from ..nn import finite_difference_check
from ..probes import ProbeConfig, build_probe
from ..qpemb import read_qpemb, write_qpemb
from ..synthgen import (TaskKind, ValueRange, generate_dataset, load_lexicon, read_split,
                        write_split)
from ..training import TrainConfig, grid_search, train_probe
from . import schemas


def _task(name: str) -> TaskKind:
    return TaskKind.parse(name)


def _train_config(settings: schemas.TrainSettings, seed: int) -> TrainConfig:
    return TrainConfig(
        lr=settings.lr,
        momentum=settings.momentum,
        batch_size=settings.batch_size,
        clip_norm=settings.clip_norm,
        max_epochs=settings.max_epochs,
        patience=settings.patience,
        val_fraction=settings.val_fraction,
        seed=seed,
    )


def _provider_spec(model: schemas.ProviderModel) -> ProviderSpec:
    return ProviderSpec(kind=model.kind, dim=model.dim, seed=model.seed,
                        init_std=model.init_std, path=model.path)


def list_tasks() -> list[schemas.TaskInfo]:
    return [
        schemas.TaskInfo(
            name=t.value,
            metric_kind=t.metric_kind,
            target_arity=t.target_arity,
            classification=t.is_classification,
            needs_lexicon=t.needs_lexicon,
        )
        for t in TaskKind
    ]


def generate(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
    task = _task(req.task)
    vrange = ValueRange(req.lo, req.hi)
    lexicon = load_lexicon(req.lexicon) if req.lexicon else None
    ds = generate_dataset(task, vrange, req.seed, req.train_n, req.test_n,
                          lexicon, req.log_base)
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, shas = {}, {}
    for split in ("train", "test"):
        path = out / f"{split}.jsonl"
        shas[split] = write_split(ds, split, path)
        files[split] = str(path)
    header = {"task": task.value, "lo": vrange.lo, "hi": vrange.hi, "seed": req.seed,
              "train_n": req.train_n, "test_n": req.test_n, "log_base": req.log_base}
    if ds.lexicon_sha256:
        header["lexicon_sha256"] = ds.lexicon_sha256
    manifest = {**header, "files": files, "sha256": shas}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return schemas.GenerateResponse(
        out_dir=str(out),
        files=files,
        sha256=shas,
        expected_embeddings={split: f"{sha}.qpemb" for split, sha in shas.items()},
        header=header,
    )


def expect(req: schemas.ExpectRequest) -> schemas.ExpectResponse:
    manifest_path = Path(req.dir) / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {req.dir}; run gen first")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        files = manifest["files"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"corrupted manifest {manifest_path}: {e}") from e
    out = []
    import hashlib

    for split in ("train", "test"):
        path = Path(files[split])
        if not path.is_absolute():
            path = Path(req.dir) / path
        if not path.exists():
            raise ConfigError(f"dataset file {path} listed in manifest is missing")
        read_split(path)  # validates the file still parses
        sha = hashlib.sha256(path.read_bytes()).hexdigest()
        out.append(schemas.ExpectedFile(split=split, dataset=str(path), sha256=sha,
                                        qpemb=f"{sha}.qpemb"))
    return schemas.ExpectResponse(dim=req.dim, files=out)


def _experiment_spec(req: schemas.ExperimentRequest) -> ExperimentSpec:
    return ExperimentSpec(
        task=_task(req.task),
        vrange=ValueRange(req.lo, req.hi),
        provider=_provider_spec(req.provider),
        train_config=_train_config(req.settings, req.seed),
        runs=req.runs,
        base_seed=req.seed,
        train_n=req.train_n,
        test_n=req.test_n,
        grid=req.grid,
        lexicon_path=req.lexicon,
        log_base=req.log_base,
        hidden_dim=req.hidden_dim,
    )


def _report_response(report: ExperimentReport, out_dir: str | None) -> schemas.ExperimentResponse:
    from ..experiments import render_report

    csv_text, table_text = render_report([report])
    runs = [
        schemas.RunResultModel(
            run_index=i,
            seed=r.seed,
            metric_kind=r.metric_kind,
            value=r.value,
            best_epoch=r.best_epoch,
            epochs_run=r.epochs_run,
            best_val_loss=r.best_val_loss,
            diverged=r.diverged,
            wall_time=r.wall_time,
            max_len=r.max_len,
        )
        for i, r in enumerate(report.runs, start=1)
    ]
    return schemas.ExperimentResponse(
        task=report.spec.task.value,
        lo=report.spec.vrange.lo,
        hi=report.spec.vrange.hi,
        provider=report.spec.provider.kind,
        metric_kind=report.metric_kind,
        runs=runs,
        mean=report.mean,
        std=report.std,
        diverged_count=report.diverged_count,
        lr=report.chosen_config.lr,
        momentum=report.chosen_config.momentum,
        out_dir=out_dir,
        csv=csv_text,
        table=table_text,
    )


def experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
    spec = _experiment_spec(req)
    threads = req.threads if req.threads is not None else default_threads()
    report = run_experiment(spec, req.out_dir, threads=threads)
    return _report_response(report, req.out_dir)


def grid(req: schemas.GridRequest) -> schemas.GridResponse:
    task = _task(req.task)
    vrange = ValueRange(req.lo, req.hi)
    lexicon = load_lexicon(req.lexicon) if req.lexicon else None
    ds = generate_dataset(task, vrange, req.seed, req.train_n, req.test_n,
                          lexicon, req.log_base)
    provider_spec = _provider_spec(req.provider)
    if provider_spec.kind == "file":
        raise ConfigError("standalone grid search supports random/oracle providers; "
                          "use run --grid for file-backed experiments")
    from ..experiments import build_provider  # shared construction rules

    spec = _experiment_spec(schemas.ExperimentRequest(
        task=req.task, lo=req.lo, hi=req.hi, provider=req.provider, seed=req.seed,
        train_n=req.train_n, test_n=req.test_n, settings=req.settings,
        lexicon=req.lexicon, log_base=req.log_base, hidden_dim=req.hidden_dim))
    provider = build_provider(spec, ds)
    config = _train_config(req.settings, req.seed)
    kwargs = {}
    if req.lr_grid:
        kwargs["lr_grid"] = tuple(req.lr_grid)
    if req.momentum_grid:
        kwargs["momentum_grid"] = tuple(req.momentum_grid)
    chosen, cells = grid_search(ds, provider, config, hidden_dim=req.hidden_dim, **kwargs)
    cell_models = [schemas.GridCellModel(lr=c.lr, momentum=c.momentum,
                                         best_val_loss=c.best_val_loss, best_epoch=c.best_epoch,
                                         epochs_run=c.epochs_run, diverged=c.diverged)
                   for c in cells]
    if req.out_dir:
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"chosen": {"lr": chosen.lr, "momentum": chosen.momentum},
                   "cells": [c.model_dump() for c in cell_models]}
        (out / "grid.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return schemas.GridResponse(lr=chosen.lr, momentum=chosen.momentum, cells=cell_models,
                                out_dir=req.out_dir)


def render(req: schemas.RenderRequest) -> schemas.RenderResponse:
    if not req.csv_paths:
        raise ConfigError("no CSV files given")
    rows = []
    for path in req.csv_paths:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}") from e
        rows.extend(parse_report_csv(text))
    return schemas.RenderResponse(table=render_table(rows))


# --- selftest ---------------------------------------------------------------


def _check_gradients() -> str:
    rng = np.random.default_rng(11)
    worst = 0.0
    for task, kwargs in ((TaskKind.PERCENT, {}), (TaskKind.RANGE, {}),
                         (TaskKind.UNITID, {"n_classes": 3})):
        config = ProbeConfig(task, embed_dim=8, max_len=3, hidden_dim=4, **kwargs)
        probe = build_probe(config, np.random.default_rng(5))
        if task is TaskKind.UNITID:
            x = rng.normal(size=(4, 3, 8))
            lengths = rng.integers(1, 4, size=4)
            labels = rng.integers(0, 3, size=4)
            fn = lambda: probe.loss_and_grad(x, lengths, labels)
        else:
            x = rng.normal(size=(4, 24))
            y = rng.normal(size=(4, config.output_arity))
            fn = lambda: probe.loss_and_grad(x, y)
        worst = max(worst, finite_difference_check(fn, probe.params))
    return f"worst relative error {worst:.2e}"


def _check_qpemb() -> str:
    rng = np.random.default_rng(13)
    records = [(i, rng.normal(size=(int(rng.integers(1, 5)), 6)).astype(np.float32))
               for i in range(20)]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "roundtrip.qpemb"
        write_qpemb(path, records)
        dim, loaded = read_qpemb(path)
    if dim != 6 or len(loaded) != 20:
        raise DataFormatError("round trip lost records")
    for i, m in records:
        if not np.array_equal(loaded[i], m):
            raise DataFormatError(f"record {i} changed in round trip")
    return "20-record round trip bit-exact"


def _check_oracle_pipeline() -> str:
    ds = generate_dataset(TaskKind.PERCENT, ValueRange(0.0, 99.9), seed=5,
                          train_n=600, test_n=120)
    provider = OracleProvider(dim=16, seed=0)
    config = TrainConfig(lr=3e-2, momentum=0.5, batch_size=64, max_epochs=40,
                         patience=20, seed=5)
    result = train_probe(ds, provider, config)
    if result.diverged or result.value > 0.05:
        raise ConfigError(f"oracle pipeline RMSE {result.value:.4f} (diverged={result.diverged})")
    return f"oracle RMSE {result.value:.4f} after {result.epochs_run} epochs"


def _check_metrics() -> str:
    if abs(rmse([1.0, 2.0, 3.0], [1.0, 2.0, 5.0]) - (4.0 / 3.0) ** 0.5) > 1e-9:
        raise ConfigError("rmse oracle value mismatch")
    return "rmse oracle ok"


def selftest() -> schemas.SelftestResponse:
    checks = []
    for name, fn in (("gradient_check", _check_gradients),
                     ("qpemb_roundtrip", _check_qpemb),
                     ("metrics", _check_metrics),
                     ("oracle_pipeline", _check_oracle_pipeline)):
        try:
            checks.append(schemas.SelftestCheck(name=name, ok=True, detail=fn()))
        except Exception as e:
            checks.append(schemas.SelftestCheck(name=name, ok=False, detail=str(e)))
    return schemas.SelftestResponse(ok=all(c.ok for c in checks), checks=checks)
