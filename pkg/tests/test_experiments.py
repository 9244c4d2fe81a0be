from __future__ import annotations

import json
import math

import numpy as np
import pytest

from quantprobe.embeddings import ProviderSpec
from quantprobe.errors import ConfigError, DataFormatError, MissingDataError
from quantprobe.experiments import (ExperimentSpec, default_threads,
                                    expected_embedding_files, parse_report_csv,
                                    render_report, render_table, report_csv, report_rows,
                                    run_experiment)
from quantprobe.qpemb import write_qpemb
from quantprobe.synthgen import TaskKind, ValueRange, generate_dataset, split_sha256
from quantprobe.training import TrainConfig


def tiny_spec(**overrides) -> ExperimentSpec:
    defaults = dict(
        task=TaskKind.PERCENT,
        vrange=ValueRange(0.0, 99.9),
        provider=ProviderSpec(kind="random", dim=12, seed=0),
        train_config=TrainConfig(lr=1e-2, batch_size=32, max_epochs=3, seed=0),
        runs=2,
        base_seed=40,
        train_n=160,
        test_n=30,
    )
    defaults.update(overrides)
    return ExperimentSpec(**defaults)


def test_run_seeds_follow_base_seed(tmp_path):
    report = run_experiment(tiny_spec(runs=3), tmp_path)
    assert [r.seed for r in report.runs] == [41, 42, 43]


def test_runs_resample_different_data():
    spec = tiny_spec()
    a = generate_dataset(spec.task, spec.vrange, spec.base_seed + 1, 50, 10)
    b = generate_dataset(spec.task, spec.vrange, spec.base_seed + 2, 50, 10)
    assert [ex.input_text for ex in a.train] != [ex.input_text for ex in b.train]


def test_single_run_reports_no_std(tmp_path):
    report = run_experiment(tiny_spec(runs=1), tmp_path)
    assert report.std is None
    assert report.mean == report.runs[0].value
    csv_text = (tmp_path / "report.csv").read_text()
    assert ",std," not in csv_text
    assert ",mean," in csv_text


def test_runs_must_be_positive():
    with pytest.raises(ConfigError):
        tiny_spec(runs=0)


def test_manifests_written_per_run(tmp_path):
    report = run_experiment(tiny_spec(runs=2), tmp_path)
    for i in (1, 2):
        manifest = json.loads((tmp_path / f"run{i}_manifest.json").read_text())
        assert manifest["run_index"] == i
        assert manifest["seed"] == 40 + i
        assert manifest["task"] == "percent"
        assert manifest["metric_kind"] == "rmse"
        assert manifest["value"] == report.runs[i - 1].value
        assert "max_len" in manifest and "wall_time" in manifest


def test_csv_columns_and_round_trip(tmp_path):
    report = run_experiment(tiny_spec(runs=2), tmp_path)
    csv_text = report_csv([report])
    assert csv_text.splitlines()[0] == (
        "task,range_lo,range_hi,provider,run_index,metric_kind,value,diverged,best_epoch,seed")
    rows = parse_report_csv(csv_text)
    assert render_table(rows) == render_table(report_rows([report]))


def test_report_determinism(tmp_path):
    a = run_experiment(tiny_spec(), tmp_path / "a")
    b = run_experiment(tiny_spec(), tmp_path / "b")
    assert (tmp_path / "a/report.csv").read_bytes() == (tmp_path / "b/report.csv").read_bytes()
    assert (tmp_path / "a/report.txt").read_bytes() == (tmp_path / "b/report.txt").read_bytes()


def test_threaded_runs_match_sequential(tmp_path):
    seq = run_experiment(tiny_spec(runs=2), tmp_path / "seq", threads=1)
    par = run_experiment(tiny_spec(runs=2), tmp_path / "par", threads=2)
    assert [r.value for r in seq.runs] == [r.value for r in par.runs]


def test_render_cell_formatting():
    # two run values engineered to aggregate to mean 9.365, std 0.778
    delta = 0.778 / math.sqrt(2.0)
    rows = [
        {"task": "percent", "range_lo": 0.0, "range_hi": 99.9, "provider": "random",
         "run_index": "1", "metric_kind": "rmse", "value": 9.365 - delta},
        {"task": "percent", "range_lo": 0.0, "range_hi": 99.9, "provider": "random",
         "run_index": "2", "metric_kind": "rmse", "value": 9.365 + delta},
    ]
    table = render_table(rows)
    assert "9.365±0.778" in table
    assert "Percents (rmse) [0.0, 99.9]" in table


def test_render_rejects_mixed_metric_kinds():
    rows = [
        {"task": "percent", "range_lo": 0.0, "range_hi": 9.9, "provider": "random",
         "run_index": "1", "metric_kind": "rmse", "value": 1.0},
        {"task": "percent", "range_lo": 0.0, "range_hi": 9.9, "provider": "oracle",
         "run_index": "1", "metric_kind": "accuracy", "value": 0.5},
    ]
    with pytest.raises(DataFormatError, match="mixed metric kinds"):
        render_table(rows)


def test_render_report_requires_input():
    with pytest.raises(ConfigError):
        render_report([])


def test_parse_report_csv_rejects_other_columns():
    with pytest.raises(DataFormatError):
        parse_report_csv("a,b\n1,2\n")


def test_expected_embedding_names():
    ds = generate_dataset(TaskKind.PERCENT, ValueRange(0.0, 9.9), 3, 20, 5)
    names = expected_embedding_files(ds)
    assert names["train"] == f"{split_sha256(ds, 'train')}.qpemb"
    assert names["test"].endswith(".qpemb")


def test_file_provider_missing_embeddings_lists_all(tmp_path):
    emb_dir = tmp_path / "embs"
    emb_dir.mkdir()
    spec = tiny_spec(provider=ProviderSpec(kind="file", path=str(emb_dir)), runs=2)
    with pytest.raises(MissingDataError) as err:
        run_experiment(spec, tmp_path / "out")
    assert len(err.value.missing) == 4  # two runs x two splits
    for i in (1, 2):
        assert (tmp_path / f"out/datasets/run{i}.train.jsonl").exists()
        assert (tmp_path / f"out/datasets/run{i}.test.jsonl").exists()


def test_file_provider_end_to_end(tmp_path):
    emb_dir = tmp_path / "embs"
    emb_dir.mkdir()
    spec = tiny_spec(provider=ProviderSpec(kind="file", path=str(emb_dir)), runs=2)
    rng = np.random.default_rng(0)
    for i in (1, 2):
        ds = generate_dataset(spec.task, spec.vrange, spec.base_seed + i,
                              spec.train_n, spec.test_n)
        for split in ("train", "test"):
            records = [(ex.id, rng.standard_normal((3, 6)).astype(np.float32))
                       for ex in ds.split(split)]
            write_qpemb(emb_dir / f"{split_sha256(ds, split)}.qpemb", records)
    report = run_experiment(spec, tmp_path / "out")
    assert len(report.runs) == 2
    assert all(r.max_len == 3 for r in report.runs)
    assert all(np.isfinite(r.value) for r in report.runs)


def test_grid_with_file_provider_lists_search_dataset_too(tmp_path):
    emb_dir = tmp_path / "embs"
    emb_dir.mkdir()
    spec = tiny_spec(provider=ProviderSpec(kind="file", path=str(emb_dir)),
                     runs=1, grid=True)
    with pytest.raises(MissingDataError) as err:
        run_experiment(spec, tmp_path / "out")
    assert len(err.value.missing) == 4  # search dataset + one run, two splits each
    assert (tmp_path / "out/datasets/run0.train.jsonl").exists()


def test_default_threads_env(monkeypatch):
    monkeypatch.delenv("QUANTPROBE_THREADS", raising=False)
    assert default_threads() == 1
    monkeypatch.setenv("QUANTPROBE_THREADS", "4")
    assert default_threads() == 4
    monkeypatch.setenv("QUANTPROBE_THREADS", "zero")
    with pytest.raises(ConfigError):
        default_threads()


def test_grid_request_runs_search_on_dedicated_seed(tmp_path):
    spec = tiny_spec(grid=True, runs=1,
                     train_config=TrainConfig(lr=1e-3, batch_size=32, max_epochs=2, seed=0))
    report = run_experiment(spec, tmp_path)
    assert report.grid_cells is not None
    assert (tmp_path / "grid.json").exists()
    grid = json.loads((tmp_path / "grid.json").read_text())
    assert grid["chosen"]["lr"] == report.chosen_config.lr
    assert len(grid["cells"]) == 24  # default 12 lrs x 2 momenta
