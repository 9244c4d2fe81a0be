from __future__ import annotations

import pytest

from conftest import write_dataset_file
from qpexport.datasets import DatasetError, read_dataset


def test_reads_regression_records(tmp_path):
    path = tmp_path / "train.jsonl"
    write_dataset_file(path,
                       {"task": "percent", "lo": 0.0, "hi": 99.9, "seed": 7, "split": "train"},
                       [{"id": 0, "input": "10.3%", "targets": [0.103]},
                        {"id": 1, "input": "4.0%", "targets": [0.04]}])
    header, examples = read_dataset(path)
    assert header["task"] == "percent" and header["split"] == "train"
    assert examples == [(0, "10.3%"), (1, "4.0%")]


def test_reads_classification_records(tmp_path):
    path = tmp_path / "test.jsonl"
    write_dataset_file(path,
                       {"task": "unitid", "lo": 0.0, "hi": 9.9, "seed": 1, "split": "test",
                        "lexicon_sha256": "ab"},
                       [{"id": 0, "input": "1.0 hours", "label": 3, "unit": "hours"}])
    header, examples = read_dataset(path)
    assert examples == [(0, "1.0 hours")]


def test_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id":0,"input":"x","targets":[1]}\n', encoding="utf-8")
    with pytest.raises(DatasetError):
        read_dataset(path)


def test_rejects_bad_record(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"task":"percent","split":"train"}\n{"id":0}\n', encoding="utf-8")
    with pytest.raises(DatasetError, match="line 2"):
        read_dataset(path)


def test_rejects_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DatasetError):
        read_dataset(path)
