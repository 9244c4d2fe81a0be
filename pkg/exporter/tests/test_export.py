from __future__ import annotations

import numpy as np
import pytest
from transformers import AutoTokenizer

from conftest import write_dataset_file
from qpexport.cli import main as cli_main
from qpexport.export import ExportError, ExportJob, export
from qpexport.qpemb import read_qpemb
from qpexport.registry import RegistryError, available_models, load_encoder

HEADER = {"task": "percent", "lo": 0.0, "hi": 99.9, "seed": 7, "split": "train"}


def percent_dataset(path, n=6):
    records = [{"id": i, "input": f"{i}.5%", "targets": [(10 * i + 5) / 1000.0]}
               for i in range(n)]
    write_dataset_file(path, HEADER, records)
    return path


def test_registry_covers_paper_models():
    names = available_models()
    for expected in ("pegasus-xsum", "pegasus-cdm", "t5-cdm", "bart-xsum", "bart-cdm",
                     "distilbart-xsum", "distilbart-cdm", "prophetnet-cdm",
                     "bert-trained", "bert-untrained"):
        assert expected in names


def test_unknown_model_rejected():
    with pytest.raises(RegistryError):
        load_encoder("gpt-17")


def test_export_counts_and_ids(tmp_path, tiny_bert):
    ds = percent_dataset(tmp_path / "train.jsonl", n=3)
    out = tmp_path / "out.qpemb"
    summary = export(ExportJob(model=f"local:{tiny_bert}", dataset=ds, out=out))
    assert summary["records"] == 3
    dim, records = read_qpemb(out)
    assert dim == summary["dim"] == 128
    assert set(records) == {0, 1, 2}


def test_token_counts_match_tokenizer(tmp_path, tiny_bert):
    ds = percent_dataset(tmp_path / "train.jsonl", n=4)
    out = tmp_path / "out.qpemb"
    export(ExportJob(model=f"local:{tiny_bert}", dataset=ds, out=out))
    _, records = read_qpemb(out)
    tokenizer = AutoTokenizer.from_pretrained(tiny_bert)
    for ex_id in records:
        expected = len(tokenizer(f"{ex_id}.5%")["input_ids"])
        assert records[ex_id].shape[0] == expected


def test_export_deterministic(tmp_path, tiny_bert):
    ds = percent_dataset(tmp_path / "train.jsonl", n=5)
    a, b = tmp_path / "a.qpemb", tmp_path / "b.qpemb"
    export(ExportJob(model=f"local:{tiny_bert}", dataset=ds, out=a, batch_size=2))
    export(ExportJob(model=f"local:{tiny_bert}", dataset=ds, out=b, batch_size=2))
    assert a.read_bytes() == b.read_bytes()


def test_finite_values(tmp_path, tiny_bert):
    ds = percent_dataset(tmp_path / "train.jsonl", n=4)
    out = tmp_path / "out.qpemb"
    export(ExportJob(model=f"local:{tiny_bert}", dataset=ds, out=out))
    _, records = read_qpemb(out)
    for m in records.values():
        assert np.isfinite(m).all()


def test_duplicate_ids_abort_with_id(tmp_path, tiny_bert):
    path = tmp_path / "train.jsonl"
    write_dataset_file(path, HEADER, [
        {"id": 4, "input": "1.0%", "targets": [0.01]},
        {"id": 4, "input": "2.0%", "targets": [0.02]},
    ])
    with pytest.raises(ExportError, match="id 4"):
        export(ExportJob(model=f"local:{tiny_bert}", dataset=path, out=tmp_path / "x.qpemb"))


def test_cli_export_and_list(tmp_path, tiny_bert, capsys):
    assert cli_main(["--list-models"]) == 0
    assert "bert-untrained" in capsys.readouterr().out
    ds = percent_dataset(tmp_path / "train.jsonl", n=3)
    out = tmp_path / "cli.qpemb"
    code = cli_main(["--model", f"local:{tiny_bert}", "--dataset", str(ds),
                     "--out", str(out), "--batch", "2"])
    assert code == 0
    assert out.exists()


def test_cli_requires_arguments():
    assert cli_main([]) == 2


def test_cli_missing_dataset(tmp_path, tiny_bert):
    code = cli_main(["--model", f"local:{tiny_bert}",
                     "--dataset", str(tmp_path / "nope.jsonl"),
                     "--out", str(tmp_path / "x.qpemb")])
    assert code == 2
