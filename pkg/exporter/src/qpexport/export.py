"""Batched extraction of per-token final-layer hidden states into QPEMB files.

Inference only: the encoder is frozen and evaluated under no_grad. Every
tokenizer-produced position is exported, special tokens included; padding
positions are dropped via the attention mask, so each record's token count
equals the tokenizer's output length for that input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .datasets import read_dataset
from .qpemb import QpembError, write_qpemb
from .registry import load_encoder


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    model: str
    dataset: str | Path
    out: str | Path
    device: str = "cpu"
    batch_size: int = 32
    seed: int = 0
    tokenizer_path: str | None = None


def export(job: ExportJob) -> dict:
    """Run the job; returns a summary with counts and the output path."""
    header, examples = read_dataset(job.dataset)
    loaded = load_encoder(job.model, seed=job.seed, tokenizer_path=job.tokenizer_path)
    device = torch.device(job.device)
    encoder = loaded.encoder.to(device)

    records: list[tuple[int, np.ndarray]] = []
    seen: set[int] = set()
    with torch.no_grad():
        for start in range(0, len(examples), job.batch_size):
            batch = examples[start : start + job.batch_size]
            texts = [text for _, text in batch]
            try:
                enc = loaded.tokenizer(texts, padding=True, return_tensors="pt")
            except Exception as e:
                raise ExportError(
                    f"tokenizer failed on example id {batch[0][0]}..: {e}") from e
            enc = {k: v.to(device) for k, v in enc.items() if isinstance(v, torch.Tensor)}
            output = encoder(**enc)
            hidden = output.last_hidden_state
            if hidden.shape[-1] != loaded.hidden_size:
                raise ExportError(
                    f"example id {batch[0][0]}: hidden dim {hidden.shape[-1]} does not "
                    f"match declared size {loaded.hidden_size}")
            mask = enc["attention_mask"].bool()
            for row, (ex_id, _) in enumerate(batch):
                if ex_id in seen:
                    raise ExportError(f"duplicate example id {ex_id} in dataset")
                seen.add(ex_id)
                matrix = hidden[row][mask[row]].cpu().numpy().astype(np.float32)
                if matrix.shape[0] < 1:
                    raise ExportError(f"example id {ex_id}: empty tokenization")
                records.append((ex_id, matrix))

    try:
        write_qpemb(job.out, records, dim=loaded.hidden_size)
    except QpembError as e:
        raise ExportError(str(e)) from e
    return {
        "model": job.model,
        "dataset": str(job.dataset),
        "split": header.get("split"),
        "out": str(job.out),
        "records": len(records),
        "dim": loaded.hidden_size,
    }
