from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch


def build_tiny_bert(out_dir: Path, words: list[str], hidden_size: int = 128,
                    seed: int = 0) -> Path:
    """Save a randomly initialized miniature BERT plus a WordPiece tokenizer
    covering digits and the given words, for fully offline exports."""
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    vocab = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
             + list("0123456789") + [f"##{d}" for d in "0123456789"]
             + [".", "%", "-", "##.", "##%", "##-"])
    for word in words:
        if word not in vocab:
            vocab.append(word)
    wp = models.WordPiece({t: i for i, t in enumerate(vocab)}, unk_token="[UNK]",
                          max_input_chars_per_word=100)
    tk = Tokenizer(wp)
    tk.normalizer = normalizers.BertNormalizer(lowercase=True)
    tk.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tk.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab.index("[CLS]")), ("[SEP]", vocab.index("[SEP]"))])
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tk, unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]")

    config = BertConfig(vocab_size=len(vocab), hidden_size=hidden_size,
                        num_hidden_layers=2, num_attention_heads=4,
                        intermediate_size=2 * hidden_size,
                        max_position_embeddings=64)
    torch.manual_seed(seed)
    model = BertModel(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokenizer.save_pretrained(out_dir)
    model.save_pretrained(out_dir)
    return out_dir


def write_dataset_file(path: Path, header: dict, records: list[dict]):
    lines = [json.dumps(header, separators=(",", ":"))]
    lines += [json.dumps(r, separators=(",", ":")) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory) -> Path:
    words = ["hours", "euros", "shares", "billion", "million", "basis", "points"]
    return build_tiny_bert(tmp_path_factory.mktemp("tinybert"), words)
