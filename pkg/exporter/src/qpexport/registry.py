"""Model registry: short names to Hugging Face checkpoints, plus loading.

Loads the conditional-generation checkpoint of each summarization model and
keeps only the encoder stack; plain BERT models expose their last layer
directly. "bert-untrained" builds a randomly initialized BERT-base from a
fixed seed (no download for the weights). "local:PATH" loads any saved
model/tokenizer directory, which keeps exports runnable offline.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

CHECKPOINTS = {
    "pegasus-xsum": "google/pegasus-xsum",
    "pegasus-cdm": "google/pegasus-cnn_dailymail",
    "t5-cdm": "flax-community/t5-base-cnn-dm",
    "bart-xsum": "facebook/bart-large-xsum",
    "bart-cdm": "facebook/bart-large-cnn",
    "distilbart-xsum": "sshleifer/distilbart-xsum-12-6",
    "distilbart-cdm": "sshleifer/distilbart-cnn-12-6",
    "prophetnet-cdm": "microsoft/prophetnet-large-uncased-cnndm",
    "bert-trained": "bert-base-uncased",
    "bert-untrained": "bert-base-uncased",
}

BERT_MODELS = {"bert-trained", "bert-untrained"}


class RegistryError(RuntimeError):
    pass


@dataclass
class LoadedEncoder:
    tokenizer: object
    encoder: torch.nn.Module
    hidden_size: int
    name: str


def available_models() -> list[str]:
    return sorted(CHECKPOINTS)


def load_encoder(name: str, seed: int = 0, tokenizer_path: str | None = None) -> LoadedEncoder:
    from transformers import AutoModel, AutoTokenizer

    if name.startswith("local:"):
        path = name[len("local:"):]
        tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or path)
        model = AutoModel.from_pretrained(path)
        is_seq2seq = getattr(model.config, "is_encoder_decoder", False)
        encoder = model.get_encoder() if is_seq2seq else model
    elif name == "bert-untrained":
        from transformers import BertConfig, BertModel

        tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or CHECKPOINTS[name])
        torch.manual_seed(seed)
        encoder = BertModel(BertConfig())
    elif name in BERT_MODELS:
        tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or CHECKPOINTS[name])
        encoder = AutoModel.from_pretrained(CHECKPOINTS[name])
    elif name in CHECKPOINTS:
        from transformers import AutoModelForSeq2SeqLM

        tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or CHECKPOINTS[name])
        model = AutoModelForSeq2SeqLM.from_pretrained(CHECKPOINTS[name])
        encoder = model.get_encoder()
    else:
        raise RegistryError(
            f"unknown model {name!r}; expected local:PATH or one of {available_models()}")

    encoder.eval()
    hidden = getattr(encoder.config, "hidden_size", None) or encoder.config.d_model
    return LoadedEncoder(tokenizer=tokenizer, encoder=encoder,
                         hidden_size=int(hidden), name=name)
