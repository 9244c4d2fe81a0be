from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantprobe.synthgen import TaskKind, UnitLexicon, ValueRange, generate_dataset
from quantprobe.tokenizer import (PAD_ID, UNK_ID, TokenSeq, build_vocab, detokenize,
                                  tokenize)


@pytest.fixture(scope="module")
def vocab():
    return build_vocab()


@pytest.mark.parametrize("text,expected", [
    ("10.3%", ["1", "0", ".", "3", "%"]),
    ("15.3 billion", ["1", "5", ".", "3", "billion"]),
    ("27.3-65.1", ["2", "7", ".", "3", "-", "6", "5", ".", "1"]),
    ("0.5 basis points", ["0", ".", "5", "basis", "points"]),
    ("1.0 2.0", ["1", ".", "0", "2", ".", "0"]),
])
def test_tokenize_rules(vocab, text, expected):
    assert list(tokenize(text, vocab).surfaces) == expected


def test_builtin_vocab_size(vocab):
    # 2 reserved + 10 digits + 3 symbols + 4 multiplier words + basis/points
    assert len(vocab) == 2 + 10 + 3 + 4 + 2


def test_reserved_ids(vocab):
    assert vocab.id_of("<pad>") == PAD_ID == 0
    assert vocab.id_of("<unk>") == UNK_ID == 1


def test_lexicon_units_appended_in_order():
    v = build_vocab(UnitLexicon(["hours", "euros"]))
    assert v.id_of("hours") == len(v) - 2
    assert v.id_of("euros") == len(v) - 1


def test_lexicon_collision_with_builtin_keeps_first_id(vocab):
    v = build_vocab(UnitLexicon(["points", "hours"]))
    assert v.id_of("points") == vocab.id_of("points")
    assert len(v) == len(vocab) + 1


def test_vocab_deterministic():
    lex = UnitLexicon(["hours", "euros"])
    a, b = build_vocab(lex, ["x"]), build_vocab(lex, ["x"])
    assert a.id_to_token == b.id_to_token


def test_unknown_word_maps_to_unk(vocab):
    seq = tokenize("3.2 wombats", vocab)
    assert seq.ids[-1] == UNK_ID


def test_tokenize_rejects_empty(vocab):
    with pytest.raises(ValueError):
        tokenize("   ", vocab)


def test_token_seq_rejects_pad():
    with pytest.raises(ValueError):
        TokenSeq(ids=(PAD_ID, 4), surfaces=("<pad>", "2"))


def test_vocab_dump_format(vocab):
    lines = vocab.dump().splitlines()
    assert lines[0] == "0\t<pad>"
    assert len(lines) == len(vocab)


@pytest.mark.parametrize("task", list(TaskKind))
def test_round_trip_on_generated_inputs(task):
    lex = UnitLexicon(["hours", "basis points", "euros"])
    v = build_vocab(lex)
    ds = generate_dataset(task, ValueRange(0.0, 999.9), 9, 100, 20,
                          lexicon=lex if task.needs_lexicon else None)
    for ex in ds.train + ds.test:
        assert detokenize(tokenize(ex.input_text, v)) == ex.input_text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["12.3", "0.7%", "4.5-6.7", "billion", "basis", "points"]),
                min_size=1, max_size=5))
def test_round_trip_property(parts):
    text = " ".join(parts)
    assert detokenize(tokenize(text, build_vocab())) == text
