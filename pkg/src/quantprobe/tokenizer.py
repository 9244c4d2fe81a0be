"""Whitespace tokenizer with character-level splitting of numeric chunks.

Numerals fragment into single characters (mirroring how subword vocabularies
shred numbers) while words stay whole; the vocabulary is closed over the
builtin symbol set plus the unit lexicon, so ids never depend on dataset
content.
"""

from __future__ import annotations

from dataclasses import dataclass

from .synthgen import ORDER_MULTIPLIERS, UnitLexicon

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1

_NUMERIC_CHARS = set("0123456789.%-")

# Fixed builtin order: reserved, digits, symbols, multiplier words, task words.
_BUILTIN = (
    [PAD, UNK]
    + [str(d) for d in range(10)]
    + [".", "%", "-"]
    + [word for word, _ in ORDER_MULTIPLIERS]
    + ["basis", "points"]
)


class Vocabulary:
    """Bijective token<->id map with PAD=0 and UNK=1 reserved."""

    def __init__(self, tokens: list[str]):
        self.id_to_token = list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(tokens)}
        if len(self.token_to_id) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        assert self.token_to_id[PAD] == PAD_ID and self.token_to_id[UNK] == UNK_ID

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def dump(self) -> str:
        """Diagnostic listing, one "id<TAB>token" line per entry."""
        return "\n".join(f"{i}\t{t}" for i, t in enumerate(self.id_to_token)) + "\n"


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple[int, ...]
    surfaces: tuple[str, ...]

    def __post_init__(self):
        if len(self.ids) == 0:
            raise ValueError("token sequence must be non-empty")
        if PAD_ID in self.ids:
            raise ValueError("PAD must not appear inside a token sequence")

    def __len__(self) -> int:
        return len(self.ids)


def build_vocab(lexicon: UnitLexicon | None = None, extra_words: list[str] | None = None) -> Vocabulary:
    """Builtin tokens first, then lexicon units, then extras; duplicates keep
    their first id so lexicon entries colliding with builtins are harmless."""
    tokens = list(_BUILTIN)
    seen = set(tokens)
    for unit in (lexicon.units if lexicon is not None else ()):
        for word in unit.split():
            if word not in seen:
                tokens.append(word)
                seen.add(word)
    for word in extra_words or ():
        if word not in seen:
            tokens.append(word)
            seen.add(word)
    return Vocabulary(tokens)


def builtin_vocab_size() -> int:
    return len(_BUILTIN)


def tokenize(text: str, vocab: Vocabulary) -> TokenSeq:
    """Split on whitespace; chunks made only of digits/./%/- split to chars."""
    if not text.strip():
        raise ValueError("cannot tokenize empty text")
    surfaces: list[str] = []
    for chunk in text.split():
        if all(c in _NUMERIC_CHARS for c in chunk):
            surfaces.extend(chunk)
        else:
            surfaces.append(chunk)
    ids = tuple(vocab.id_of(s) for s in surfaces)
    return TokenSeq(ids=ids, surfaces=tuple(surfaces))


def detokenize(seq: TokenSeq) -> str:
    """Inverse of tokenize for generator-produced inputs.

    Generated literals always carry exactly one decimal digit, so a digit that
    follows a completed number ("d+.d", optionally "%") must start a new,
    space-separated number; '-' and '%' attach to the current one.
    """
    parts: list[str] = []
    state = "out"  # out | digits | frac | complete
    for s in seq.surfaces:
        if len(s) == 1 and s in _NUMERIC_CHARS:
            if state == "out" or (s.isdigit() and state == "complete"):
                parts.append(s)
            else:
                parts[-1] += s
            if s == ".":
                state = "frac"
            elif s == "-":
                state = "digits"
            elif s == "%":
                state = "complete"
            else:
                state = "complete" if state == "frac" else "digits"
        else:
            parts.append(s)
            state = "out"
    return " ".join(parts)
