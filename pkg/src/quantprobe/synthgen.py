"""Seeded generation of the six synthetic numeric probing datasets.

Every surface value is drawn uniformly from a single-decimal grid
{lo, lo+0.1, ..., hi}. Sampling works on integer tenths, so regeneration with
the same (task, range, seed, sizes, lexicon) is byte-identical and rendered
literals always carry exactly one decimal digit.

Dataset files are UTF-8 JSON lines: a header object on the first line, then
one record per example ({"id","input","targets"} for regression tasks,
{"id","input","label","unit"} for unit identification).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

ORDER_MULTIPLIERS = (
    ("thousand", 1e3),
    ("million", 1e6),
    ("billion", 1e9),
    ("trillion", 1e12),
)

DEFAULT_TRAIN_N = 10_000
DEFAULT_TEST_N = 1_000


class TaskKind(str, Enum):
    PERCENT = "percent"
    BASISPOINT = "basispoint"
    ORDER = "order"
    RANGE = "range"
    ADDITION = "addition"
    UNITID = "unitid"

    @property
    def target_arity(self) -> int:
        """Number of regression outputs; 0 for the classification task."""
        if self is TaskKind.RANGE:
            return 2
        if self is TaskKind.UNITID:
            return 0
        return 1

    @property
    def metric_kind(self) -> str:
        if self is TaskKind.ORDER:
            return "log_rmse"
        if self is TaskKind.UNITID:
            return "accuracy"
        return "rmse"

    @property
    def is_classification(self) -> bool:
        return self is TaskKind.UNITID

    @property
    def needs_lexicon(self) -> bool:
        return self is TaskKind.UNITID

    @classmethod
    def parse(cls, name: str) -> "TaskKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ConfigError(f"unknown task {name!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class ValueRange:
    """Closed interval [lo, hi] sampled on a fixed 0.1 grid."""

    lo: float
    hi: float
    step: float = 0.1

    def __post_init__(self):
        if self.step != 0.1:
            raise ConfigError(f"grid step is fixed at 0.1, got {self.step}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigError("range bounds must be finite")
        for name, bound in (("lo", self.lo), ("hi", self.hi)):
            if abs(bound * 10 - round(bound * 10)) > 1e-9:
                raise ConfigError(f"{name}={bound} is not a multiple of 0.1")
        if self.lo > self.hi:
            raise ConfigError(f"invalid range: lo={self.lo} > hi={self.hi}")

    @property
    def lo_tenths(self) -> int:
        return round(self.lo * 10)

    @property
    def hi_tenths(self) -> int:
        return round(self.hi * 10)

    @property
    def grid_size(self) -> int:
        return self.hi_tenths - self.lo_tenths + 1


@dataclass(frozen=True)
class Example:
    id: int
    input_text: str
    targets: tuple[float, ...] = ()
    label_index: int | None = None

    def __post_init__(self):
        if bool(self.targets) == (self.label_index is not None):
            raise ConfigError("example must carry targets xor a label")

    @property
    def unit(self) -> str:
        """Unit surface string of a unit-identification example."""
        return self.input_text.split(" ", 1)[1]


class UnitLexicon:
    """Ordered set of unit strings; a unit's class index is its position."""

    def __init__(self, units: list[str] | tuple[str, ...]):
        units = tuple(units)
        if len(units) < 2:
            raise DataFormatError("lexicon needs at least 2 units")
        seen = set()
        for u in units:
            if not u or u != u.strip():
                raise DataFormatError(f"invalid lexicon entry {u!r}")
            if u in seen:
                raise DataFormatError(f"duplicate lexicon entry {u!r}")
            seen.add(u)
        self.units = units
        self._index = {u: i for i, u in enumerate(units)}

    def __len__(self) -> int:
        return len(self.units)

    def index_of(self, unit: str) -> int:
        return self._index[unit]

    def sha256(self) -> str:
        """Digest of the canonical serialization (LF-terminated lines)."""
        blob = ("\n".join(self.units) + "\n").encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def load_lexicon(path: str | Path) -> UnitLexicon:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataFormatError(f"cannot read lexicon {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataFormatError(f"lexicon {path} is not valid UTF-8: {e}") from e
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise DataFormatError(f"lexicon {path} is empty")
    for i, line in enumerate(lines):
        if line.strip() == "":
            raise DataFormatError(f"lexicon {path}: blank line {i + 1}")
    try:
        return UnitLexicon(lines)
    except DataFormatError as e:
        raise DataFormatError(f"lexicon {path}: {e}") from None


def default_lexicon() -> UnitLexicon:
    text = resources.files("quantprobe").joinpath("data/units.txt").read_text("utf-8")
    return UnitLexicon(text.rstrip("\n").split("\n"))


@dataclass
class Dataset:
    task: TaskKind
    vrange: ValueRange
    seed: int
    train: list[Example]
    test: list[Example]
    lexicon: UnitLexicon | None = None
    log_base: float = 10.0

    @property
    def lexicon_sha256(self) -> str | None:
        return self.lexicon.sha256() if self.lexicon is not None else None

    def split(self, name: str) -> list[Example]:
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        raise ConfigError(f"unknown split {name!r}")


def _render_tenths(tenths: int) -> str:
    return f"{tenths // 10}.{tenths % 10}"


def _sample_tenths(vrange: ValueRange, rng: np.random.Generator) -> int:
    return int(rng.integers(vrange.lo_tenths, vrange.hi_tenths + 1))


def sample_value(vrange: ValueRange, rng: np.random.Generator) -> float:
    """Uniform draw from the single-decimal grid of ``vrange``, inclusive."""
    return _sample_tenths(vrange, rng) / 10.0


def make_example(
    task: TaskKind,
    vrange: ValueRange,
    rng: np.random.Generator,
    lexicon: UnitLexicon | None = None,
    log_base: float = 10.0,
    example_id: int = 0,
) -> Example:
    """Draw one synthetic example for ``task`` from the generator stream."""
    if task.needs_lexicon and lexicon is None:
        raise ConfigError("unitid task requires a lexicon")

    if task is TaskKind.PERCENT:
        # single division from integer tenths is correctly rounded ("10.3%" -> 0.103)
        t = _sample_tenths(vrange, rng)
        return Example(example_id, f"{_render_tenths(t)}%", targets=(t / 1000.0,))

    if task is TaskKind.BASISPOINT:
        t = _sample_tenths(vrange, rng)
        return Example(example_id, f"{_render_tenths(t)} basis points", targets=(t / 1e5,))

    if task is TaskKind.ORDER:
        if vrange.lo_tenths == 0 and vrange.hi_tenths == 0:
            raise ConfigError("order task is unsatisfiable on the singleton range [0.0, 0.0]")
        t = _sample_tenths(vrange, rng)
        while t == 0:  # log of zero is undefined; redraw from the same stream
            t = _sample_tenths(vrange, rng)
        word, mult = ORDER_MULTIPLIERS[int(rng.integers(0, len(ORDER_MULTIPLIERS)))]
        v = t / 10.0
        target = math.log(v * mult, log_base) if log_base != 10.0 else math.log10(v * mult)
        return Example(example_id, f"{_render_tenths(t)} {word}", targets=(target,))

    if task is TaskKind.RANGE:
        ta = _sample_tenths(vrange, rng)
        tb = _sample_tenths(vrange, rng)
        ta, tb = min(ta, tb), max(ta, tb)
        text = f"{_render_tenths(ta)}-{_render_tenths(tb)}"
        return Example(example_id, text, targets=(ta / 10.0, tb / 10.0))

    if task is TaskKind.ADDITION:
        ta = _sample_tenths(vrange, rng)
        tb = _sample_tenths(vrange, rng)
        text = f"{_render_tenths(ta)} {_render_tenths(tb)}"
        return Example(example_id, text, targets=((ta + tb) / 10.0,))

    if task is TaskKind.UNITID:
        t = _sample_tenths(vrange, rng)
        idx = int(rng.integers(0, len(lexicon)))
        return Example(example_id, f"{_render_tenths(t)} {lexicon.units[idx]}", label_index=idx)

    raise ConfigError(f"unhandled task {task}")


def generate_dataset(
    task: TaskKind,
    vrange: ValueRange,
    seed: int,
    train_n: int = DEFAULT_TRAIN_N,
    test_n: int = DEFAULT_TEST_N,
    lexicon: UnitLexicon | None = None,
    log_base: float = 10.0,
) -> Dataset:
    """Sample train and test splits from one seeded stream (interpolation
    setting: both splits share the value distribution; duplicates permitted)."""
    if train_n <= 0 or test_n <= 0:
        raise ConfigError(f"split sizes must be positive, got {train_n}/{test_n}")
    if task.needs_lexicon and lexicon is None:
        lexicon = default_lexicon()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    train = [make_example(task, vrange, rng, lexicon, log_base, i) for i in range(train_n)]
    test = [make_example(task, vrange, rng, lexicon, log_base, i) for i in range(test_n)]
    return Dataset(task, vrange, seed, train, test, lexicon, log_base)


# --- JSONL serialization ----------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def dataset_header(ds: Dataset, split: str) -> dict:
    header = {
        "task": ds.task.value,
        "lo": ds.vrange.lo,
        "hi": ds.vrange.hi,
        "seed": ds.seed,
        "split": split,
    }
    if ds.lexicon_sha256 is not None:
        header["lexicon_sha256"] = ds.lexicon_sha256
    return header


def serialize_split(ds: Dataset, split: str) -> bytes:
    lines = [_dump(dataset_header(ds, split))]
    for ex in ds.split(split):
        if ex.label_index is not None:
            rec = {"id": ex.id, "input": ex.input_text, "label": ex.label_index, "unit": ex.unit}
        else:
            rec = {"id": ex.id, "input": ex.input_text, "targets": list(ex.targets)}
        lines.append(_dump(rec))
    return ("\n".join(lines) + "\n").encode("utf-8")


def split_sha256(ds: Dataset, split: str) -> str:
    return hashlib.sha256(serialize_split(ds, split)).hexdigest()


def write_split(ds: Dataset, split: str, path: str | Path) -> str:
    """Write one split as JSONL; returns the sha256 of the written bytes."""
    blob = serialize_split(ds, split)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_split(path: str | Path) -> tuple[dict, list[Example]]:
    """Parse a dataset JSONL file back into (header, examples)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataFormatError(f"cannot read dataset {path}: {e}") from e
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise DataFormatError(f"dataset {path} is empty")
    try:
        header = json.loads(lines[0])
        examples = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            if "label" in rec:
                examples.append(Example(rec["id"], rec["input"], label_index=rec["label"]))
            else:
                examples.append(Example(rec["id"], rec["input"], targets=tuple(rec["targets"])))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataFormatError(f"dataset {path} is malformed: {e}") from e
    if not isinstance(header, dict) or "task" not in header:
        raise DataFormatError(f"dataset {path} has no valid header line")
    return header, examples
