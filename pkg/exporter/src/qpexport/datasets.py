"""Reader for the harness's dataset JSONL files.

First line is a header object ({"task","lo","hi","seed","split",...}); every
following line is one example: {"id","input","targets"} for regression tasks
or {"id","input","label","unit"} for unit identification.
"""

from __future__ import annotations

import json
from pathlib import Path


class DatasetError(RuntimeError):
    pass


def read_dataset(path: str | Path) -> tuple[dict, list[tuple[int, str]]]:
    """Returns (header, [(example id, input text), ...]) in file order."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read dataset {path}: {e}") from e
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DatasetError(f"dataset {path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetError(f"dataset {path}: bad header line: {e}") from e
    if not isinstance(header, dict) or "task" not in header or "split" not in header:
        raise DatasetError(f"dataset {path}: first line is not a valid header")
    examples: list[tuple[int, str]] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
            examples.append((int(rec["id"]), str(rec["input"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"dataset {path}: line {lineno}: {e}") from e
    if not examples:
        raise DatasetError(f"dataset {path} has a header but no examples")
    return header, examples
