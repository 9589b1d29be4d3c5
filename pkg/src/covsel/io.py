"""File output helpers and seeded RNG substreams."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for work item ``index`` under master ``seed``.

    The stream depends only on (seed, index), never on evaluation order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def fmt(x: Any) -> str:
    """CSV cell formatting: shortest round-trip repr for floats."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]], preamble: str | None = None) -> str:
    lines = []
    if preamble:
        lines.append(f"# {preamble}")
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    """Write via a temp file in the target directory followed by a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
