"""CSV input and atomic file output."""

from __future__ import annotations

import logging
import os
import tempfile
from collections.abc import Callable
from pathlib import Path
from typing import IO

import pandas as pd

from ..errors import EmptyData, InvalidTable

logger = logging.getLogger(__name__)


def read_table(path: Path) -> pd.DataFrame:
    """Read a headed CSV whose columns are all decimal numbers."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError as exc:
        raise EmptyData(f"{path} is empty") from exc
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InvalidTable(f"{path} is not a CSV table: {exc}") from exc
    if frame.empty:
        raise EmptyData(f"{path} has a header but no rows")
    bad = [c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if bad:
        raise InvalidTable(f"{path}: non-numeric columns {bad}")
    logger.debug("read %d rows x %d columns from %s", len(frame), frame.shape[1], path)
    return frame


def write_atomic(path: Path, writer: Callable[[IO[str]], None]) -> None:
    """Run ``writer`` on a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer(handle)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_table(path: Path, frame: pd.DataFrame, significant_digits: int = 17) -> None:
    """Write ``frame`` as CSV with locale-free ``%.{digits}g`` floats."""
    fmt = f"%.{significant_digits}g"
    write_atomic(path, lambda handle: frame.to_csv(handle, index=False, float_format=fmt))
    logger.info("wrote %d rows to %s", len(frame), path)
