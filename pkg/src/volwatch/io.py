"""Returns-file ingestion and emission.

Accepted layout: one column (return) or two columns (date, return), header
optional, plain decimal point.  Dates are kept as opaque strings and only
used to label detections.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

__all__ = ["read_returns_csv", "write_returns_csv"]


def _parse_row(row: list[str]) -> tuple[str | None, float] | None:
    cells = [c.strip() for c in row if c.strip() != ""] if row else []
    if not cells:
        return None
    if len(cells) == 1:
        return None, float(cells[0])
    if len(cells) == 2:
        return cells[0], float(cells[1])
    raise ValueError(f"expected 1 or 2 columns, got {len(cells)}")


def read_returns_csv(path: str | Path) -> tuple[list[str | None], np.ndarray]:
    """Read (dates, returns); raises ValueError on malformed or non-finite rows."""
    dates: list[str | None] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            try:
                parsed = _parse_row(row)
            except ValueError as exc:
                if i == 0:
                    continue  # header row
                raise ValueError(f"{path}: row {i + 1}: {exc}") from None
            if parsed is None:
                continue
            date, value = parsed
            if not math.isfinite(value):
                raise ValueError(f"{path}: row {i + 1}: non-finite return {value!r}")
            dates.append(date)
            values.append(value)
    if not values:
        raise ValueError(f"{path}: no data rows found")
    return dates, np.asarray(values, dtype=np.float64)


def write_returns_csv(path: str | Path, values: np.ndarray,
                      dates: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if dates is None:
            writer.writerow(["return"])
            for v in values:
                writer.writerow([repr(float(v))])
        else:
            writer.writerow(["date", "return"])
            for d, v in zip(dates, values):
                writer.writerow([d, repr(float(v))])
