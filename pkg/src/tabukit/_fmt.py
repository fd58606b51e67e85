"""Serialization helpers shared by the CSV/JSON writers."""

from __future__ import annotations

import csv


def format_float(x) -> str:
    """Render a float with 9 significant digits (the on-disk float format)."""
    return format(float(x), ".9g")


def write_csv(path, header, rows) -> None:
    """Write rows of already-formatted cells under a fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
