"""File writers for run outputs. Numbers are written with 17 significant digits."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from chloss.histogram import HistogramGrid, format_number, write_grid_csv

__all__ = ["write_grid_csv", "write_heatmap_pgm", "write_table_csv", "heatmap_bytes"]


def write_table_csv(path, header, columns) -> None:
    """Write equal-length columns; integer columns are written as integers."""
    rows = [",".join(header)]
    for values in zip(*columns):
        rows.append(
            ",".join(
                str(v) if isinstance(v, (int, np.integer)) else format_number(v)
                for v in values
            )
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="ascii")


def heatmap_bytes(h: HistogramGrid) -> bytes:
    """Binary greymap (P5): one pixel per bin, similarity across, distance down."""
    v = h.values
    peak = v.max()
    scaled = np.zeros_like(v) if peak <= 0 else v / peak
    pixels = np.rint(scaled * 255).astype(np.uint8)
    n, m = v.shape
    return f"P5\n{m} {n}\n255\n".encode("ascii") + pixels.tobytes()


def write_heatmap_pgm(h: HistogramGrid, path) -> None:
    Path(path).write_bytes(heatmap_bytes(h))
