"""Initial-data profiles and plain-text field I/O."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .types import Field, Grid


def gaussian(grid: Grid, amplitude: complex = 1.0, width: float = 1.0, center=0.0) -> Field:
    """``amplitude * exp(-|x - center|^2 / (2 width^2))``."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width ** 2)))


def two_bump(grid: Grid, amplitude: complex = 1.0, width: float = 1.0, separation: float = 4.0) -> Field:
    """Two Gaussians split along the first axis, the second with opposite sign."""
    offset = np.zeros(grid.d)
    offset[0] = separation / 2
    a = gaussian(grid, amplitude, width, offset).values
    b = gaussian(grid, amplitude, width, -offset).values
    return Field(grid, a - b)


def save_field(field: Field, path) -> None:
    """One row per lattice point (row-major), columns ``re,im``."""
    flat = field.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in flat:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])


def load_field(grid: Grid, path) -> Field:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if not row:
                continue
            if i == 0 and row[0].strip().lower() == "re":
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{i + 1}: expected two columns 're,im'")
            rows.append(complex(float(row[0]), float(row[1])))
    if len(rows) != grid.size:
        raise ValueError(f"{path}: {len(rows)} samples, grid needs {grid.size}")
    return Field(grid, np.array(rows))
