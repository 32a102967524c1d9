"""Sample containers and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` points in ``R^d`` together with provenance metadata.

    Parameters
    ----------
    points : array_like, shape (n, d)
        One row per observation. A 1-D input is read as ``d = 1``.
    seed : int, optional
        Seed the points were drawn with, when synthetic.
    provenance : dict
        Free-form metadata (source file, generator, ...).
    dist_tag : str, optional
        Name of the true distribution for synthetic data.
    """

    points: np.ndarray
    seed: int | None = None
    provenance: dict[str, Any] = field(default_factory=dict)
    dist_tag: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("a sample set needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def translated(self, shift) -> "SampleSet":
        return SampleSet(self.points + np.asarray(shift, dtype=float), self.seed,
                         dict(self.provenance), self.dist_tag)


def as_points(X) -> np.ndarray:
    """Return the ``(n, d)`` array behind a SampleSet or array-like."""
    if isinstance(X, SampleSet):
        return X.points
    return SampleSet(X).points


def save_csv(samples: SampleSet, path) -> None:
    """Write ``samples`` as CSV with header ``x1,...,xd``.

    Values are written with ``repr`` so that :func:`load_csv` restores them
    bit for bit.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(samples.dim)])
        for row in samples.points:
            writer.writerow([repr(float(v)) for v in row])


def load_csv(path) -> SampleSet:
    """Read a CSV written by :func:`save_csv` (or any ``x1,...,xd`` file)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        d = len(header)
        if d == 0 or any(h.strip() != f"x{j + 1}" for j, h in enumerate(header)):
            raise ValueError(f"{path}: header must be x1,...,xd, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise ValueError(f"{path}:{lineno}: expected {d} fields, got {len(row)}")
            rows.append([float(v) for v in row])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return SampleSet(np.array(rows), provenance={"source": str(path)})
