"""Scalar maximisation over a positive parameter interval.

A log-spaced grid scan locates candidate maxima; golden-section search in
``log(param)`` then refines the best few brackets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OptimizerConfig:
    """Grid-plus-golden-section settings.

    ``tol`` is the final bracket width in ``log(param)``.
    """

    grid_size: int = 64
    refine: bool = True
    tol: float = 1e-9
    max_evals: int = 1000
    n_starts: int = 3

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError("grid_size must be at least 8")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_evals < self.grid_size:
            raise ValueError("max_evals must cover the coarse grid")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")

    def to_dict(self) -> dict:
        return {"grid_size": self.grid_size, "refine": self.refine, "tol": self.tol,
                "max_evals": self.max_evals, "n_starts": self.n_starts}


@dataclass
class OptimResult:
    x: float
    value: float
    evals: int
    bracket: tuple[float, float]
    tolerance: float
    exhausted: bool
    grid: np.ndarray = field(repr=False, default=None)
    grid_values: np.ndarray = field(repr=False, default=None)

    def diagnostics(self) -> dict:
        return {"evaluations": self.evals, "bracket": list(self.bracket),
                "tolerance": self.tolerance, "budget_exhausted": self.exhausted}


def _local_maxima(vals: np.ndarray) -> list[int]:
    n = len(vals)
    idx = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < n - 1 else -np.inf
        if vals[i] >= left and vals[i] >= right:
            idx.append(i)
    return idx


def maximize(f, lo: float, hi: float, cfg: OptimizerConfig | None = None) -> OptimResult:
    """Maximise ``f`` on ``[lo, hi]`` with ``0 < lo <= hi``.

    Ties are broken towards the smaller parameter so results are
    deterministic.
    """
    cfg = cfg or OptimizerConfig()
    if not (0 < lo <= hi):
        raise ValueError(f"need 0 < lo <= hi, got [{lo}, {hi}]")
    if lo == hi or np.isclose(lo, hi, rtol=1e-15):
        v = float(f(lo))
        return OptimResult(lo, v, 1, (lo, lo), 0.0, False,
                           np.array([lo]), np.array([v]))
    grid = np.geomspace(lo, hi, cfg.grid_size)
    grid[0], grid[-1] = lo, hi
    vals = np.array([float(f(x)) for x in grid])
    evals = len(grid)
    best_i = int(np.argmax(vals))
    best_x, best_v = float(grid[best_i]), float(vals[best_i])
    span = math.log(hi / lo) / (cfg.grid_size - 1)
    bracket = (float(grid[max(best_i - 1, 0)]), float(grid[min(best_i + 1, len(grid) - 1)]))
    tol_reached = span
    exhausted = False
    if cfg.refine:
        peaks = sorted(_local_maxima(vals), key=lambda i: (-vals[i], i))[:cfg.n_starts]
        budget = max(cfg.max_evals - evals, 0)
        per = budget // max(len(peaks), 1)
        for i in peaks:
            a = math.log(grid[max(i - 1, 0)])
            b = math.log(grid[min(i + 1, len(grid) - 1)])
            x, v, used, width = _golden(f, a, b, cfg.tol, per)
            evals += used
            if width > cfg.tol:
                exhausted = True
            if v > best_v or (v == best_v and x < best_x):
                best_x, best_v = x, v
                bracket = (math.exp(a), math.exp(b))
                tol_reached = width
            elif i == best_i:
                tol_reached = min(tol_reached, width)
    return OptimResult(best_x, best_v, evals, bracket, tol_reached, exhausted, grid, vals)


def _golden(f, a: float, b: float, tol: float, budget: int):
    """Golden-section on ``g(u) = f(exp(u))``; returns the best point seen."""
    g = lambda u: float(f(math.exp(u)))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = g(c), g(d)
    used = 2
    best = max((fc, -c, c), (fd, -d, d))
    while b - a > tol and used < budget:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = g(c)
            cand = (fc, -c, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = g(d)
            cand = (fd, -d, d)
        used += 1
        best = max(best, cand)
    return math.exp(best[2]), best[0], used, b - a
