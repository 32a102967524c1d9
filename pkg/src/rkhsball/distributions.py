"""Synthetic distributions with known densities and moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .samples import SampleSet

KINDS = ("gaussian_mixture", "uniform", "cauchy_mixture")


@dataclass(frozen=True)
class DistributionSpec:
    """Finite mixture of axis-aligned components.

    ``scales`` is interpreted per kind: standard deviations for
    ``gaussian_mixture`` (a zero scale gives a point mass), half-widths of the
    box for ``uniform`` and Cauchy scale parameters for ``cauchy_mixture``.
    ``s`` is the declared Sobolev order of the density; it is never inferred.
    """

    kind: str
    weights: tuple
    means: tuple
    scales: tuple
    dim: int
    s: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float).reshape(len(w), -1)
        sc = np.asarray(self.scales, dtype=float).reshape(len(w), -1)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        if mu.shape != (len(w), self.dim) or sc.shape != (len(w), self.dim):
            raise ValueError("means/scales must have one row of length dim per component")
        if np.any(sc < 0):
            raise ValueError("scales must be non-negative")
        if self.kind != "gaussian_mixture" and np.any(sc == 0):
            raise ValueError(f"{self.kind} needs positive scales")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "means", tuple(map(tuple, mu.tolist())))
        object.__setattr__(self, "scales", tuple(map(tuple, sc.tolist())))

    # arrays are rebuilt on access so the dataclass stays hashable
    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def mu(self) -> np.ndarray:
        return np.asarray(self.means)

    @property
    def sc(self) -> np.ndarray:
        return np.asarray(self.scales)

    @property
    def tag(self) -> str:
        return f"{self.kind}[k={len(self.weights)},d={self.dim}]"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": list(self.weights),
                "means": [list(m) for m in self.means],
                "scales": [list(s) for s in self.scales],
                "dim": self.dim, "s": self.s}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        return cls(kind=d["kind"], weights=tuple(d["weights"]),
                   means=tuple(map(tuple, np.atleast_2d(d["means"]).tolist())),
                   scales=tuple(map(tuple, np.atleast_2d(d["scales"]).tolist())),
                   dim=int(d["dim"]), s=int(d.get("s", 1)))

    def mean(self) -> np.ndarray:
        if self.kind == "cauchy_mixture":
            raise ValueError("Cauchy mixtures have no mean")
        return self.w @ self.mu

    def variance(self) -> np.ndarray:
        """Per-coordinate variance of the mixture."""
        if self.kind == "cauchy_mixture":
            raise ValueError("Cauchy mixtures have no variance")
        comp_var = self.sc**2 if self.kind == "gaussian_mixture" else self.sc**2 / 3.0
        m = self.mean()
        return self.w @ (comp_var + self.mu**2) - m**2

    def pdf(self, x) -> np.ndarray:
        """Density at the rows of ``x`` (shape ``(N, d)`` or ``(N,)`` for d=1)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        out = np.zeros(x.shape[0])
        for wk, mk, sk in zip(self.w, self.mu, self.sc):
            if wk == 0:
                continue
            if self.kind == "gaussian_mixture":
                if np.any(sk == 0):
                    raise ValueError("point masses have no density")
                comp = stats.norm.pdf(x, loc=mk, scale=sk)
            elif self.kind == "uniform":
                comp = np.where(np.abs(x - mk) <= sk, 0.5 / sk, 0.0)
            else:
                comp = stats.cauchy.pdf(x, loc=mk, scale=sk)
            out += wk * np.prod(comp, axis=1)
        return out


def standard_normal(dim: int = 1, s: int = 1) -> DistributionSpec:
    return DistributionSpec("gaussian_mixture", (1.0,), ((0.0,) * dim,),
                            ((1.0,) * dim,), dim, s)


def sample_distribution(spec: DistributionSpec, n: int, seed: int) -> SampleSet:
    """Draw ``n`` points from ``spec``; deterministic given ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(spec.weights), size=n, p=spec.w)
    mu, sc = spec.mu[comp], spec.sc[comp]
    if spec.kind == "gaussian_mixture":
        pts = mu + sc * rng.standard_normal((n, spec.dim))
    elif spec.kind == "uniform":
        pts = mu + sc * rng.uniform(-1.0, 1.0, size=(n, spec.dim))
    else:
        pts = mu + sc * rng.standard_cauchy((n, spec.dim))
    return SampleSet(pts, seed=seed, provenance={"generator": "sample_distribution"},
                     dist_tag=spec.tag)
