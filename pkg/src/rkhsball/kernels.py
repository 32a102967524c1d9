"""Translation-invariant kernel families, Gram matrices and empirical covers.

Every family is indexed by one scalar parameter and normalised so that
``k(x, x) = 1``:

============================  =========================================  ==========
tag                           ``psi(z)``                                 parameter
============================  =========================================  ==========
``gaussian``                  ``exp(-sigma |z|_2^2)``                    sigma
``laplacian``                 ``exp(-sigma |z|_1)``                      sigma
``matern``                    ``2^(1-nu)/Gamma(nu) (c|z|)^nu K_nu(c|z|)``  c
``inverse_multiquadric``      ``(1 + |z/c|_2^2)^(-beta)``                c
``product_cauchy``            ``prod_i c^2 / (c^2 + z_i^2)``             c
``spline``                    ``prod_i (1 - |z_i|/c)_+``                 c
``rbf_mixture``               ``sum_j w_j exp(-s sigma_j |z|_2^2)``      s
============================  =========================================  ==========

with ``nu = beta - d/2`` for the Matérn family.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special
from scipy.spatial.distance import cdist

from .samples import SampleSet, as_points

FAMILY_TAGS = ("gaussian", "laplacian", "matern", "inverse_multiquadric",
               "product_cauchy", "spline", "rbf_mixture")

# families whose natural domain is (0, a] versus [a, inf)
_LOWER_OPEN = {"gaussian", "laplacian", "matern", "spline", "rbf_mixture"}
_UPPER_OPEN = {"inverse_multiquadric", "product_cauchy"}

SIGMA_MIN_FACTOR = 1e-6
C_MAX_FACTOR = 1e3
_MATERN_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class KernelFamily:
    """A one-parameter cone of translation-invariant kernels on ``R^dim``.

    ``domain`` holds the realised, finite parameter interval. Use
    :meth:`from_spec` to build one from the JSON form, which applies the
    ``sigma_min`` / ``c_max`` truncations and records them in ``truncated``.
    """

    family: str
    domain: tuple[float, float]
    dim: int = 1
    aux: dict[str, Any] = field(default_factory=dict, hash=False, compare=False)
    truncated: tuple[str, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILY_TAGS:
            raise ValueError(f"unknown kernel family {self.family!r}")
        lo, hi = map(float, self.domain)
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi < lo:
            raise ValueError(f"domain must satisfy 0 < lo <= hi < inf, got {self.domain}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        object.__setattr__(self, "domain", (lo, hi))
        aux = dict(self.aux)
        if self.family == "matern":
            aux.setdefault("beta", self.dim / 2 + 1)
            if aux["beta"] <= self.dim / 2:
                raise ValueError("Matérn needs beta > d/2")
        elif self.family == "inverse_multiquadric":
            aux.setdefault("beta", 1.0)
            if aux["beta"] <= 0:
                raise ValueError("inverse multiquadric needs beta > 0")
        elif self.family == "rbf_mixture":
            w = np.asarray(aux.get("weights", [1.0]), dtype=float)
            atoms = np.asarray(aux.get("atoms", [1.0]), dtype=float)
            if w.shape != atoms.shape or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
                raise ValueError("rbf_mixture needs non-negative weights summing to 1")
            if np.any(atoms <= 0):
                raise ValueError("rbf_mixture atoms must be positive")
            aux["weights"], aux["atoms"] = w.tolist(), atoms.tolist()
        object.__setattr__(self, "aux", aux)

    # -- construction -------------------------------------------------
    @classmethod
    def from_spec(cls, spec: dict) -> "KernelFamily":
        """Build from ``{"family", "domain": [lo, hi], "aux", "dim"}``.

        ``lo = 0`` (open lower end) becomes ``aux.get("sigma_min", 1e-6 * hi)``;
        ``hi = null`` or ``inf`` becomes ``aux.get("c_max", 1e3 * lo)``.
        """
        family = spec["family"]
        lo, hi = spec["domain"]
        aux = dict(spec.get("aux", {}))
        dim = int(spec.get("dim", 1))
        truncated = []
        if hi is None or (isinstance(hi, float) and math.isinf(hi)) or hi == "inf":
            if family in _LOWER_OPEN:
                raise ValueError(f"{family} needs a finite upper end")
            hi = aux.pop("c_max", C_MAX_FACTOR * float(lo))
            truncated.append("above")
        if float(lo) <= 0:
            if family in _UPPER_OPEN:
                raise ValueError(f"{family} needs a positive lower end")
            lo = aux.pop("sigma_min", SIGMA_MIN_FACTOR * float(hi))
            truncated.append("below")
        aux.pop("sigma_min", None)
        aux.pop("c_max", None)
        return cls(family, (float(lo), float(hi)), dim, aux, tuple(truncated))

    @classmethod
    def gaussian(cls, a: float = 1.0, dim: int = 1, sigma_min: float | None = None):
        lo = SIGMA_MIN_FACTOR * a if sigma_min is None else sigma_min
        return cls("gaussian", (lo, a), dim, truncated=("below",))

    @classmethod
    def product_cauchy(cls, c: float = 1.0, dim: int = 1, c_max: float | None = None):
        hi = C_MAX_FACTOR * c if c_max is None else c_max
        return cls("product_cauchy", (c, hi), dim, truncated=("above",))

    def to_spec(self) -> dict:
        return {"family": self.family, "domain": list(self.domain),
                "aux": dict(self.aux), "dim": self.dim}

    def to_json(self) -> str:
        return json.dumps(self.to_spec(), sort_keys=True)

    # -- evaluation ---------------------------------------------------
    def point(self, param: float) -> "KernelPoint":
        return KernelPoint(self, param)

    def with_domain(self, lo: float, hi: float) -> "KernelFamily":
        return KernelFamily(self.family, (lo, hi), self.dim, self.aux, self.truncated)

    @property
    def is_radial_gaussian(self) -> bool:
        return self.family == "gaussian"

    def psi(self, param: float, z: np.ndarray) -> np.ndarray:
        """Evaluate ``psi_param`` on difference vectors ``z`` of shape (..., dim)."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise ValueError(f"expected last axis of length {self.dim}, got {z.shape}")
        return self.psi_from(param, sq=np.sum(z * z, axis=-1), z=z)

    def psi_from(self, param, sq=None, z=None):
        """Evaluate from precomputed squared norms ``sq`` where the family allows."""
        p = float(param)
        f = self.family
        if f == "gaussian":
            return np.exp(-p * sq)
        if f == "rbf_mixture":
            out = np.zeros_like(sq, dtype=float)
            for w, s in zip(self.aux["weights"], self.aux["atoms"]):
                out += w * np.exp(-p * s * sq)
            return out
        if f == "inverse_multiquadric":
            return (1.0 + sq / p**2) ** (-self.aux["beta"])
        if f == "matern":
            return _matern(np.sqrt(sq) * p, self.aux["beta"] - self.dim / 2)
        if z is None:
            raise ValueError(f"{f} needs coordinate differences")
        if f == "laplacian":
            return np.exp(-p * np.sum(np.abs(z), axis=-1))
        if f == "product_cauchy":
            return np.prod(p**2 / (p**2 + z * z), axis=-1)
        if f == "spline":
            return np.prod(np.clip(1.0 - np.abs(z) / p, 0.0, None), axis=-1)
        raise AssertionError(f)

    @property
    def needs_coordinates(self) -> bool:
        return self.family in ("laplacian", "product_cauchy", "spline")


def _matern(z: np.ndarray, nu: float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    mask = z >= _MATERN_SERIES_CUTOFF
    zm = z[mask]
    if nu == 0.5:
        out[mask] = np.exp(-zm)
    else:
        log_pref = (1.0 - nu) * math.log(2.0) - special.gammaln(nu)
        # kve = kv * exp(z) keeps large arguments finite
        out[mask] = np.exp(log_pref + nu * np.log(zm) - zm) * special.kve(nu, zm)
    # the exact value never exceeds psi(0) = 1; rounding near 0 can
    return np.minimum(out, 1.0)


@dataclass(frozen=True)
class KernelPoint:
    """One member of a family: the family plus a parameter inside its domain."""

    family: KernelFamily
    param: float

    def __post_init__(self):
        lo, hi = self.family.domain
        p = float(self.param)
        if not (lo <= p <= hi) and not np.isclose(p, lo, rtol=1e-12) \
                and not np.isclose(p, hi, rtol=1e-12):
            raise ValueError(f"parameter {p} outside domain [{lo}, {hi}]")
        object.__setattr__(self, "param", p)

    def psi(self, z):
        return self.family.psi(self.param, z)

    def __call__(self, x, y):
        return eval_kernel(self, x, y)


def eval_kernel(kp: KernelPoint, x, y) -> float:
    """``k(x, y) = psi(x - y)`` for a single pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (kp.family.dim,) or y.shape != (kp.family.dim,):
        raise ValueError(f"points must have dimension {kp.family.dim}")
    return float(kp.psi(x - y))


def gram_matrix(kp: KernelPoint, X, Y=None) -> np.ndarray:
    """Matrix ``G[i, j] = k(X_i, Y_j)``; ``Y`` defaults to ``X``."""
    Xp = as_points(X)
    Yp = Xp if Y is None else as_points(Y)
    fam = kp.family
    if Xp.shape[1] != fam.dim or Yp.shape[1] != fam.dim:
        raise ValueError(f"samples must have dimension {fam.dim}")
    if fam.needs_coordinates:
        return fam.psi(kp.param, Xp[:, None, :] - Yp[None, :, :])
    sq = cdist(Xp, Yp, "sqeuclidean")
    G = fam.psi_from(kp.param, sq=sq)
    if Y is None:
        G = 0.5 * (G + G.T)
    return G


def _upper_values(fam: KernelFamily, params, X) -> np.ndarray:
    """Kernel values on the pairs ``i < j`` for each parameter, shape (P, n(n-1)/2)."""
    Xp = as_points(X)
    iu = np.triu_indices(Xp.shape[0], k=1)
    z = Xp[iu[0]] - Xp[iu[1]]
    sq = np.sum(z * z, axis=1)
    return np.array([fam.psi_from(p, sq=sq, z=z) for p in params])


def rho_distance(kp1: KernelPoint, kp2: KernelPoint, X) -> float:
    """Data-dependent distance ``sqrt((2/n^2) sum_{i<j} (k1 - k2)^2)``."""
    Xp = as_points(X)
    n = Xp.shape[0]
    if n < 2:
        raise ValueError("rho_distance needs at least two samples")
    if kp1.family.dim != kp2.family.dim:
        raise ValueError("kernels live on different dimensions")
    iu = np.triu_indices(n, k=1)
    z = Xp[iu[0]] - Xp[iu[1]]
    diff = kp1.psi(z) - kp2.psi(z)
    return math.sqrt(2.0 / n**2 * float(np.sum(diff * diff)))


def rho_matrix(family: KernelFamily, grid, X) -> np.ndarray:
    """All pairwise ``rho`` distances between the grid members of ``family``."""
    Xp = as_points(X)
    n = Xp.shape[0]
    if n < 2:
        raise ValueError("rho_distance needs at least two samples")
    V = _upper_values(family, grid, Xp)
    sq = np.sum(V * V, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * V @ V.T
    D = np.sqrt(np.clip(2.0 / n**2 * D2, 0.0, None))
    np.fill_diagonal(D, 0.0)
    return 0.5 * (D + D.T)


@dataclass(frozen=True)
class Cover:
    """Greedy cover of a parameter grid under ``rho``."""

    selected: tuple[float, ...]
    size: int
    eps: float


@dataclass(frozen=True)
class FarthestPointOrder:
    """Farthest-point traversal of a grid.

    ``radii[k]`` is the covering radius achieved by the first ``k + 1``
    centres; it is non-increasing, which makes the cover size monotone in
    ``eps``.
    """

    grid: tuple[float, ...]
    order: tuple[int, ...]
    radii: tuple[float, ...]

    def size(self, eps: float) -> int:
        r = np.asarray(self.radii)
        return int(np.argmax(r <= eps)) + 1 if np.any(r <= eps) else len(r)

    def cover(self, eps: float) -> Cover:
        k = self.size(eps)
        return Cover(tuple(self.grid[i] for i in self.order[:k]), k, eps)


def farthest_point_order(family: KernelFamily, grid, X, D=None) -> FarthestPointOrder:
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    if D is None:
        D = rho_matrix(family, grid, X) if len(grid) > 1 else np.zeros((1, 1))
    dist = D[0].copy()
    order, radii = [0], [float(dist.max())]
    # exact zeros are already covered; stop once the radius hits zero
    while radii[-1] > 0 and len(order) < len(grid):
        nxt = int(np.argmax(dist))
        order.append(nxt)
        dist = np.minimum(dist, D[nxt])
        radii.append(float(dist.max()))
    return FarthestPointOrder(grid, tuple(order), tuple(radii))


def empirical_cover(family: KernelFamily, grid, X, eps: float) -> Cover:
    """Greedy farthest-point cover of ``grid`` at radius ``eps`` under ``rho``.

    Every grid member ends up within ``eps`` of a selected one.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return farthest_point_order(family, grid, X).cover(eps)


def log_grid(family: KernelFamily, size: int) -> np.ndarray:
    lo, hi = family.domain
    if lo == hi:
        return np.array([lo])
    return np.geomspace(lo, hi, size)
