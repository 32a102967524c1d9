"""Lepski-type bandwidth selection and the L1 machinery behind it."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.stats import qmc

from ._gausspoly import GaussPoly, gaussian_psi, normal_density
from ._pairs import PairSums
from .distances import (_gp_pair_sum, _kernel_factor, smoothed_distance_generic,
                        smoothed_empirical_cauchy)
from .distributions import DistributionSpec
from .kernels import KernelFamily
from .optimize import OptimizerConfig, maximize
from .samples import as_points
from .smoothing import SmoothingKernel, kde_eval

# Gaussian-base kernels are below exp(-64) beyond 8 bandwidths
_WINDOW = 8.0
_STEPS_PER_H = 8


@dataclass(frozen=True)
class LepskiConfig:
    """Settings for :func:`lepski_bandwidth`.

    ``A`` is either a positive number or ``"auto"`` (see
    :func:`calibrate_A`). The grid is ``{rho^-k : rho^-k > grid_const (log n)^2 / n}``.
    ``gamma`` and ``L`` describe the assumed moment class and are recorded
    only; ``family`` is the kernel-family spec for the F_H cap, ``None``
    meaning the Gaussian family on ``(0, 1]``.
    """

    rho: float = 1.3
    A: float | str = "auto"
    gamma: float = 1.0
    L: float | None = None
    family: dict | None = None
    order: int = 2
    grid_const: float = 1.0
    cap: bool = True
    A_multiplier: float = 1.0
    calib_quantile: float = 0.95
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(grid_size=24))

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if self.A != "auto" and not (isinstance(self.A, (int, float)) and self.A > 0):
            raise ValueError("A must be positive or 'auto'")
        if not 0 < self.calib_quantile < 1:
            raise ValueError("calib_quantile must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.to_dict()
        return d


@dataclass
class CandidateRecord:
    h: float
    l1_max_excess: float | None
    l1_devs: list
    thresholds: list
    l1_pass: bool
    fh_value: float | None
    fh_cap: float
    fh_pass: bool | None


@dataclass
class BandwidthSelection:
    """Chosen bandwidth, the grid scanned and one record per grid point."""

    h: float
    grid: list
    records: list
    A: float
    fallback: bool
    config: dict

    def to_dict(self) -> dict:
        return {"h": self.h, "grid": self.grid, "A": self.A, "fallback": self.fallback,
                "records": [asdict(r) for r in self.records], "config": self.config}


# -- one-dimensional KDE tables -------------------------------------------------

class _KDETable1D:
    """``P_n * K_h`` (minus an optional reference) tabulated per bandwidth.

    Each bandwidth gets its own grid of spacing ``h / 8`` over a range common
    to all bandwidths, plus a cubic spline for evaluation between nodes.
    """

    def __init__(self, X, K: SmoothingKernel, hs, ref=None):
        self.x = np.sort(as_points(X)[:, 0])
        self.n = len(self.x)
        self.K = K
        self.ref = ref
        hmax = max(hs)
        self.lo = self.x[0] - _WINDOW * hmax
        self.hi = self.x[-1] + _WINDOW * hmax
        self.tables = {}
        for h in hs:
            self.tables[h] = self._tabulate(h)

    def _tabulate(self, h):
        step = h / _STEPS_PER_H
        G = int(math.ceil((self.hi - self.lo) / step)) + 1
        grid = self.lo + step * np.arange(G)
        if self.K.base == "gaussian_base":
            vals = np.zeros(G)
            W = int(math.ceil(_WINDOW * _STEPS_PER_H)) + 1
            base = np.rint((self.x - self.lo) / step).astype(np.int64)
            for j in range(-W, W + 1):
                idx = base + j
                ok = (idx >= 0) & (idx < G)
                u = (grid[idx[ok]] - self.x[ok]) / h
                vals += np.bincount(idx[ok], weights=self.K.kappa(u), minlength=G)
            vals /= self.n * h
        else:
            vals = kde_eval(self.K, h, self.x[:, None], grid[:, None])
        if self.ref is not None:
            vals = vals - self.ref(h, grid)
        return grid, vals, CubicSpline(grid, vals)

    def l1(self, h, g):
        """``int |f_h - f_g|`` over the window of the larger bandwidth; returns (value, error)."""
        if h == g:
            return 0.0, 0.0
        big, small = (h, g) if h > g else (g, h)
        grid, vals, _ = self.tables[small]
        _, _, spline = self.tables[big]
        a = self.x[0] - _WINDOW * big
        b = self.x[-1] + _WINDOW * big
        sel = (grid >= a) & (grid <= b)
        xs = grid[sel]
        diff = vals[sel] - spline(xs)
        full = _abs_spline_integral(diff, xs)
        half = _abs_spline_integral(diff[::2], xs[::2]) if len(xs) > 4 else full
        return float(full), float(abs(full - half) / 3.0)


def _abs_spline_integral(f, x):
    """``int |f|`` for the cubic-spline interpolant of ``f``, split where its node values change sign."""
    c = CubicSpline(x, f).c
    dx = np.diff(x)

    def piece(t, k):
        return t * (c[3, k] + t * (c[2, k] / 2 + t * (c[1, k] / 3 + t * c[0, k] / 4)))

    total = np.abs(piece(dx, slice(None)))
    k = np.flatnonzero(f[:-1] * f[1:] < 0)
    if len(k):
        # one crossing per sign-changing interval, located by vectorised bisection
        lo, hi = np.zeros(len(k)), dx[k].copy()
        f_lo = f[k]
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            fm = c[0, k] * mid ** 3 + c[1, k] * mid ** 2 + c[2, k] * mid + c[3, k]
            left = np.sign(fm) == np.sign(f_lo)
            lo = np.where(left, mid, lo)
            hi = np.where(left, hi, mid)
        r = 0.5 * (lo + hi)
        total[k] = np.abs(piece(r, k)) + np.abs(piece(dx[k], k) - piece(r, k))
    return float(np.sum(total))


def _l1_grid_nd(X, K, h, g, d, step_frac=6.0):
    Xp = as_points(X)
    big = max(h, g)
    lo = Xp.min(axis=0) - _WINDOW * big
    hi = Xp.max(axis=0) + _WINDOW * big
    step = min(h, g) / step_frac
    axes = [np.arange(lo[k], hi[k] + step, step) for k in range(d)]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    diff = np.abs(kde_eval(K, h, Xp, mesh) - kde_eval(K, g, Xp, mesh)).reshape(
        [len(a) for a in axes])
    full = diff
    for k, ax in enumerate(axes):
        full = trapezoid(full, ax, axis=0)
    coarse = diff[tuple(slice(None, None, 2) for _ in axes)]
    for ax in axes:
        coarse = trapezoid(coarse, ax[::2], axis=0)
    return float(full), float(abs(full - coarse) / 3.0)


def _l1_qmc(X, K, h, g, d, n_points=2**13, reps=8, seed=0):
    Xp = as_points(X)
    big = max(h, g)
    lo = Xp.min(axis=0) - _WINDOW * big
    hi = Xp.max(axis=0) + _WINDOW * big
    vol = float(np.prod(hi - lo))
    ests = []
    for r in range(reps):
        u = qmc.Sobol(d, scramble=True, seed=seed + r).random(n_points)
        pts = lo + u * (hi - lo)
        ests.append(vol * np.mean(np.abs(kde_eval(K, h, Xp, pts) - kde_eval(K, g, Xp, pts))))
    ests = np.array(ests)
    return float(ests.mean()), float(ests.std(ddof=1) / math.sqrt(reps))


def l1_distance_kde(X, K: SmoothingKernel, h: float, g: float,
                    return_error: bool = False):
    """``int |P_n * K_h - P_n * K_g|`` over the data range padded by ``8 max(h, g)``.

    ``d = 1`` uses per-bandwidth tables and the trapezoid rule, ``d = 2`` a
    tensor grid, and ``d >= 3`` randomised quasi-Monte Carlo whose standard
    error is returned as the error estimate.
    """
    if not (h > 0 and g > 0):
        raise ValueError("bandwidths must be positive")
    Xp = as_points(X)
    d = Xp.shape[1]
    if h == g:
        val, err = 0.0, 0.0
    elif d == 1:
        val, err = _KDETable1D(Xp, K, [h, g]).l1(h, g)
    elif d == 2:
        val, err = _l1_grid_nd(Xp, K, h, g, d)
    else:
        val, err = _l1_qmc(Xp, K, h, g, d)
    return (val, err) if return_error else val


def l1_risk(X, K: SmoothingKernel, h: float, spec: DistributionSpec, step_frac: float = 8.0) -> float:
    """``int |P_n * K_h - p|`` for a one-dimensional known density ``p``."""
    Xp = as_points(X)
    if Xp.shape[1] != 1:
        raise ValueError("l1_risk is implemented for d = 1")
    tab = _KDETable1D(Xp, K, [h])
    grid, vals, _ = tab.tables[h]
    # widen to cover the density mass outside the data range
    sd = math.sqrt(float(np.max(spec.variance()))) if spec.kind != "cauchy_mixture" else 50.0
    lo = min(grid[0], float(spec.mu.min()) - 12 * sd)
    hi = max(grid[-1], float(spec.mu.max()) + 12 * sd)
    step = h / step_frac
    xs = np.arange(lo, hi + step, step)
    inside = (xs >= grid[0]) & (xs <= grid[-1])
    f = np.zeros_like(xs)
    f[inside] = tab.tables[h][2](xs[inside])
    return float(trapezoid(np.abs(f - spec.pdf(xs)), xs))


# -- the Lepski procedure -------------------------------------------------------

def lepski_grid(n: int, rho: float = 1.3, grid_const: float = 1.0) -> list[float]:
    """``{rho^-k : k >= 0, rho^-k > grid_const (log n)^2 / n}`` in decreasing order."""
    floor = grid_const * math.log(n) ** 2 / n
    grid, k = [], 0
    while rho ** (-k) > floor:
        grid.append(rho ** (-k))
        k += 1
    return grid


def _pilot_reference(mean, var, K: SmoothingKernel):
    """``h, x -> (N(mean, var) * K_h)(x)`` in closed form."""
    cache: dict[float, GaussPoly] = {}

    def ref(h, x):
        if h not in cache:
            cache[h] = normal_density(var).convolve(K.factor(h))
        return cache[h](np.asarray(x) - mean)
    return ref


def calibrate_A(X, K: SmoothingKernel, grid, quantile: float = 0.95, seed: int = 0,
                multiplier: float = 1.0) -> float:
    """Noise-level Lepski constant from a Gaussian pilot fit.

    A pilot sample of the same size is drawn from the fitted Gaussian
    ``P_hat`` and ``A`` is the ``quantile`` of
    ``n g^d ||(P_pilot - P_hat) * (K_h - K_g)||_1^2`` over grid pairs
    ``h > g``. Subtracting the known ``P_hat * K_h`` leaves only the
    stochastic part of each deviation.
    """
    Xp = as_points(X)
    n, d = Xp.shape
    if d != 1:
        raise ValueError("automatic calibration is implemented for d = 1")
    if K.base != "gaussian_base":
        raise ValueError("automatic calibration needs a Gaussian-base kernel")
    mean = float(Xp.mean())
    var = float(Xp.var(ddof=1)) if n > 1 else 1.0
    rng = np.random.default_rng(seed)
    pilot = mean + math.sqrt(var) * rng.standard_normal((n, 1))
    tab = _KDETable1D(pilot, K, grid, ref=_pilot_reference(mean, var, K))
    vals = []
    for i, h in enumerate(grid):
        for g in grid[i + 1:]:
            dev, _ = tab.l1(h, g)
            vals.append(n * g**d * dev**2)
    if not vals:
        return math.inf
    return multiplier * float(np.quantile(vals, quantile))


def _cap_distance(family: KernelFamily, K: SmoothingKernel, h: float, Xp, pairs, cfg):
    n, d = Xp.shape
    if family.family == "gaussian" and K.base == "gaussian_base":
        kh = _kernel_factor(K, h)
        khh = kh.convolve(kh)

        def obj(s):
            psi = gaussian_psi(s)
            return (_gp_pair_sum(pairs, khh.convolve(psi), d) + _gp_pair_sum(pairs, psi, d)
                    - 2.0 * _gp_pair_sum(pairs, kh.convolve(psi), d)) / n**2
        res = maximize(obj, *family.domain, cfg)
        return math.sqrt(max(res.value, 0.0))
    if family.family == "product_cauchy" and K.base == "cauchy_base":
        return smoothed_empirical_cauchy(family.domain[0], h, Xp, cfg,
                                         c_max=family.domain[1]).value
    return smoothed_distance_generic(family, K, h, Xp, cfg).value


def lepski_bandwidth(X, K: SmoothingKernel, family: KernelFamily | None = None,
                     cfg: LepskiConfig | None = None) -> BandwidthSelection:
    """Largest grid bandwidth passing both the L1 and the F_H conditions.

    Candidates are scanned from the largest down. ``h`` passes when
    ``||P_n*(K_h - K_g)||_1 <= sqrt(A / (n g^d))`` for every grid ``g < h``
    and ``||P_n * K_h - P_n||_{F_H} <= n^{-1/2} / log n``. When nothing
    passes, the smallest grid element is returned with ``fallback=True``.
    """
    cfg = cfg or LepskiConfig()
    Xp = as_points(X)
    n, d = Xp.shape
    if n < 8:
        raise ValueError("lepski_bandwidth needs n >= 8")
    if K.dim != d:
        raise ValueError("smoothing kernel dimension does not match samples")
    if cfg.gamma <= d / 2:
        raise ValueError("gamma must exceed d/2")
    if family is None:
        family = KernelFamily.from_spec(cfg.family) if cfg.family else KernelFamily.gaussian(1.0, d)
    grid = lepski_grid(n, cfg.rho, cfg.grid_const)
    if not grid:
        raise ValueError("empty bandwidth grid")
    if cfg.A == "auto":
        A = calibrate_A(Xp, K, grid, cfg.calib_quantile, cfg.seed, cfg.A_multiplier)
    else:
        A = float(cfg.A)
    table = _KDETable1D(Xp, K, grid) if d == 1 else None
    cap = 1.0 / (math.sqrt(n) * math.log(n))
    pairs = PairSums(Xp) if cfg.cap and family.family == "gaussian" else None
    records, chosen = [], None
    for i, h in enumerate(grid):
        devs, thr = [], []
        for g in grid[i + 1:]:
            dev = table.l1(h, g)[0] if table is not None else l1_distance_kde(Xp, K, h, g)
            devs.append(dev)
            thr.append(math.sqrt(A / (n * g**d)))
        excess = max((a - b for a, b in zip(devs, thr)), default=None)
        l1_pass = all(a <= b for a, b in zip(devs, thr))
        fh_val, fh_pass = None, None
        if chosen is None and l1_pass:
            if cfg.cap:
                fh_val = _cap_distance(family, K, h, Xp, pairs, cfg.optimizer)
                fh_pass = fh_val <= cap
            else:
                fh_pass = True
            if fh_pass:
                chosen = h
        records.append(CandidateRecord(h, excess, devs, thr, l1_pass, fh_val, cap, fh_pass))
    fallback = chosen is None
    if fallback:
        chosen = grid[-1]
    return BandwidthSelection(chosen, grid, records, A, fallback, cfg.to_dict())
