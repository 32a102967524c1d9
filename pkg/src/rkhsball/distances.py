"""MMD estimators, their supremum over a kernel family and smoothed variants.

All closed forms for the Gaussian family go through the exact
Gauss-polynomial algebra in :mod:`rkhsball._gausspoly`: a per-coordinate
``K_h * psi_sigma`` is again ``poly * exp(-a x^2)``, and a d-dimensional
term is the product of d such factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermgauss
from scipy import optimize as sopt

from ._gausspoly import GaussPoly, convolve_all, gaussian_psi, normal_density
from ._pairs import PairSums
from .distributions import DistributionSpec, sample_distribution
from .kernels import KernelFamily, KernelPoint, gram_matrix
from .optimize import OptimizerConfig, maximize
from .samples import as_points
from .smoothing import SmoothingKernel, build_order_kernel


@dataclass
class DistanceEstimate:
    """A distance value with the optimiser's audit trail.

    ``arg_sup`` is the maximising parameter, or ``{"param", "y"}`` for
    :func:`kx_distance`.
    """

    value: float
    arg_sup: Any
    method: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "arg_sup": self.arg_sup, "method": self.method,
                "diagnostics": self.diagnostics}


def _finish(res, method: str, family: KernelFamily | None = None, **extra) -> DistanceEstimate:
    diag = res.diagnostics()
    if family is not None:
        diag["domain"] = list(family.domain)
        diag["truncated"] = list(family.truncated)
    diag.update(extra)
    value = math.sqrt(max(res.value, 0.0))
    return DistanceEstimate(value, res.x, method, diag)


# -- plain MMD ----------------------------------------------------------------

def mmd_squared(kp: KernelPoint, X, Y, unbiased: bool = False) -> float:
    """Squared MMD between the empirical measures of ``X`` and ``Y``.

    The default V-statistic includes diagonal terms and is clamped at zero.
    ``unbiased=True`` drops the diagonals (U-statistic) and may be negative.
    """
    Xp, Yp = as_points(X), as_points(Y)
    n, m = len(Xp), len(Yp)
    Gxx, Gyy, Gxy = gram_matrix(kp, Xp), gram_matrix(kp, Yp), gram_matrix(kp, Xp, Yp)
    if unbiased:
        if n < 2 or m < 2:
            raise ValueError("the U-statistic needs at least two points per set")
        sxx = (Gxx.sum() - np.trace(Gxx)) / (n * (n - 1))
        syy = (Gyy.sum() - np.trace(Gyy)) / (m * (m - 1))
        return float(sxx + syy - 2 * Gxy.mean())
    val = _combine(Gxx.sum() / n**2, Gyy.sum() / m**2, Gxy.sum() / (n * m))
    return max(float(val), 0.0)


class _MMDPairs:
    """Pair-sum caches for the three blocks of an MMD between two samples."""

    def __init__(self, X, Y):
        self.X, self.Y = as_points(X), as_points(Y)
        self.n, self.m = len(self.X), len(self.Y)
        self.xx = PairSums(self.X)
        self.yy = PairSums(self.Y)
        self.xy = PairSums(self.X, self.Y)


def _gp_pair_sum(pairs: PairSums, f: GaussPoly, d: int) -> float:
    """``sum_{i,j} prod_k f(z_k)`` for a per-coordinate Gauss polynomial ``f``."""
    if f.poly.degree() == 0:
        return f.poly.coef[0] ** d * pairs.radial(Polynomial([1.0]), f.a)
    if d == 1 and f.is_even:
        return pairs.radial(f.radial_poly(), f.a)
    return pairs.product(f.poly, f.a)


# squared distances this close to zero relative to the self terms are rounding noise
_CANCEL_TOL = 1e-12


def _combine(sxx: float, syy: float, sxy: float) -> float:
    """``sxx + syy - 2 sxy`` (already normalized), with cancellation noise set to 0."""
    v = sxx + syy - 2.0 * sxy
    return 0.0 if abs(v) <= _CANCEL_TOL * (abs(sxx) + abs(syy)) else v


def _gauss_mmd_objective(P: _MMDPairs, fxx: GaussPoly, fyy: GaussPoly, fxy: GaussPoly,
                         d: int) -> float:
    sxx = _gp_pair_sum(P.xx, fxx, d)
    syy = _gp_pair_sum(P.yy, fyy, d)
    sxy = _gp_pair_sum(P.xy, fxy, d)
    return _combine(sxx / P.n**2, syy / P.m**2, sxy / (P.n * P.m))


def _family_sum(pairs: PairSums, fam: KernelFamily, p: float) -> float:
    if fam.family == "gaussian":
        return pairs.radial(Polynomial([1.0]), p)
    if fam.family == "rbf_mixture":
        return sum(w * pairs.radial(Polynomial([1.0]), p * s)
                   for w, s in zip(fam.aux["weights"], fam.aux["atoms"]))
    if fam.needs_coordinates:
        return pairs.of_diff(lambda z: fam.psi(p, z), even=True)
    return pairs.of_sq(lambda t: fam.psi_from(p, sq=t))


def _check_dims(fam_dim: int, *sets):
    for S in sets:
        if S.shape[1] != fam_dim:
            raise ValueError(f"samples have dimension {S.shape[1]}, family has {fam_dim}")


def sup_mmd(family: KernelFamily, X, Y, cfg: OptimizerConfig | None = None) -> DistanceEstimate:
    """``sup_k MMD_k(P_n, Q_m)`` over the parameter domain of ``family``.

    Returns the square root of the best (clamped) V-statistic found by a
    log-grid scan followed by golden-section refinement.
    """
    P = _MMDPairs(X, Y)
    _check_dims(family.dim, P.X, P.Y)
    if family.family == "gaussian":
        delta = normal_density(0.0)

        def obj(s):
            psi = gaussian_psi(s)
            f = delta.convolve(psi)
            return _gauss_mmd_objective(P, f, f, f, family.dim)
    else:
        def obj(p):
            return _combine(_family_sum(P.xx, family, p) / P.n**2,
                            _family_sum(P.yy, family, p) / P.m**2,
                            _family_sum(P.xy, family, p) / (P.n * P.m))
    res = maximize(obj, *family.domain, cfg)
    return _finish(res, "v_statistic", family)


# -- smoothed empirical measures, Gaussian family -----------------------------

def gaussian_family(a: float, dim: int, sigma_min: float | None = None) -> KernelFamily:
    return KernelFamily.gaussian(a, dim, sigma_min)


def _kernel_factor(K: SmoothingKernel | None, h: float) -> GaussPoly:
    if h < 0:
        raise ValueError("bandwidth must be non-negative")
    if h == 0:
        return normal_density(0.0)
    if K is None:
        K = build_order_kernel(2)
    if K.base != "gaussian_base":
        raise ValueError("Gaussian closed forms need a Gaussian-base smoothing kernel")
    return K.factor(h)


def _resolve_kernel(kernel, d):
    if kernel is None:
        return build_order_kernel(2, d)
    if kernel.dim != d:
        raise ValueError(f"smoothing kernel has dimension {kernel.dim}, samples {d}")
    return kernel


def smoothed_empirical_gauss(a: float, h: float, X, cfg: OptimizerConfig | None = None,
                             kernel: SmoothingKernel | None = None,
                             sigma_min: float | None = None) -> DistanceEstimate:
    """``||P_n * K_h - P_n||`` in closed form for the Gaussian family ``sigma in (0, a]``.

    The default kernel is ``pi^{-d/2} exp(-|u|^2)``, for which the pair
    function is
    ``(1+2 sigma h^2)^{-d/2} psi_{sigma/(1+2 sigma h^2)} + psi_sigma
    - 2 (1+sigma h^2)^{-d/2} psi_{sigma/(1+sigma h^2)}``.
    Any Gaussian-base kernel of higher order is handled exactly as well.
    """
    if h < 0:
        raise ValueError("bandwidth must be non-negative")
    Xp = as_points(X)
    d = Xp.shape[1]
    fam = gaussian_family(a, d, sigma_min)
    if h == 0:
        return DistanceEstimate(0.0, fam.domain[1], "closed_form",
                                {"evaluations": 0, "domain": list(fam.domain)})
    K = _resolve_kernel(kernel, d)
    kh = _kernel_factor(K, h)
    khh = kh.convolve(kh)
    pairs = PairSums(Xp)
    n = len(Xp)

    def obj(s):
        psi = gaussian_psi(s)
        t2 = _gp_pair_sum(pairs, khh.convolve(psi), d)
        t0 = _gp_pair_sum(pairs, psi, d)
        t1 = _gp_pair_sum(pairs, kh.convolve(psi), d)
        return _combine(t2, t0, t1) / n**2

    res = maximize(obj, *fam.domain, cfg)
    return _finish(res, "closed_form", fam, kernel=K.to_spec(), h=h)


def smoothed_cross_gauss(X, h: float, Y, g: float, a: float,
                         cfg: OptimizerConfig | None = None,
                         kernel: SmoothingKernel | None = None,
                         sigma_min: float | None = None) -> DistanceEstimate:
    """``||P_n * K_h - Q_m * K_g||`` for the Gaussian family on ``(0, a]``.

    Within-X pairs see ``K_h * K_h * psi``, within-Y pairs ``K_g * K_g * psi``
    and cross pairs ``K_h * K_g * psi``. With ``h = g = 0`` the objective is
    literally the one used by :func:`sup_mmd`.
    """
    if h < 0 or g < 0:
        raise ValueError("bandwidths must be non-negative")
    P = _MMDPairs(X, Y)
    d = P.X.shape[1]
    if P.Y.shape[1] != d:
        raise ValueError("samples have different dimensions")
    fam = gaussian_family(a, d, sigma_min)
    K = _resolve_kernel(kernel, d) if (h > 0 or g > 0) else None
    kh, kg = _kernel_factor(K, h), _kernel_factor(K, g)
    khh, kgg, khg = kh.convolve(kh), kg.convolve(kg), kh.convolve(kg)

    def obj(s):
        psi = gaussian_psi(s)
        return _gauss_mmd_objective(P, khh.convolve(psi), kgg.convolve(psi),
                                    khg.convolve(psi), d)

    res = maximize(obj, *fam.domain, cfg)
    extra = {"h": h, "g": g}
    if K is not None:
        extra["kernel"] = K.to_spec()
    return _finish(res, "closed_form", fam, **extra)


# -- product Cauchy family ------------------------------------------------------

def _cauchy_pair_fn(alpha: float, h: float, mult: float = 1.0):
    """``z -> prod_k (alpha/(alpha+mult*h)) phi_{alpha+mult*h}(z_k)``."""
    b = alpha + mult * h
    c = alpha / b

    def fn(z):
        return np.prod(c * b * b / (b * b + z * z), axis=1)
    return fn


def smoothed_empirical_cauchy(c: float, h: float, X, cfg: OptimizerConfig | None = None,
                              c_max: float | None = None) -> DistanceEstimate:
    """``||P_n * K_h - P_n||`` for the product-Cauchy family ``alpha in [c, c_max]``.

    With ``K = pi^{-d} phi_1`` the scale-addition rule
    ``K_h * phi_alpha = prod (alpha/(alpha+h)) phi_{alpha+h}`` gives the pair
    function ``prod(alpha/(alpha+2h)) phi_{alpha+2h} + phi_alpha
    - 2 prod(alpha/(alpha+h)) phi_{alpha+h}``.
    """
    if h < 0:
        raise ValueError("bandwidth must be non-negative")
    Xp = as_points(X)
    d = Xp.shape[1]
    fam = KernelFamily.product_cauchy(c, d, c_max)
    if h == 0:
        return DistanceEstimate(0.0, fam.domain[0], "closed_form",
                                {"evaluations": 0, "domain": list(fam.domain)})
    pairs = PairSums(Xp)
    n = len(Xp)

    def obj(alpha):
        t2 = pairs.of_diff(_cauchy_pair_fn(alpha, h, 2.0), even=True)
        t0 = pairs.of_diff(_cauchy_pair_fn(alpha, 0.0), even=True)
        t1 = pairs.of_diff(_cauchy_pair_fn(alpha, h, 1.0), even=True)
        return _combine(t2, t0, t1) / n**2

    res = maximize(obj, *fam.domain, cfg)
    return _finish(res, "closed_form", fam, h=h)


# -- generic families by quadrature -------------------------------------------

def _quad_rule_1d(K: SmoothingKernel, m: int):
    """Nodes/weights for ``int kappa(u) f(u) du`` and ``int (kappa*kappa)(v) f(v) dv``."""
    if K.base == "cauchy_base":
        theta = -math.pi / 2 + (np.arange(m) + 0.5) * math.pi / m
        w = np.full(m, 1.0 / m)
        # kappa * kappa is the Cauchy density of scale 2
        return np.tan(theta), w, 2.0 * np.tan(theta), w
    z, w = hermgauss(m)
    u1 = z
    w1 = w * np.polynomial.polynomial.polyval(z * z, K.coeffs)
    kk = K.factor(1.0).convolve(K.factor(1.0))  # P2(v) exp(-v^2/2)
    u2 = math.sqrt(2.0) * z
    w2 = math.sqrt(2.0) * w * kk.poly(u2)
    return u1, w1, u2, w2


def _tensor(nodes, weights, d):
    if d == 1:
        return nodes[:, None], weights
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    wg = np.meshgrid(*([weights] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1), np.prod([g.ravel() for g in wg], axis=0)


class _SmoothedQuadrature:
    """Tensor quadrature of ``K_h * psi`` and ``K_h * K_h * psi`` at pair differences."""

    def __init__(self, family: KernelFamily, K: SmoothingKernel, h: float, X, m: int):
        self.family, self.h = family, h
        Xp = as_points(X)
        self.n, self.d = Xp.shape
        iu = np.triu_indices(self.n, k=1)
        self.z = Xp[iu[0]] - Xp[iu[1]]
        u1, w1, u2, w2 = _quad_rule_1d(K, m)
        self.U1, self.W1 = _tensor(u1, w1, self.d)
        self.U2, self.W2 = _tensor(u2, w2, self.d)

    def _conv(self, p, z, U, W):
        vals = np.empty(len(z))
        block = max(1, 400_000 // len(W))
        for s in range(0, len(z), block):
            pts = z[s:s + block, None, :] - self.h * U[None, :, :]
            vals[s:s + block] = self.family.psi(p, pts) @ W
        return vals

    def pair_function(self, p, z):
        """``(K_h*K_h*psi + psi - 2 K_h*psi)(z)`` for rows of ``z``."""
        return (self._conv(p, z, self.U2, self.W2) + self.family.psi(p, z)
                - 2.0 * self._conv(p, z, self.U1, self.W1))

    def objective(self, p) -> float:
        zero = np.zeros((1, self.d))
        off = self.pair_function(p, self.z).sum() if len(self.z) else 0.0
        return float((2.0 * off + self.n * self.pair_function(p, zero)[0]) / self.n**2)

    def witness(self, p, X, ys):
        """``(1/n) sum_i (K_h*psi - psi)(y - X_i)`` at each row of ``ys``."""
        Xp = as_points(X)
        out = np.empty(len(ys))
        for k, y in enumerate(np.atleast_2d(ys)):
            z = y[None, :] - Xp
            out[k] = np.mean(self._conv(p, z, self.U1, self.W1) - self.family.psi(p, z))
        return out


def smoothed_distance_generic(family: KernelFamily, K: SmoothingKernel, h: float, X,
                              cfg: OptimizerConfig | None = None, nodes: int | None = None,
                              quad_tol: float = 1e-6) -> DistanceEstimate:
    """``||P_n * K_h - P_n||`` for any translation-invariant family, by quadrature.

    Both convolutions are tensor-product quadratures (Gauss-Hermite for the
    Gaussian base, a midpoint rule in ``u = tan(theta)`` for the Cauchy base)
    evaluated at every pairwise difference. The quadrature error is estimated
    at the maximiser by doubling the node count.
    """
    Xp = as_points(X)
    d = Xp.shape[1]
    _check_dims(family.dim, Xp)
    if d > 2:
        raise ValueError("quadrature path supports d <= 2")
    if K.dim != d:
        raise ValueError("smoothing kernel dimension does not match samples")
    if h < 0:
        raise ValueError("bandwidth must be non-negative")
    if h == 0:
        return DistanceEstimate(0.0, family.domain[0], "quadrature",
                                {"evaluations": 0, "quadrature_error": 0.0})
    m = nodes or (80 if d == 1 else 32)
    Q = _SmoothedQuadrature(family, K, h, Xp, m)
    res = maximize(Q.objective, *family.domain, cfg)
    fine = _SmoothedQuadrature(family, K, h, Xp, 2 * m).objective(res.x)
    err = abs(fine - res.value)
    est = _finish(res, "quadrature", family, nodes=m, quadrature_error=err,
                  quadrature_flag=bool(err > quad_tol * max(1.0, abs(fine))))
    return est


# -- K_X metric ------------------------------------------------------------------

def _kx_seeds(Xp, Yp):
    pooled = np.vstack([Xp, Yp])
    mids = []
    for A, B in ((Xp, Yp), (Yp, Xp)):
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        j = np.argmin(d2, axis=1)
        mids.append(0.5 * (A + B[j]))
    return np.unique(np.vstack([pooled] + mids), axis=0)


def kx_distance(family: KernelFamily, X, Y, cfg: OptimizerConfig | None = None,
                param_grid: int = 24, n_refine: int = 6) -> DistanceEstimate:
    """``sup_{k, y} |(1/n) sum_i psi(y - X_i) - (1/m) sum_j psi(y - Y_j)|``.

    Seeds are all data points and midpoints to the nearest point of the other
    sample, scanned over a log parameter grid; the best candidates are refined
    by Nelder-Mead in ``(log param, y)`` followed by a golden-section pass in
    the parameter.
    """
    Xp, Yp = as_points(X), as_points(Y)
    d = Xp.shape[1]
    _check_dims(family.dim, Xp, Yp)
    lo, hi = family.domain
    seeds = _kx_seeds(Xp, Yp)

    def witness(p, ys):
        ys = np.atleast_2d(ys)
        a = family.psi(p, ys[:, None, :] - Xp[None, :, :]).mean(axis=1)
        b = family.psi(p, ys[:, None, :] - Yp[None, :, :]).mean(axis=1)
        return np.abs(a - b)

    grid = np.geomspace(lo, hi, param_grid) if hi > lo else np.array([lo])
    table = np.array([witness(p, seeds) for p in grid])  # (P, S)
    evals = table.size
    order = np.argsort(-table, axis=None, kind="stable")
    cands, seen = [], set()
    for flat in order:
        pi, si = np.unravel_index(flat, table.shape)
        if si in seen:
            continue
        seen.add(si)
        cands.append((float(grid[pi]), seeds[si]))
        if len(cands) >= n_refine:
            break
    pi, si = np.unravel_index(order[0], table.shape)
    best = (float(table[pi, si]), float(grid[pi]), seeds[si].copy())
    llo, lhi = math.log(lo), math.log(hi)

    def neg(v):
        lp = min(max(v[0], llo), lhi)
        return -float(witness(math.exp(lp), v[1:])[0])

    for p0, y0 in cands:
        start = np.concatenate([[math.log(p0)], y0])
        r = sopt.minimize(neg, start, method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400 * (d + 1)})
        evals += r.nfev
        p = math.exp(min(max(r.x[0], llo), lhi))
        if -r.fun > best[0]:
            best = (-r.fun, p, r.x[1:].copy())
    y = best[2]
    if hi > lo:
        res = maximize(lambda p: float(witness(p, y)[0]), lo, hi, cfg)
        evals += res.evals
        if res.value > best[0]:
            best = (res.value, res.x, y)
    diag = {"evaluations": int(evals), "seeds": int(len(seeds)), "domain": [lo, hi]}
    return DistanceEstimate(float(best[0]), {"param": best[1], "y": [float(v) for v in best[2]]},
                            "v_statistic", diag)


# -- distance to a known population ---------------------------------------------

def _population_terms(spec: DistributionSpec, K: SmoothingKernel | None, h: float):
    """Return ``(cross(sigma, X), self(sigma))`` for the Gaussian family."""
    w, mu, sc = spec.w, spec.mu, spec.sc
    kh = _kernel_factor(K, h) if h > 0 else normal_density(0.0)
    comps = [i for i in range(len(w)) if w[i] > 0]

    def cross(s, Xp):
        psi = gaussian_psi(s)
        total = np.zeros(len(Xp))
        cache = {}
        for c in comps:
            val = np.full(len(Xp), w[c])
            for k in range(spec.dim):
                key = sc[c, k]
                if key not in cache:
                    cache[key] = convolve_all(kh, normal_density(key**2), psi)
                val *= cache[key](Xp[:, k] - mu[c, k])
            total += val
        return total

    def self_term(s):
        psi = gaussian_psi(s)
        total = 0.0
        for c in comps:
            for c2 in comps:
                val = w[c] * w[c2]
                for k in range(spec.dim):
                    f = normal_density(sc[c, k] ** 2 + sc[c2, k] ** 2).convolve(psi)
                    val *= float(f(mu[c, k] - mu[c2, k]))
                total += val
        return total

    return cross, self_term


def population_distance(X, spec: DistributionSpec, a: float = 1.0, h: float = 0.0,
                        kernel: SmoothingKernel | None = None,
                        cfg: OptimizerConfig | None = None, sigma_min: float | None = None,
                        family: KernelFamily | None = None, reference_size: int = 100_000,
                        seed: int = 0) -> DistanceEstimate:
    """``||P_n * K_h - P||`` for a known distribution ``P``.

    For the Gaussian family and a Gaussian mixture ``P`` every term is exact
    (Gaussian convolutions). Otherwise ``P`` is replaced by a reference sample
    ``Z_1..Z_M`` (``M = reference_size``, only ``h = 0``): the cross term
    averages over all ``X_i - Z_j`` and ``E psi(Z - Z')`` over ``n`` cyclic
    shifts of the reference sample. Each evaluation costs ``O(n M)``.
    """
    Xp = as_points(X)
    n, d = Xp.shape
    if d != spec.dim:
        raise ValueError("sample and distribution dimensions differ")
    fam = family or gaussian_family(a, d, sigma_min)
    if fam.family == "gaussian" and spec.kind == "gaussian_mixture":
        fam_g = fam
        K = _resolve_kernel(kernel, d) if h > 0 else None
        kh = _kernel_factor(K, h)
        khh = kh.convolve(kh)
        pairs = PairSums(Xp)
        cross, self_term = _population_terms(spec, K, h)

        def obj(s):
            t_nn = _gp_pair_sum(pairs, khh.convolve(gaussian_psi(s)), d) / n**2
            return _combine(t_nn, self_term(s), float(np.mean(cross(s, Xp))))

        res = maximize(obj, *fam_g.domain, cfg)
        return _finish(res, "closed_form", fam_g, h=h, population=spec.tag)
    if h != 0:
        raise ValueError("reference-sample path only supports h = 0")
    if reference_size < 2:
        raise ValueError("reference_size must be at least 2")
    R = sample_distribution(spec, reference_size, seed).points
    pairs = PairSums(Xp)
    M = reference_size
    # E psi(Z - Z') over the pairs (Z_j, Z_{j+k mod M}), k = 1..L: every reference
    # point enters equally often, so its first-order noise cancels against the
    # cross term as in the full V-statistic, at O(n M) cost per evaluation
    shifts = range(1, min(max(n, 1), M - 1) + 1)
    block = max(1, 2_000_000 // (M * d))

    def obj(p):
        t_nn = _family_sum(pairs, fam, p) / n**2
        t_pp = sum(float(np.sum(fam.psi(p, R - np.roll(R, k, axis=0))))
                   for k in shifts) / (len(shifts) * M)
        cross = sum(float(np.sum(fam.psi(p, Xp[i:i + block, None, :] - R[None, :, :])))
                    for i in range(0, n, block)) / (n * M)
        return _combine(t_nn, t_pp, cross)

    res = maximize(obj, *fam.domain, cfg)
    return _finish(res, "reference_sample", fam, reference_size=reference_size,
                   population=spec.tag)
