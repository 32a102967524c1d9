"""Order-r smoothing kernels, kernel density estimates and bandwidth rules."""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._gausspoly import GaussPoly, scaled_kernel
from .samples import as_points

BASES = ("gaussian_base", "cauchy_base")
_BASE_ALIASES = {"gaussian": "gaussian_base", "cauchy": "cauchy_base"}


@dataclass(frozen=True)
class SmoothingKernel:
    """Product kernel ``K(u) = prod_i kappa(u_i)`` on ``R^dim``.

    For the Gaussian base ``kappa(u) = p(u^2) exp(-u^2) / sqrt(pi)`` where
    ``p(v) = sum_l poly_coeffs[l] v^l``; an empty ``poly_coeffs`` means
    ``p = 1``. The Cauchy base is ``kappa(u) = 1 / (pi (1 + u^2))``.
    The bandwidth is applied at call time (see :func:`kde_eval` and :meth:`factor`).
    """

    base: str
    order: int
    dim: int = 1
    poly_coeffs: tuple[float, ...] = field(default=())

    def __post_init__(self):
        base = _BASE_ALIASES.get(self.base, self.base)
        if base not in BASES:
            raise ValueError(f"unknown smoothing base {self.base!r}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "poly_coeffs", tuple(float(c) for c in self.poly_coeffs))
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def coeffs(self) -> np.ndarray:
        """``c_l`` with ``kappa(u) = sum_l c_l u^(2l) exp(-u^2)`` (Gaussian base)."""
        if self.base != "gaussian_base":
            raise ValueError("only the Gaussian base has a polynomial form")
        p = self.poly_coeffs or (1.0,)
        return np.asarray(p) / math.sqrt(math.pi)

    def kappa(self, u) -> np.ndarray:
        """One-dimensional factor."""
        u = np.asarray(u, dtype=float)
        if self.base == "cauchy_base":
            return 1.0 / (math.pi * (1.0 + u * u))
        v = u * u
        return np.polynomial.polynomial.polyval(v, self.coeffs) * np.exp(-v)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise ValueError(f"expected last axis of length {self.dim}")
        return np.prod(self.kappa(u), axis=-1)

    def factor(self, h: float) -> GaussPoly:
        """``kappa_h = kappa(./h)/h`` as an exact Gauss polynomial."""
        return scaled_kernel(self.coeffs, h)

    def to_spec(self) -> dict:
        return {"base": self.base, "order": self.order, "dim": self.dim}

    def to_json(self) -> str:
        return json.dumps(self.to_spec(), sort_keys=True)

    @classmethod
    def from_spec(cls, spec: dict) -> "SmoothingKernel":
        return build_order_kernel(int(spec["order"]), int(spec.get("dim", 1)),
                                  spec.get("base", "gaussian_base"))


def build_order_kernel(r: int, d: int = 1, base: str = "gaussian_base") -> SmoothingKernel:
    """Smoothing kernel of order ``r`` on ``R^d``.

    The multiplier ``p`` of degree ``r/2 - 1`` solves
    ``int u^(2j) kappa(u) du = delta_{j0}`` for ``j < r/2``. With
    ``int u^(2k) exp(-u^2) du = Gamma(k + 1/2)`` that is a small Hankel
    system solved exactly.
    """
    base = _BASE_ALIASES.get(base, base)
    if r < 2 or r % 2:
        raise ValueError(f"order must be a positive even integer, got {r}")
    if base == "cauchy_base":
        if r != 2:
            raise ValueError("the Cauchy base only supports r = 2")
        return SmoothingKernel(base, 2, d)
    if base != "gaussian_base":
        raise ValueError(f"unknown smoothing base {base!r}")
    m = r // 2
    if m == 1:
        return SmoothingKernel(base, r, d)
    G = np.array([[math.gamma(l + j + 0.5) for l in range(m)] for j in range(m)])
    rhs = np.zeros(m)
    rhs[0] = 1.0
    c = np.linalg.solve(G, rhs) * math.sqrt(math.pi)
    return SmoothingKernel(base, r, d, tuple(c))


@dataclass
class OrderReport:
    """Moment audit of a smoothing kernel.

    ``moments`` maps each multi-index ``alpha`` with ``0 < |alpha| < r`` to
    ``(value, error)``; ``theta`` maps each ``|alpha| = r`` to
    ``prod_i int |t|^alpha_i |kappa| / alpha_i!`` (``inf`` when divergent).
    """

    order: int
    integral: float
    integral_error: float
    moments: dict
    theta: dict
    tol: float
    divergent: bool
    nonconverged: list
    vanishing_ok: bool
    passed: bool

    def summary(self) -> str:
        state = "pass" if self.passed else "fail"
        return (f"order {self.order}: {state} (int K = {self.integral:.12g}, "
                f"max |moment| = {max((abs(v) for v, _ in self.moments.values()), default=0):.3g}, "
                f"theta finite = {not self.divergent})")


def _multi_indices(d: int, total: int):
    for a in itertools.product(range(total + 1), repeat=d):
        if sum(a) == total:
            yield a


def _abs_moment_1d(K: SmoothingKernel, k: int):
    """``int |t|^k |kappa(t)| dt`` with a divergence check on the tails.

    A convergent power tail shrinks by orders of magnitude between the
    decades ``[1e2, 1e4]`` and ``[1e4, 1e6]``; a divergent one does not.
    """
    f = lambda t: abs(t) ** k * abs(float(K.kappa(t)))
    val, err = integrate.quad(f, 0, 1e2, limit=400)
    far1, _ = integrate.quad(f, 1e2, 1e4, limit=400)
    far2, _ = integrate.quad(f, 1e4, 1e6, limit=400)
    divergent = far1 > 1e-12 * max(val, 1e-300) and far2 > 0.1 * far1
    if divergent:
        return math.inf, math.inf, True
    tail, tail_err = integrate.quad(f, 1e2, np.inf, limit=400)
    return 2 * (val + tail), 2 * (err + tail_err), False


def _moment_1d(K: SmoothingKernel, k: int):
    if k % 2:
        return 0.0, 0.0
    if K.base == "cauchy_base" and k > 0:
        return math.inf, math.inf
    val, err = integrate.quad(lambda t: t**k * float(K.kappa(t)), 0, np.inf, limit=400)
    return 2 * val, 2 * err


def check_order(K: SmoothingKernel, r: int | None = None, tol: float = 1e-6) -> OrderReport:
    """Verify that ``K`` is a kernel of order ``r`` (default ``K.order``).

    Odd moments vanish exactly by symmetry. Quadrature failures and
    divergent absolute moments are recorded in the report, never raised.
    """
    r = K.order if r is None else r
    d = K.dim
    nonconverged = []
    m0, e0 = _moment_1d(K, 0)
    integral, integral_err = m0**d, d * e0
    one_d = {}
    for k in range(r):
        one_d[k] = _moment_1d(K, k)
    moments = {}
    for total in range(1, r):
        for a in _multi_indices(d, total):
            val, err = 1.0, 0.0
            for ai in a:
                v, e = one_d[ai]
                val, err = val * v, err + e
            if any(ai % 2 for ai in a):
                val, err = 0.0, 0.0
            moments[a] = (val, err)
            if err > tol:
                nonconverged.append(a)
    absm = {k: _abs_moment_1d(K, k)[0] for k in range(r + 1)}
    theta = {}
    divergent = False
    for a in _multi_indices(d, r):
        val = 1.0
        for ai in a:
            val *= absm[ai] / math.factorial(ai)
        theta[a] = val
        divergent |= not math.isfinite(val)
    vanishing_ok = abs(integral - 1.0) <= tol and all(
        abs(v) <= tol for v, _ in moments.values())
    passed = vanishing_ok and not divergent and not nonconverged
    return OrderReport(r, integral, integral_err, moments, theta, tol, divergent,
                       nonconverged, vanishing_ok, passed)


def kde_eval(K: SmoothingKernel, h: float, X, x):
    """``(P_n * K_h)(x) = (1 / (n h^d)) sum_i K((x - X_i) / h)``.

    ``x`` may be a single point (returns a float) or an ``(m, d)`` array.
    Values are not clipped, so order ``r > 2`` estimates can be negative.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    Xp = as_points(X)
    n, d = Xp.shape
    if d != K.dim:
        raise ValueError(f"kernel dimension {K.dim} does not match samples ({d})")
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = x.reshape(1, d) if single else x
    if pts.shape[1] != d:
        raise ValueError("query points have the wrong dimension")
    out = np.empty(pts.shape[0])
    block = max(1, 2_000_000 // max(n * d, 1))
    for s in range(0, pts.shape[0], block):
        U = (pts[s:s + block, None, :] - Xp[None, :, :]) / h
        # sorting first makes the sum independent of the row order
        out[s:s + block] = np.sort(K(U), axis=1).sum(axis=1)
    out /= n * h**d
    return float(out[0]) if single else out


def bandwidth_rule(n: int, s: int, d: int, mode: str = "l1_optimal",
                   constant: float = 1.0) -> float:
    """``C n^{-1/(2s+d)}`` (``l1_optimal``) or ``C (n/log n)^{-1/(2s+d)}`` (``sup_norm``)."""
    if n < 2:
        raise ValueError("bandwidth_rule needs n >= 2")
    if s < 1:
        raise ValueError("smoothness s must be at least 1")
    expo = -1.0 / (2 * s + d)
    if mode == "l1_optimal":
        return constant * n**expo
    if mode == "sup_norm":
        return constant * (n / math.log(n)) ** expo
    raise ValueError(f"unknown bandwidth mode {mode!r}")


def order_condition(r: int, s: float, d: int, warn: bool = True) -> bool:
    """``r > s + d/2``; a violation only warns."""
    ok = r > s + d / 2
    if not ok and warn:
        warnings.warn(f"kernel order {r} does not exceed s + d/2 = {s + d / 2}",
                      stacklevel=2)
    return ok
