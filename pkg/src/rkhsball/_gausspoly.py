"""Exact algebra for functions of the form ``P(x) exp(-a x^2)`` on the line.

Convolving two such functions gives another one, so every kernel embedding
built from Gauss-polynomial smoothing kernels, Gaussian kernels and Gaussian
mixtures can be carried around exactly as a polynomial plus an exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermgauss


@dataclass(frozen=True)
class GaussPoly:
    """``f(x) = poly(x) * exp(-a x^2)`` with ``a > 0``.

    ``a = inf`` with ``poly = c`` encodes the point mass ``c * delta_0``; it
    only ever appears as an operand of :meth:`convolve`.
    """

    poly: Polynomial
    a: float

    @property
    def is_delta(self) -> bool:
        return math.isinf(self.a)

    def __call__(self, x):
        if self.is_delta:
            raise ValueError("a point mass has no pointwise values")
        x = np.asarray(x, dtype=float)
        return self.poly(x) * np.exp(-self.a * x * x)

    def scaled(self, c: float) -> "GaussPoly":
        return GaussPoly(self.poly * c, self.a)

    def convolve(self, other: "GaussPoly") -> "GaussPoly":
        """Exact convolution ``(self * other)(x) = int self(t) other(x - t) dt``."""
        if self.is_delta:
            return other.scaled(self.poly.coef[0])
        if other.is_delta:
            return self.scaled(other.poly.coef[0])
        a, b = self.a, other.a
        s = a + b
        # t = b x / s + z / sqrt(s) completes the square; the z-integral is a
        # Gauss-Hermite sum that is exact for the polynomial degree involved
        deg = self.poly.degree() + other.poly.degree()
        z, w = hermgauss(deg // 2 + 1)
        rs = math.sqrt(s)
        out = Polynomial([0.0])
        for zi, wi in zip(z, w):
            lp = Polynomial([zi / rs, b / s])
            lq = Polynomial([-zi / rs, a / s])
            out = out + wi * self.poly(lp) * other.poly(lq)
        return GaussPoly(_trim(out / rs), a * b / s)

    def integral(self) -> float:
        """``int f`` over the real line."""
        if self.is_delta:
            return float(self.poly.coef[0])
        total = 0.0
        for k, ck in enumerate(self.poly.coef):
            if k % 2 == 0:
                total += ck * math.gamma((k + 1) / 2) / self.a ** ((k + 1) / 2)
        return total

    @property
    def is_even(self) -> bool:
        c = self.poly.coef
        odd = c[1::2]
        return not np.any(odd) or np.max(np.abs(odd)) <= 1e-14 * np.max(np.abs(c))

    def radial_poly(self) -> Polynomial:
        """``Q`` with ``poly(x) = Q(x^2)``; requires an even polynomial."""
        if not self.is_even:
            raise ValueError("polynomial is not even")
        return Polynomial(self.poly.coef[0::2])


def _trim(p: Polynomial) -> Polynomial:
    c = np.asarray(p.coef, dtype=float)
    if len(c) > 1:
        scale = np.max(np.abs(c))
        # odd coefficients of symmetric operands are pure rounding noise
        c = np.where(np.abs(c) <= 1e-15 * scale, 0.0, c)
    return Polynomial(c)


def gaussian_psi(sigma: float) -> GaussPoly:
    """One coordinate of the Gaussian kernel ``exp(-sigma x^2)``."""
    return GaussPoly(Polynomial([1.0]), float(sigma))


def normal_density(var: float) -> GaussPoly:
    """Density of ``N(0, var)``; ``var = 0`` gives the point mass."""
    if var == 0:
        return GaussPoly(Polynomial([1.0]), math.inf)
    return GaussPoly(Polynomial([1.0 / math.sqrt(2 * math.pi * var)]), 1.0 / (2 * var))


def scaled_kernel(coeffs, h: float) -> GaussPoly:
    """``kappa_h(x) = kappa(x/h)/h`` for ``kappa(u) = sum_l c_l u^(2l) exp(-u^2)``."""
    if h == 0:
        return GaussPoly(Polynomial([1.0]), math.inf)
    c = np.zeros(2 * len(coeffs) - 1)
    for l, cl in enumerate(coeffs):
        c[2 * l] = cl / h ** (2 * l + 1)
    return GaussPoly(Polynomial(c), 1.0 / (h * h))


def convolve_all(*fs: GaussPoly) -> GaussPoly:
    out = fs[0]
    for f in fs[1:]:
        out = out.convolve(f)
    return out
