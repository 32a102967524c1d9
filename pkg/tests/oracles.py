"""Reference evaluations of the smoothed-distance integrand by plain quadrature.

For a sample ``X`` the squared distance at a fixed parameter is the pair
average of ``K_h*K_h*psi + psi - 2 K_h*psi`` over all differences
``X_i - X_j``. Nothing here uses the closed forms of the package.
"""

import math

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline


def _pair_diffs(X):
    X = np.asarray(X, dtype=float).ravel()
    return (X[:, None] - X[None, :]).ravel()


def gauss_objective(X, h, sigma, steps_per_h=40, span=14.0):
    """Gaussian family, ``K = pi^{-1/2} exp(-u^2)``: tabulate both convolutions."""
    z = _pair_diffs(X)
    L = np.abs(z).max() + 2 * span * h + 1.0
    dx = h / steps_per_h
    t = np.arange(-span * h, span * h + dx / 2, dx)
    kh = np.exp(-(t / h) ** 2) / (math.sqrt(math.pi) * h)
    y = np.arange(-L, L + dx / 2, dx)
    psi = np.exp(-sigma * y * y)
    # trapezoid in t: interior weight dx, the kernel is ~0 at the ends
    g1 = np.convolve(psi, kh * dx, mode="same")
    g2 = np.convolve(g1, kh * dx, mode="same")
    keep = np.abs(y) <= L - 2 * span * h
    f1 = CubicSpline(y[keep], g1[keep])
    f2 = CubicSpline(y[keep], g2[keep])
    vals = f2(z) + np.exp(-sigma * z * z) - 2 * f1(z)
    return float(vals.mean())


def cauchy_objective(X, h, alpha):
    """Product-Cauchy family, ``K = 1/(pi(1+u^2))``, via ``u = tan(theta)``."""
    z = _pair_diffs(X)
    zu, inv = np.unique(z, return_inverse=True)
    phi = lambda y: alpha**2 / (alpha**2 + y * y)
    half = math.pi / 2

    def g1(y):
        return integrate.quad_vec(lambda th: phi(y - h * math.tan(th)), -half, half,
                                  epsabs=1e-14, epsrel=1e-12)[0] / math.pi

    # g1 is smooth in w = arctan(y / s), including the 1/y^2 tails; tabulate it there
    s = max(alpha, h)
    w = np.linspace(-half, half, 4001)[1:-1]
    tab = g1(s * np.tan(w))
    w = np.r_[-half, w, half]
    spline = CubicSpline(w, np.r_[0.0, tab, 0.0])

    def g2(y):
        f = lambda th: spline(np.arctan((y - h * math.tan(th)) / s))
        return integrate.quad_vec(f, -half, half, epsabs=1e-13, epsrel=1e-11)[0] / math.pi

    vals = g2(zu) + phi(zu) - 2 * g1(zu)
    return float(vals[inv].mean())
