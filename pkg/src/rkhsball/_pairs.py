"""Double sums ``sum_{i,j} f(X_i - Y_j)`` over all ordered pairs.

Small problems keep the pairwise differences in memory. Large radial
problems (``f`` a function of ``t = |z|^2``) are reduced to per-bin Taylor
moments of ``t``, which makes each further evaluation cost ``O(bins)``
instead of ``O(n^2)``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy.spatial.distance import cdist

EXACT_LIMIT = 250_000
N_BINS = 4096
N_MOMENTS = 14
_ROW_BLOCK = 512
# Taylor tail ~ (a w/2)^K / K!; 1.5 keeps it below 1e-8 for K = 14
_MAX_STEP = 1.5


class PairSums:
    """Pair sums over ``X x X`` (``Y is None``) or ``X x Y``.

    Within one set the diagonal is included, so every sum is over ``n^2``
    ordered pairs and matches the V-statistic convention.
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray | None = None,
                 exact_limit: int = EXACT_LIMIT, n_bins: int = N_BINS,
                 n_moments: int = N_MOMENTS):
        X = np.ascontiguousarray(X, dtype=float)
        Y = None if Y is None else np.ascontiguousarray(Y, dtype=float)
        self._neg = False
        if Y is not None and (len(Y), Y.tobytes()) < (len(X), X.tobytes()):
            # canonical order: swapping the arguments gives bitwise equal sums
            X, Y, self._neg = Y, X, True
        self.X, self.Y = X, Y
        n = self.X.shape[0]
        self.within = Y is None
        self.count = n * n if self.within else n * self.Y.shape[0]
        n_pairs = n * (n - 1) // 2 if self.within else self.count
        self.exact = n_pairs <= exact_limit
        self._z = None
        self._t = None
        self._wt = None
        self._moments = None
        self.n_bins, self.n_moments = n_bins, n_moments
        if self.exact:
            self._build_exact()
        else:
            self._build_moments()

    # -- construction --------------------------------------------------
    def _blocks(self):
        """Yield ``(t, weight)`` blocks of squared distances."""
        X = self.X
        n = X.shape[0]
        for i0 in range(0, n, _ROW_BLOCK):
            i1 = min(i0 + _ROW_BLOCK, n)
            if self.within:
                D = cdist(X[i0:i1], X[i0:], "sqeuclidean")
                # keep j > i only
                mask = np.arange(i0, n)[None, :] > np.arange(i0, i1)[:, None]
                yield D[mask], 2.0
            else:
                yield cdist(X[i0:i1], self.Y, "sqeuclidean").ravel(), 1.0

    def _diff_blocks(self):
        X = self.X
        n = X.shape[0]
        for i0 in range(0, n, _ROW_BLOCK):
            i1 = min(i0 + _ROW_BLOCK, n)
            if self.within:
                iu = np.triu_indices(i1 - i0, k=1, m=n - i0)
                yield (X[i0:i1][iu[0]] - X[i0:][iu[1]]), 2.0
            else:
                Z = X[i0:i1, None, :] - self.Y[None, :, :]
                yield Z.reshape(-1, X.shape[1]), 1.0

    def _build_exact(self):
        ts, ws = [], []
        for t, w in self._blocks():
            ts.append(t)
            ws.append(np.full(t.shape, w))
        self._t = np.concatenate(ts) if ts else np.zeros(0)
        self._wt = np.concatenate(ws) if ws else np.zeros(0)

    def _build_moments(self):
        T = 0.0
        for t, _ in self._blocks():
            if t.size:
                T = max(T, float(t.max()))
        T = max(T, 1e-300)
        self.width = T / self.n_bins
        half = self.width / 2
        self.centers = (np.arange(self.n_bins) + 0.5) * self.width
        M = np.zeros((self.n_moments, self.n_bins))
        for t, w in self._blocks():
            b = np.minimum((t / self.width).astype(np.int64), self.n_bins - 1)
            u = (t - self.centers[b]) / half
            p = np.full(t.shape, w)
            for m in range(self.n_moments):
                M[m] += np.bincount(b, weights=p, minlength=self.n_bins)
                p = p * u
        self._moments = M

    @property
    def diag(self) -> int:
        return self.X.shape[0] if self.within else 0

    # -- evaluation ------------------------------------------------------
    def radial(self, Q: Polynomial, a: float) -> float:
        """``sum_{i,j} Q(t_ij) exp(-a t_ij)``."""
        Q = Q if isinstance(Q, Polynomial) else Polynomial(Q)
        diag = self.diag * Q(0.0)
        if self.exact:
            t = self._t
            return float(np.dot(self._wt, Q(t) * np.exp(-a * t))) + diag
        half = self.width / 2
        if a * half > _MAX_STEP:
            return self._radial_blocks(Q, a) + diag
        c = self.centers
        deg = Q.degree()
        K = self.n_moments
        # gamma_m h^m = e^{-ac} sum_j Q^(j)(c) h^j / j! * (-a h)^(m-j) / (m-j)!
        qj = np.empty((deg + 1, c.size))
        d = Q
        for j in range(deg + 1):
            qj[j] = d(c) * half**j / math.factorial(j)
            d = d.deriv()
        e = np.array([(-a * half) ** k / math.factorial(k) for k in range(K)])
        gam = np.zeros((K, c.size))
        for m in range(K):
            for j in range(min(m, deg) + 1):
                gam[m] += qj[j] * e[m - j]
        gam *= np.exp(-a * c)
        return float(np.sum(gam * self._moments)) + diag

    def _radial_blocks(self, Q, a):
        total = 0.0
        for t, w in self._blocks():
            total += w * float(np.sum(Q(t) * np.exp(-a * t)))
        return total

    def of_sq(self, fn) -> float:
        """``sum_{i,j} fn(t_ij)`` for a vectorised ``fn`` of squared distance."""
        d0 = self.diag * float(fn(np.zeros(1))[0])
        if self.exact:
            return float(np.dot(self._wt, fn(self._t))) + d0
        return sum(w * float(np.sum(fn(t))) for t, w in self._blocks()) + d0

    def of_diff(self, fn, even: bool = False) -> float:
        """``sum_{i,j} fn(X_i - Y_j)`` for ``fn`` mapping ``(N, d)`` rows to ``(N,)``.

        Within one set only ``i < j`` differences are stored, so ``fn`` is
        symmetrised unless the caller declares it ``even``.
        """
        if self._neg:
            fn = (lambda f: lambda z: f(-z))(fn)
        if self.within and not even:
            fn = (lambda f: lambda z: 0.5 * (f(z) + f(-z)))(fn)
        d0 = self.diag * float(fn(np.zeros((1, self.X.shape[1])))[0])
        if self.exact:
            if self._z is None:
                zs = [z for z, _ in self._diff_blocks()]
                self._z = np.concatenate(zs) if zs else np.zeros((0, self.X.shape[1]))
            return float(np.dot(self._wt, fn(self._z))) + d0
        return sum(w * float(np.sum(fn(z))) for z, w in self._diff_blocks()) + d0

    def product(self, P: Polynomial, a: float) -> float:
        """``sum_{i,j} prod_k P(z_k) exp(-a |z|^2)`` with ``z = X_i - Y_j``."""
        even = not np.any(P.coef[1::2])
        return self.of_diff(lambda z: np.prod(P(z), axis=1) * np.exp(-a * np.sum(z * z, axis=1)),
                            even=even)
