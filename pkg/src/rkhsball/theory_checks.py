"""Monte-Carlo audits of Rademacher-chaos and concentration bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .distances import population_distance
from .distributions import DistributionSpec, sample_distribution
from .kernels import KernelFamily, farthest_point_order, gram_matrix, log_grid, rho_matrix
from .optimize import OptimizerConfig
from .samples import as_points


@dataclass
class BoundReport:
    """Empirical left-hand side against a bound.

    ``rhs`` is the bound (for data-dependent bounds, its mean over trials);
    ``violation_fraction`` is the share of trials with ``lhs > rhs``.
    """

    lhs_mean: float
    lhs_stderr: float
    lhs_quantiles: dict
    rhs: float
    violation_fraction: float
    passed: bool
    config: dict
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.violation_fraction <= 1.0:
            raise ValueError("violation fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lhs_quantiles"] = {str(k): v for k, v in self.lhs_quantiles.items()}
        return d


def _quantiles(x) -> dict:
    x = np.asarray(x, dtype=float)
    return {q: float(np.quantile(x, q)) for q in (0.5, 0.9, 0.99)} | {"max": float(x.max())}


# -- Rademacher chaos -----------------------------------------------------------

def _chaos_values(grams, E: np.ndarray) -> np.ndarray:
    """``sup_k |sum_{i<j} e_i e_j G_k[i, j]|`` for each column of ``E``."""
    best = np.zeros(E.shape[1])
    for G in grams:
        q = (np.sum(E * (G @ E), axis=0) - np.trace(G)) / 2.0
        best = np.maximum(best, np.abs(q))
    return best


def chaos_sup(family: KernelFamily, param_grid, X, n_eps: int = 1000, seed: int = 0,
              return_stderr: bool = False, batch: int = 500):
    """Monte-Carlo estimate of ``E sup_k |sum_{i<j} e_i e_j k(X_i, X_j)|``.

    The supremum runs over ``param_grid``. Uses
    ``sum_{i<j} e_i e_j G_ij = (e^T G e - tr G) / 2``.
    """
    if n_eps < 100:
        raise ValueError("use at least 100 sign vectors")
    Xp = as_points(X)
    grams = [gram_matrix(family.point(p), Xp) for p in param_grid]
    rng = np.random.default_rng(seed)
    vals = []
    done = 0
    while done < n_eps:
        b = min(batch, n_eps - done)
        E = rng.choice(np.array([-1.0, 1.0]), size=(len(Xp), b))
        vals.append(_chaos_values(grams, E))
        done += b
    vals = np.concatenate(vals)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    return (mean, se) if return_stderr else mean


def chaos_scaling(family: KernelFamily, spec: DistributionSpec, n_list, grid_size: int = 16,
                  n_eps: int = 1000, seed: int = 0, target: float = 1.0,
                  tol: float = 0.15) -> BoundReport:
    """Log-log slope of :func:`chaos_sup` against ``n``; passes when within ``tol`` of ``target``."""
    ns = [int(n) for n in n_list]
    if len(ns) < 2:
        raise ValueError("need at least two sample sizes")
    grid = log_grid(family, grid_size)
    vals, ses = [], []
    for i, n in enumerate(ns):
        X = sample_distribution(spec, n, _trial_seed(seed, i))
        m, se = chaos_sup(family, grid, X, n_eps, _trial_seed(seed + 1, i), return_stderr=True)
        vals.append(m)
        ses.append(se)
    slope = float(np.polyfit(np.log(ns), np.log(vals), 1)[0])
    ok = abs(slope - target) <= tol
    cfg = {"family": family.to_spec(), "distribution": spec.to_dict(), "n_list": ns,
           "grid_size": grid_size, "n_eps": n_eps, "seed": seed}
    return BoundReport(vals[-1], ses[-1], _quantiles(vals), target, float(not ok), bool(ok),
                       cfg, {"n_list": ns, "values": vals, "stderrs": ses, "slope": slope,
                             "tol": tol})


def _all_signs(l: int) -> np.ndarray:
    """All sign vectors with ``e_1 = +1`` (the chaos is even in ``e``)."""
    rest = np.array(list(itertools.product([-1.0, 1.0], repeat=l - 1))) if l > 1 else np.zeros((1, 0))
    return np.hstack([np.ones((len(rest), 1)), rest]).T


def exact_chaos_expectation(mats) -> float:
    """``E sup_a |sum_{i<j} e_i e_j a_ij|`` by enumerating all sign vectors.

    Only the strict upper triangle of each matrix is read.
    """
    l = mats[0].shape[0]
    E = _all_signs(l)
    ups = [np.triu(M, 1) for M in mats]
    return float(np.mean(_chaos_values([U + U.T for U in ups], E)))


# -- Massart-type bound -----------------------------------------------------------

def _as_upper_mats(A_set) -> list[np.ndarray]:
    A = np.asarray(A_set, dtype=float)
    if A.ndim == 3:
        return [np.triu(a, 1) for a in A]
    if A.ndim != 2:
        raise ValueError("A_set must be (|A|, l(l-1)/2) vectors or (|A|, l, l) matrices")
    k = A.shape[1]
    l = int(round((1 + math.sqrt(1 + 8 * k)) / 2))
    if l * (l - 1) // 2 != k:
        raise ValueError(f"vector length {k} is not l(l-1)/2")
    iu = np.triu_indices(l, k=1)
    out = []
    for a in A:
        M = np.zeros((l, l))
        M[iu] = a
        out.append(M)
    return out


def massart_bounds(R: float, size: int, theta: float) -> tuple[float, float]:
    """``(eR/theta) log(|A|/(1-theta))`` and ``eR (1 + sqrt(log |A|))^2``."""
    b_theta = math.e * R / theta * math.log(size / (1 - theta))
    b_opt = math.e * R * (1 + math.sqrt(math.log(size))) ** 2
    return b_theta, b_opt


def massart_check(A_set, theta: float = 0.5, n_eps: int = 4000, seed: int = 0,
                  exhaustive: bool | None = None) -> BoundReport:
    """Compare ``E sup_{a in A} |sum_{i<j} e_i e_j a_ij|`` with both Massart-type bounds.

    With ``l <= 16`` signs the expectation is computed exactly by enumeration
    (stderr 0); otherwise by Monte Carlo.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    mats = _as_upper_mats(A_set)
    l = mats[0].shape[0]
    R = max(float(np.sqrt(np.sum(M * M))) for M in mats)
    exhaustive = l <= 16 if exhaustive is None else exhaustive
    sym = [M + M.T for M in mats]
    if exhaustive:
        vals = _chaos_values(sym, _all_signs(l))
        se = 0.0
    else:
        rng = np.random.default_rng(seed)
        E = rng.choice(np.array([-1.0, 1.0]), size=(l, n_eps))
        vals = _chaos_values(sym, E)
        se = float(vals.std(ddof=1) / math.sqrt(n_eps))
    lhs = float(vals.mean())
    b_theta, b_opt = massart_bounds(R, len(mats), theta)
    ok_theta = lhs <= b_theta + 3 * se
    ok_opt = lhs <= b_opt + 3 * se
    cfg = {"size": len(mats), "l": l, "theta": theta, "n_eps": n_eps, "seed": seed,
           "exhaustive": exhaustive}
    return BoundReport(lhs, se, _quantiles(vals), b_opt, float(not ok_opt),
                       bool(ok_theta and ok_opt), cfg,
                       {"R": R, "rhs_theta": b_theta, "rhs_optimal": b_opt,
                        "pass_theta": bool(ok_theta), "pass_optimal": bool(ok_opt)})


# -- covering numbers and the concentration bound ------------------------------------

class EntropyProfile:
    """``eps -> N(eps)`` from a farthest-point traversal of a parameter grid.

    Below the smallest positive covering radius ``r_min`` the profile is
    extended as ``N(r_min) r_min / eps``, the one-parameter scaling of the
    covering number of these families.
    """

    def __init__(self, radii):
        r = np.asarray(radii, dtype=float)
        self.radii = r
        pos = r[r > 0]
        self.r_min = float(pos.min()) if len(pos) else 0.0
        self.n0 = self.size(self.r_min) if self.r_min > 0 else 1

    def size(self, eps: float) -> float:
        if self.r_min > 0 and eps < self.r_min:
            return self.n0 * self.r_min / eps
        hit = np.nonzero(self.radii <= eps)[0]
        return float(hit[0] + 1) if len(hit) else float(len(self.radii))

    def breakpoints(self) -> np.ndarray:
        return np.unique(self.radii[self.radii > 0])

    def integral(self, kind: str, lo: float, hi: float) -> float:
        """``int_lo^hi f(N(eps)) d eps`` for ``f = log(2N)`` (``"log2N"``) or
        ``f = (1 + sqrt(log N))^2`` (``"chain"``), exactly on both pieces."""
        if hi <= lo:
            return 0.0
        f = _ENTROPY_FNS[kind]
        total = 0.0
        if self.r_min > 0 and lo < self.r_min:
            b = min(hi, self.r_min)
            total += _tail_integral(kind, self.n0 * self.r_min, lo, b)
            lo = b
        if hi > lo:
            cuts = np.concatenate([[lo], [c for c in self.breakpoints() if lo < c < hi], [hi]])
            for a, b in zip(cuts[:-1], cuts[1:]):
                total += f(self.size(0.5 * (a + b))) * (b - a)
        return total


_ENTROPY_FNS = {
    "log2N": lambda N: math.log(2.0 * N),
    "chain": lambda N: (1.0 + math.sqrt(max(math.log(N), 0.0))) ** 2,
}


def _tail_integral(kind: str, C: float, a: float, b: float) -> float:
    """``int_a^b f(C / eps) d eps`` in closed form (``C / eps >= 1`` on the range)."""
    # int log(c / eps) d eps = eps (log c - log eps + 1)
    ilog = lambda c, e: e * (math.log(c) - math.log(e) + 1.0)
    if kind == "log2N":
        return ilog(2 * C, b) - ilog(2 * C, a)
    # substitute eps = C e^{-u} in the sqrt(log) term: C * int sqrt(u) e^{-u} du
    ua, ub = math.log(C / a), math.log(C / b)
    isqrt = C * special.gamma(1.5) * (special.gammaincc(1.5, ub) - special.gammaincc(1.5, ua))
    return (b - a) + 2.0 * isqrt + ilog(C, b) - ilog(C, a)


def concentration_rhs(profile: EntropyProfile, n: int, tau: float, nu: float = 1.0) -> dict:
    """Right-hand side of the high-probability bound on ``||P_n - P||_{F_H}``.

    ``4 sqrt(2) sqrt(inf_alpha {alpha + (4e/n) int_alpha^{2 nu} log(2 N(eps)) d eps})
    + 3 sqrt(2 nu) (sqrt(2) + sqrt(tau)) / sqrt(n)``.
    """
    top = 2.0 * nu
    cands = list(profile.breakpoints()) + list(np.geomspace(1e-12, top, 200))
    if profile.r_min > 0:
        # stationary point of the extrapolated tail: log(2 N(alpha)) = n / (4e)
        a_star = 2.0 * profile.n0 * profile.r_min * math.exp(-n / (4 * math.e))
        if a_star > 0:
            cands.append(a_star)
    best = (math.inf, None)
    for a in cands:
        if not 0 < a <= top:
            continue
        F = a + 4 * math.e / n * profile.integral("log2N", a, top)
        if F < best[0]:
            best = (F, a)
    entropy = 4 * math.sqrt(2) * math.sqrt(best[0])
    tail = 3 * math.sqrt(2 * nu) * (math.sqrt(2) + math.sqrt(tau)) / math.sqrt(n)
    return {"rhs": entropy + tail, "entropy_term": entropy, "tail_term": tail,
            "alpha": best[1]}


def chaining_rhs(profile: EntropyProfile, n: int, diameter: float, sup_rho0: float) -> float:
    """Chaining bound on ``E sup |sum_{i<j} e_i e_j k(X_i, X_j)|`` with explicit constants."""
    best = math.inf
    cands = list(profile.breakpoints()) + list(np.geomspace(1e-12, max(diameter, 1e-12), 200))
    for a in cands:
        if not 0 < a <= diameter:
            continue
        best = min(best, a + 3 * math.e / n * profile.integral("chain", a, diameter))
    if not math.isfinite(best):
        best = 0.0
    return 2 * math.sqrt(2) * n**2 * best + n / math.sqrt(2) * sup_rho0


def _trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, trial]).generate_state(1)[0])


def concentration_trials(family: KernelFamily, spec: DistributionSpec, n: int, trials: int,
                         seed: int = 0, grid_size: int = 32,
                         cfg: OptimizerConfig | None = None) -> list[dict]:
    """Per-trial ``||P_n - P||_{F_H}`` and entropy profile (shared across ``tau``)."""
    if n < 2:
        raise ValueError("need n >= 2 for the data-dependent pseudo-metric")
    grid = log_grid(family, grid_size)
    out = []
    for t in range(trials):
        X = sample_distribution(spec, n, _trial_seed(seed, t))
        if family.family == "gaussian":
            lhs = population_distance(X, spec, a=family.domain[1], cfg=cfg,
                                      sigma_min=family.domain[0]).value
        else:
            lhs = population_distance(X, spec, family=family, cfg=cfg, seed=seed + t).value
        D = rho_matrix(family, grid, X)
        fp = farthest_point_order(family, grid, X, D)
        out.append({"lhs": lhs, "profile": EntropyProfile(fp.radii)})
    return out


def concentration_check(family: KernelFamily, dist_spec: DistributionSpec, n: int,
                        tau: float, trials: int = 200, seed: int = 0,
                        grid_size: int = 32, cfg: OptimizerConfig | None = None,
                        _trials=None) -> BoundReport:
    """Violation frequency of the concentration bound for ``||P_n - P||_{F_H}``.

    Passes when the fraction of trials with ``lhs > rhs(tau)`` is at most
    ``2 e^{-tau}`` plus three binomial standard errors.
    """
    if trials < 200:
        raise ValueError("use at least 200 trials")
    if n < 2:
        raise ValueError("need n >= 2 for the data-dependent pseudo-metric")
    data = _trials or concentration_trials(family, dist_spec, n, trials, seed, grid_size, cfg)
    lhs = np.array([d["lhs"] for d in data])
    rhs = np.array([concentration_rhs(d["profile"], n, tau)["rhs"] for d in data])
    viol = float(np.mean(lhs > rhs))
    p0 = min(2 * math.exp(-tau), 1.0)
    slack = 3 * math.sqrt(p0 * (1 - p0) / len(lhs))
    cfg_d = {"family": family.to_spec(), "distribution": dist_spec.to_dict(), "n": n,
             "tau": tau, "trials": len(lhs), "seed": seed, "grid_size": grid_size}
    return BoundReport(float(lhs.mean()), float(lhs.std(ddof=1) / math.sqrt(len(lhs))),
                       _quantiles(lhs), float(rhs.mean()), viol, bool(viol <= p0 + slack),
                       cfg_d, {"allowed": p0 + slack, "rhs_min": float(rhs.min())})


def concentration_sweep(family: KernelFamily, dist_spec: DistributionSpec, n: int, taus,
                        trials: int = 200, seed: int = 0, grid_size: int = 32,
                        cfg: OptimizerConfig | None = None) -> dict:
    """:func:`concentration_check` for several ``tau`` on the same trials."""
    data = concentration_trials(family, dist_spec, n, trials, seed, grid_size, cfg)
    return {tau: concentration_check(family, dist_spec, n, tau, trials, seed, grid_size, cfg,
                                     _trials=data) for tau in taus}
