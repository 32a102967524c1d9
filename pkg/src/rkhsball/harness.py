"""Reproducible rate and CLT-spread experiments."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .adaptive import LepskiConfig, l1_risk, lepski_bandwidth
from .distances import population_distance, smoothed_empirical_gauss
from .distributions import DistributionSpec, sample_distribution, standard_normal
from .kernels import KernelFamily
from .optimize import OptimizerConfig
from .smoothing import bandwidth_rule, build_order_kernel, order_condition

SCHEMA_VERSION = 1
QUANTITIES = ("emp_fh", "kde_fh", "kde_l1", "smoothed_gap")


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, compact separators)."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def rep_seed(master: int, i_n: int, rep: int) -> int:
    """Seed of replication ``rep`` at the ``i_n``-th sample size."""
    return int(np.random.SeedSequence([master, i_n, rep]).generate_state(1)[0])


def loglog_slope(ns, means, level: float = 0.95):
    """OLS slope of ``log mean`` on ``log n`` with its standard error and CI."""
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(means, float))
    res = stats.linregress(x, y)
    tq = stats.t.ppf(0.5 + level / 2, len(x) - 2) if len(x) > 2 else math.inf
    return float(res.slope), float(res.stderr), (float(res.slope - tq * res.stderr),
                                                 float(res.slope + tq * res.stderr))


@dataclass
class ExperimentReport:
    """Sweep values, per-point mean and stderr, and the fitted log-log slope."""

    quantity: str
    n_values: list
    means: list
    stderrs: list
    slope: float | None
    slope_stderr: float | None
    slope_ci: tuple | None
    config_hash: str
    config: dict
    extra: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def tidy_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "mean", "stderr"])
        for n, m, s in zip(self.n_values, self.means, self.stderrs):
            w.writerow([n, repr(float(m)), repr(float(s))])
        return buf.getvalue()


@dataclass(frozen=True)
class RateConfig:
    """Configuration of :func:`rate_experiment`.

    ``bandwidth`` is ``"rule"`` (``h_constant * n^{-1/(2s+d)}``) or
    ``"lepski"``; it is ignored for ``emp_fh``.
    """

    quantity: str
    spec: DistributionSpec = field(default_factory=standard_normal)
    family: dict = field(default_factory=lambda: {"family": "gaussian", "domain": [0, 1.0],
                                                  "dim": 1})
    n_list: tuple = (50, 100, 200, 400, 800, 1600, 3200)
    reps: int = 30
    bandwidth: str = "rule"
    order: int = 2
    s: int = 1
    h_constant: float = 1.0
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    lepski: LepskiConfig = field(default_factory=LepskiConfig)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "quantity": self.quantity,
                "spec": self.spec.to_dict(), "family": self.family,
                "n_list": list(self.n_list), "reps": self.reps, "bandwidth": self.bandwidth,
                "order": self.order, "s": self.s, "h_constant": self.h_constant,
                "seed": self.seed, "optimizer": self.optimizer.to_dict(),
                "lepski": self.lepski.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RateConfig":
        d = dict(d)
        d.pop("schema_version", None)
        if "spec" in d:
            d["spec"] = DistributionSpec.from_dict(d["spec"])
        if "n_list" in d:
            d["n_list"] = tuple(int(v) for v in d["n_list"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        if "lepski" in d:
            lep = dict(d["lepski"])
            if "optimizer" in lep:
                lep["optimizer"] = OptimizerConfig(**lep["optimizer"])
            d["lepski"] = LepskiConfig(**lep)
        return cls(**d)


def _check_sweep(n_list, reps, min_reps=20):
    ns = np.asarray(n_list, dtype=float)
    if len(ns) < 5:
        raise ValueError("n_list needs at least 5 points")
    ratios = ns[1:] / ns[:-1]
    if np.any(ratios <= 1) or np.ptp(np.log(ratios)) > 0.1 * np.mean(np.log(ratios)):
        raise ValueError("n_list must be geometric")
    if reps < min_reps:
        raise ValueError(f"use at least {min_reps} replications")


def _measure(cfg: RateConfig, X, n, fam: KernelFamily, K):
    d = cfg.spec.dim
    lo, hi = fam.domain
    if cfg.quantity == "emp_fh":
        return population_distance(X, cfg.spec, a=hi, sigma_min=lo, cfg=cfg.optimizer,
                                   family=fam).value, None
    if cfg.bandwidth == "lepski":
        sel = lepski_bandwidth(X, K, fam, cfg.lepski)
        h = sel.h
        rec = sel.records[sel.grid.index(h)]
        info = {"h": h, "fallback": sel.fallback, "fh_value": rec.fh_value, "fh_cap": rec.fh_cap}
    else:
        h = cfg.h_constant * bandwidth_rule(n, cfg.s, d)
        info = {"h": h}
    if cfg.quantity == "kde_fh":
        return population_distance(X, cfg.spec, a=hi, h=h, kernel=K, sigma_min=lo,
                                   cfg=cfg.optimizer).value, info
    if cfg.quantity == "kde_l1":
        return l1_risk(X, K, h, cfg.spec), info
    if cfg.quantity == "smoothed_gap":
        est = smoothed_empirical_gauss(hi, h, X, cfg.optimizer, kernel=K, sigma_min=lo)
        return est.value, info
    raise ValueError(f"unknown quantity {cfg.quantity!r}")


def rate_experiment(cfg: RateConfig | dict) -> ExperimentReport:
    """Mean of the chosen quantity over ``reps`` samples at each ``n`` and its log-log slope.

    ``emp_fh`` is ``||P_n - P||``, ``kde_fh`` is ``||P_n * K_h - P||``
    (both in F_H, closed form), ``kde_l1`` is ``||P_n * K_h - p||_1`` and
    ``smoothed_gap`` is ``||P_n * K_h - P_n||`` in F_H, for which the
    sequence ``sqrt(n) * mean`` is reported as well.
    """
    if isinstance(cfg, dict):
        cfg = RateConfig.from_dict(cfg)
    if cfg.quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {cfg.quantity!r}")
    _check_sweep(cfg.n_list, cfg.reps)
    fam = KernelFamily.from_spec(cfg.family)
    if fam.dim != cfg.spec.dim:
        raise ValueError("family and distribution dimensions differ")
    K = None
    flags = []
    extra: dict = {}
    if cfg.quantity != "emp_fh":
        K = build_order_kernel(cfg.order, cfg.spec.dim)
        if not order_condition(cfg.order, cfg.s, cfg.spec.dim, warn=True):
            flags.append("order_condition_violated")
    means, ses, per_n_info = [], [], []
    for i_n, n in enumerate(cfg.n_list):
        vals, infos = [], []
        for rep in range(cfg.reps):
            X = sample_distribution(cfg.spec, n, rep_seed(cfg.seed, i_n, rep))
            v, info = _measure(cfg, X, n, fam, K)
            vals.append(v)
            infos.append(info)
        vals = np.asarray(vals)
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / math.sqrt(len(vals))))
        per_n_info.append(infos)
    slope = se = ci = None
    if all(m > 0 for m in means):
        slope, se, ci = loglog_slope(cfg.n_list, means)
    else:
        flags.append("nonpositive_mean")
    if cfg.quantity == "smoothed_gap":
        seq = [math.sqrt(n) * m for n, m in zip(cfg.n_list, means)]
        extra["sqrt_n_gap"] = seq
        extra["sqrt_n_gap_decreasing"] = bool(all(b < a for a, b in zip(seq, seq[1:])))
    if cfg.quantity != "emp_fh":
        extra["bandwidths"] = [[inf["h"] for inf in infos] for infos in per_n_info]
        if cfg.bandwidth == "lepski":
            extra["fallbacks"] = [sum(inf["fallback"] for inf in infos) for infos in per_n_info]
            extra["fallback_flags"] = [[inf["fallback"] for inf in infos] for infos in per_n_info]
            extra["fh_values"] = [[inf["fh_value"] for inf in infos] for infos in per_n_info]
            extra["fh_caps"] = [infos[0]["fh_cap"] for infos in per_n_info]
    conf = cfg.to_dict()
    return ExperimentReport(cfg.quantity, list(cfg.n_list), means, ses, slope, se, ci,
                            config_hash(conf), conf, extra, flags)


@dataclass(frozen=True)
class CLTConfig:
    spec: DistributionSpec = field(default_factory=standard_normal)
    family: dict = field(default_factory=lambda: {"family": "gaussian", "domain": [0, 1.0],
                                                  "dim": 1})
    n_list: tuple = (200, 800, 3200)
    reps: int = 500
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "spec": self.spec.to_dict(),
                "family": self.family, "n_list": list(self.n_list), "reps": self.reps,
                "seed": self.seed, "optimizer": self.optimizer.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CLTConfig":
        d = dict(d)
        d.pop("schema_version", None)
        if "spec" in d:
            d["spec"] = DistributionSpec.from_dict(d["spec"])
        if "n_list" in d:
            d["n_list"] = tuple(int(v) for v in d["n_list"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        return cls(**d)


def ks_critical(m: int, n: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((m + n) / (m * n))


def clt_spread_experiment(cfg: CLTConfig | dict) -> ExperimentReport:
    """Distribution of ``sqrt(n) ||P_n - P||_{F_H}`` across reps at each ``n``.

    Reports the two-sample KS distance between consecutive sample sizes and
    the 5% critical value; a single replication is flagged rather than
    rejected.
    """
    if isinstance(cfg, dict):
        cfg = CLTConfig.from_dict(cfg)
    fam = KernelFamily.from_spec(cfg.family)
    flags = []
    if cfg.reps < 2:
        flags.append("insufficient_replication")
    samples, means, ses = [], [], []
    for i_n, n in enumerate(cfg.n_list):
        vals = []
        for rep in range(cfg.reps):
            X = sample_distribution(cfg.spec, n, rep_seed(cfg.seed, i_n, rep))
            est = population_distance(X, cfg.spec, a=fam.domain[1], sigma_min=fam.domain[0],
                                      cfg=cfg.optimizer, family=fam)
            vals.append(math.sqrt(n) * est.value)
        vals = np.asarray(vals)
        samples.append(vals)
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan)
    ks, pvals = [], []
    if cfg.reps >= 2:
        for a, b in zip(samples, samples[1:]):
            if np.all(a == a[0]) and np.all(b == a[0]):
                ks.append(0.0)
                pvals.append(1.0)
                continue
            r = stats.ks_2samp(a, b)
            ks.append(float(r.statistic))
            pvals.append(float(r.pvalue))
    crit = ks_critical(cfg.reps, cfg.reps) if cfg.reps >= 2 else math.nan
    extra = {"ks": ks, "ks_pvalues": pvals, "ks_critical": crit,
             "ks_nonincreasing": bool(all(b <= a for a, b in zip(ks, ks[1:]))),
             "samples": [s.tolist() for s in samples]}
    slope = se = ci = None
    if len(cfg.n_list) >= 3 and all(m > 0 for m in means):
        slope, se, ci = loglog_slope(cfg.n_list, means)
    conf = cfg.to_dict()
    return ExperimentReport("clt_spread", list(cfg.n_list), means, ses, slope, se, ci,
                            config_hash(conf), conf, extra, flags)


def _family(dim, a=1.0):
    return {"family": "gaussian", "domain": [0, a], "dim": dim}


PRESETS = {
    "d1": {"spec": standard_normal(1), "family": _family(1),
           "n_list": (50, 100, 200, 400, 800, 1600, 3200), "reps": 30},
    "d3": {"spec": standard_normal(3), "family": _family(3),
           "n_list": (50, 100, 200, 400, 800, 1600, 3200), "reps": 30},
    "kde_d1": {"spec": standard_normal(1), "family": _family(1), "order": 4, "s": 1,
               "n_list": (100, 200, 400, 800, 1600, 3200), "reps": 30},
    "lepski_d1": {"spec": standard_normal(1), "family": _family(1), "bandwidth": "lepski",
                  "n_list": (250, 500, 1000, 2000, 4000, 8000), "reps": 20},
    "quick": {"spec": standard_normal(1), "family": _family(1),
              "n_list": (50, 100, 200, 400, 800), "reps": 20},
}


def preset_config(name: str, quantity: str, **overrides) -> RateConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return RateConfig(quantity=quantity, **kw)
