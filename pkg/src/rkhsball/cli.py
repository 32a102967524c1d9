"""Command-line interface: ``rkhsball <subcommand> ...``.

Exit status is 0 on success, 2 on bad input and 3 when the result carries
a numerical-failure flag.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .adaptive import LepskiConfig, lepski_bandwidth
from .distances import kx_distance, smoothed_cross_gauss, sup_mmd
from .distributions import DistributionSpec, standard_normal
from .inference import two_sample_test
from .kernels import KernelFamily
from .optimize import OptimizerConfig
from .samples import load_csv
from .smoothing import build_order_kernel, kde_eval
from .theory_checks import chaos_scaling, concentration_check, massart_check

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputError(f"no such file: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from e


def _read_samples(path):
    try:
        return load_csv(path)
    except FileNotFoundError as e:
        raise InputError(f"no such file: {path}") from e


def _family(path, dim):
    if path is None:
        return KernelFamily.gaussian(1.0, dim)
    fam = KernelFamily.from_spec(_read_json(path))
    if fam.dim != dim:
        raise InputError(f"family has dim {fam.dim} but samples have dim {dim}")
    return fam


def _parse_grid(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise InputError(f"grid must be lo:hi:step, got {text!r}") from e
    if step <= 0 or hi < lo:
        raise InputError("grid needs lo <= hi and step > 0")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def _numeric_failure(d: dict) -> bool:
    diag = d.get("diagnostics") or {}
    if diag.get("budget_exhausted") or diag.get("nonconverged"):
        return True
    for key in ("value", "statistic", "h"):
        v = d.get(key)
        if isinstance(v, float) and not math.isfinite(v):
            return True
    return False


# -- subcommands --------------------------------------------------------------------

def _cmd_dist(a):
    X, Y = _read_samples(a.x), _read_samples(a.y)
    if X.dim != Y.dim:
        raise InputError("samples have different dimensions")
    fam = _family(a.family, X.dim)
    cfg = OptimizerConfig()
    if a.metric == "kx":
        if a.h or a.g:
            raise InputError("--h/--g apply to the fh metric only")
        return kx_distance(fam, X, Y, cfg).to_dict()
    h, g = a.h or 0.0, a.g or 0.0
    if h == 0 and g == 0:
        return sup_mmd(fam, X, Y, cfg).to_dict()
    if fam.family != "gaussian":
        raise InputError("smoothed fh distances between two samples need the gaussian family")
    K = build_order_kernel(a.order, X.dim)
    lo, hi = fam.domain
    return smoothed_cross_gauss(X, h, Y, g, hi, cfg, kernel=K, sigma_min=lo).to_dict()


def _cmd_kde(a):
    S = _read_samples(a.samples)
    if S.dim != 1:
        raise InputError("--grid evaluation is one-dimensional")
    if a.h <= 0:
        raise InputError("--h must be positive")
    K = build_order_kernel(a.order, 1)
    grid = _parse_grid(a.grid)
    vals = np.atleast_1d(kde_eval(K, a.h, S, grid[:, None]))
    return {"kernel": K.to_spec(), "h": a.h, "grid": grid.tolist(), "values": vals.tolist()}


def _cmd_lepski(a):
    S = _read_samples(a.samples)
    fam = _family(a.family, S.dim)
    if a.A == "auto":
        A = "auto"
    else:
        try:
            A = float(a.A)
        except ValueError as e:
            raise InputError("--A must be 'auto' or a number") from e
    K = build_order_kernel(a.order, S.dim)
    cfg = LepskiConfig(rho=a.rho, A=A, order=a.order, seed=a.seed)
    return lepski_bandwidth(S, K, fam, cfg).to_dict()


def _cmd_twosample(a):
    X, Y = _read_samples(a.x), _read_samples(a.y)
    fam = _family(a.family, X.dim) if a.family else None
    return two_sample_test(X, Y, a.h, a.g, fam, B=a.perms, alpha=a.alpha, seed=a.seed).to_dict()


def _spec_from(conf, dim=1):
    return DistributionSpec.from_dict(conf["distribution"]) if "distribution" in conf \
        else standard_normal(dim)


def _cmd_check(a):
    conf = _read_json(a.config)
    if a.kind == "massart":
        if "sets" in conf:
            A = conf["sets"]
        else:
            rnd = conf.get("random", {})
            rng = np.random.default_rng(rnd.get("seed", 0))
            l = int(rnd.get("l", 10))
            A = rng.standard_normal((int(rnd.get("size", 32)), l * (l - 1) // 2))
        return massart_check(A, conf.get("theta", 0.5), conf.get("n_eps", 4000),
                             conf.get("seed", 0)).to_dict()
    fam = KernelFamily.from_spec(conf.get("family", {"family": "gaussian", "domain": [0, 1]}))
    spec = _spec_from(conf, fam.dim)
    if a.kind == "chaos":
        return chaos_scaling(fam, spec, conf.get("n_list", [50, 100, 200, 400, 800]),
                             conf.get("grid_size", 16), conf.get("n_eps", 1000),
                             conf.get("seed", 0)).to_dict()
    return concentration_check(fam, spec, int(conf.get("n", 500)), float(conf.get("tau", 1.0)),
                               int(conf.get("trials", 200)), int(conf.get("seed", 0)),
                               int(conf.get("grid_size", 32))).to_dict()


def _n_list(text):
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as e:
        raise InputError(f"--n-list must be comma-separated integers, got {text!r}") from e


def _write_csv(report, path):
    if path:
        Path(path).write_text(report.tidy_csv(), encoding="utf-8")


def _cmd_rates(a):
    if a.config:
        cfg = harness.RateConfig.from_dict(_read_json(a.config))
    else:
        cfg = harness.preset_config(a.preset, a.quantity, reps=a.reps, n_list=_n_list(a.n_list),
                                    seed=a.seed)
    rep = harness.rate_experiment(cfg)
    _write_csv(rep, a.csv)
    return rep.to_dict()


def _cmd_clt(a):
    conf = _read_json(a.config) if a.config else {}
    cfg = harness.CLTConfig.from_dict(conf)
    over = {k: v for k, v in (("reps", a.reps), ("n_list", _n_list(a.n_list)),
                               ("seed", a.seed)) if v is not None}
    if over:
        cfg = harness.CLTConfig.from_dict({**cfg.to_dict(), **over})
    rep = harness.clt_spread_experiment(cfg)
    _write_csv(rep, a.csv)
    return rep.to_dict()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rkhsball", description="RKHS-ball distances, KDE and related checks.")
    p.add_argument("--out", help="write JSON here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("dist", help="distance between two samples")
    d.add_argument("--metric", choices=("fh", "kx"), default="fh")
    d.add_argument("--family", help="kernel family JSON")
    d.add_argument("--x", required=True)
    d.add_argument("--y", required=True)
    d.add_argument("--h", type=float)
    d.add_argument("--g", type=float)
    d.add_argument("--order", type=int, default=2)
    d.set_defaults(func=_cmd_dist)

    k = sub.add_parser("kde", help="evaluate a kernel density estimate on a grid")
    k.add_argument("--samples", required=True)
    k.add_argument("--order", type=int, default=2)
    k.add_argument("--h", type=float, required=True)
    k.add_argument("--grid", required=True, help="lo:hi:step")
    k.set_defaults(func=_cmd_kde)

    le = sub.add_parser("lepski", help="adaptive bandwidth selection")
    le.add_argument("--samples", required=True)
    le.add_argument("--order", type=int, default=2)
    le.add_argument("--rho", type=float, default=1.3)
    le.add_argument("--A", default="auto")
    le.add_argument("--family")
    le.add_argument("--seed", type=int, default=0)
    le.set_defaults(func=_cmd_lepski)

    t = sub.add_parser("twosample", help="permutation two-sample test")
    t.add_argument("--x", required=True)
    t.add_argument("--y", required=True)
    t.add_argument("--h", type=float)
    t.add_argument("--g", type=float)
    t.add_argument("--perms", type=int, default=199)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--family")
    t.set_defaults(func=_cmd_twosample)

    c = sub.add_parser("check", help="empirical bound checks")
    c.add_argument("kind", choices=("chaos", "massart", "concentration"))
    c.add_argument("--config", required=True)
    c.set_defaults(func=_cmd_check)

    r = sub.add_parser("rates", help="rate experiment")
    r.add_argument("--quantity", choices=harness.QUANTITIES, default="emp_fh")
    r.add_argument("--preset", choices=sorted(harness.PRESETS), default="d1")
    r.add_argument("--config", help="RateConfig JSON (overrides --preset)")
    r.add_argument("--reps", type=int)
    r.add_argument("--n-list")
    r.add_argument("--seed", type=int)
    r.add_argument("--csv", help="also write tidy n,mean,stderr CSV")
    r.set_defaults(func=_cmd_rates)

    s = sub.add_parser("clt", help="CLT-spread experiment")
    s.add_argument("--config")
    s.add_argument("--reps", type=int)
    s.add_argument("--n-list")
    s.add_argument("--seed", type=int)
    s.add_argument("--csv")
    s.set_defaults(func=_cmd_clt)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_INPUT
    try:
        result = args.func(args)
    except (InputError, ValueError, KeyError, TypeError) as e:
        print(f"rkhsball: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    text = json.dumps(result, sort_keys=True, default=_json_default)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_NUMERIC if _numeric_failure(result) else EXIT_OK


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def main() -> None:
    sys.exit(run_cli())
