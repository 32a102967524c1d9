import csv
import io
import json

import numpy as np
import pytest

from rkhsball import DistributionSpec, standard_normal
from rkhsball.harness import (CLTConfig, RateConfig, clt_spread_experiment, config_hash,
                              ks_critical, loglog_slope, preset_config, rate_experiment,
                              rep_seed)

QUICK_N = (50, 100, 200, 400, 800)
POINT = DistributionSpec("gaussian_mixture", (1.0,), ((0.3,),), ((0.0,),), 1)


def quick(quantity="emp_fh", **kw):
    return preset_config("quick", quantity, **kw)


def test_config_hash_canonical():
    a = {"b": 1, "a": [1, 2], "c": {"y": 0.5, "x": None}}
    b = {"c": {"x": None, "y": 0.5}, "a": [1, 2], "b": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "b": 2})


def test_rep_seed_distinct():
    seeds = {rep_seed(0, i, r) for i in range(5) for r in range(20)}
    assert len(seeds) == 100


def test_loglog_slope_exact_power():
    ns = np.array([10, 20, 40, 80, 160])
    slope, se, (lo, hi) = loglog_slope(ns, 3.0 * ns ** -0.5)
    assert slope == pytest.approx(-0.5)
    assert se == pytest.approx(0.0, abs=1e-7)
    assert lo <= slope <= hi


def test_report_hash_and_reproducibility():
    cfg = quick(reps=20)
    a, b = rate_experiment(cfg), rate_experiment(cfg)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert d["config_hash"] == config_hash(d["config"])
    assert d["schema_version"] == 1
    assert rate_experiment(RateConfig.from_dict(d["config"])).to_json() == a.to_json()
    assert a.slope_ci[0] <= a.slope <= a.slope_ci[1]


def test_tidy_csv():
    rep = rate_experiment(quick(reps=20))
    rows = list(csv.DictReader(io.StringIO(rep.tidy_csv())))
    assert [int(r["n"]) for r in rows] == list(QUICK_N)
    assert [float(r["mean"]) for r in rows] == rep.means
    assert [float(r["stderr"]) for r in rows] == rep.stderrs


@pytest.mark.parametrize("kw", [dict(n_list=(50, 100, 200, 400)),
                                dict(n_list=(50, 100, 150, 400, 800)),
                                dict(n_list=(800, 400, 200, 100, 50)),
                                dict(reps=19)])
def test_sweep_preconditions(kw):
    with pytest.raises(ValueError):
        rate_experiment(quick(**kw))


def test_unknown_quantity_and_preset():
    with pytest.raises(ValueError):
        rate_experiment(quick("bogus"))
    with pytest.raises(ValueError):
        preset_config("nope", "emp_fh")


def test_dimension_mismatch():
    cfg = quick(spec=standard_normal(2))
    with pytest.raises(ValueError):
        rate_experiment(cfg)


def test_point_mass_rate_is_zero():
    rep = rate_experiment(quick(spec=POINT))
    assert rep.means == [0.0] * 5
    assert rep.slope is None and rep.flags == ["nonpositive_mean"]


def test_smoothed_gap_reports_sequence():
    rep = rate_experiment(quick("smoothed_gap", order=4, reps=20))
    seq = rep.extra["sqrt_n_gap"]
    assert seq == pytest.approx([np.sqrt(n) * m for n, m in zip(QUICK_N, rep.means)])
    assert rep.extra["sqrt_n_gap_decreasing"] == all(b < a for a, b in zip(seq, seq[1:]))
    assert len(rep.extra["bandwidths"]) == 5


def test_order_condition_flag():
    with pytest.warns(UserWarning, match="order"):
        rep = rate_experiment(quick("kde_l1", order=2, s=2, reps=20))
    assert "order_condition_violated" in rep.flags


def test_kde_l1_rule_decreases():
    rep = rate_experiment(quick("kde_l1", reps=20))
    assert rep.slope < 0
    assert all(b < a for a, b in zip(rep.means, rep.means[1:]))


def test_clt_point_mass():
    rep = clt_spread_experiment(CLTConfig(spec=POINT, n_list=(50, 100), reps=5))
    assert all(v == 0.0 for s in rep.extra["samples"] for v in s)
    assert rep.extra["ks"] == [0.0]


def test_clt_single_rep_flag():
    rep = clt_spread_experiment(CLTConfig(n_list=(50, 100), reps=1))
    assert rep.flags == ["insufficient_replication"]
    assert rep.extra["ks"] == []


def test_clt_reproducible_and_hashed():
    cfg = CLTConfig(n_list=(50, 100, 200), reps=10, seed=7)
    a, b = clt_spread_experiment(cfg), clt_spread_experiment(cfg.to_dict())
    assert a.to_json() == b.to_json()
    assert a.config_hash == config_hash(cfg.to_dict())


def test_ks_critical_value():
    # c(0.05) = 1.358
    assert ks_critical(500, 500) == pytest.approx(1.3581 * np.sqrt(2 / 500), rel=1e-3)


def test_clt_spread_stable_between_800_and_3200():
    rep = clt_spread_experiment(CLTConfig(n_list=(800, 3200), reps=500, seed=1))
    assert rep.extra["ks"][0] <= rep.extra["ks_critical"]
