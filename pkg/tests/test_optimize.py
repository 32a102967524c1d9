import math

import numpy as np
import pytest

from rkhsball.optimize import OptimizerConfig, maximize


def test_interior_peak():
    res = maximize(lambda x: -(math.log(x) - math.log(0.3)) ** 2, 1e-3, 10.0)
    assert res.x == pytest.approx(0.3, rel=1e-6)
    assert not res.exhausted
    d = res.diagnostics()
    assert d["bracket"][0] <= res.x <= d["bracket"][1]
    assert d["evaluations"] == res.evals


def test_monotone_picks_endpoint():
    res = maximize(lambda x: 2 - 2 * math.exp(-x), 1e-6, 1.0)
    assert res.x == 1.0
    assert res.value == pytest.approx(2 - 2 / math.e, rel=1e-15)


def test_never_below_grid_max():
    f = lambda x: math.sin(5 * math.log(x)) + 0.1 * math.log(x)
    cfg = OptimizerConfig(grid_size=64)
    res = maximize(f, 1e-2, 1e2, cfg)
    assert res.value >= max(res.grid_values)


def test_budget_flag():
    res = maximize(lambda x: -abs(math.log(x)), 1e-3, 1e3, OptimizerConfig(grid_size=16, max_evals=20))
    assert res.exhausted
    assert res.evals <= 20


def test_degenerate_interval():
    res = maximize(lambda x: x, 0.5, 0.5)
    assert res.x == 0.5 and res.evals == 1


@pytest.mark.parametrize("kw", [dict(grid_size=4), dict(tol=0.0), dict(max_evals=2)])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)
