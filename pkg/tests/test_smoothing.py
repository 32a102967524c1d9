import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from rkhsball import SmoothingKernel, bandwidth_rule, build_order_kernel, check_order, kde_eval
from rkhsball.smoothing import order_condition


def test_order2_gaussian_form():
    K = build_order_kernel(2, 1)
    assert K.poly_coeffs == ()
    u = np.linspace(-3, 3, 13)
    assert K.kappa(u) == pytest.approx(np.exp(-u * u) / math.sqrt(math.pi), rel=1e-15)
    m2 = integrate.quad(lambda t: t * t * K.kappa(t), -np.inf, np.inf)[0]
    assert m2 == pytest.approx(0.5, rel=1e-10)


def test_order2_cauchy_form():
    K = build_order_kernel(2, 1, "cauchy_base")
    u = np.array([0.0, 1.0, 3.0])
    assert K.kappa(u) == pytest.approx(1 / (math.pi * (1 + u * u)), rel=1e-15)


@pytest.mark.parametrize("r,coeffs", [(4, (1.5, -1.0)), (6, (1.875, -2.5, 0.5))])
def test_higher_order_coefficients(r, coeffs):
    # frozen from the Hankel system in exact rationals
    assert build_order_kernel(r).poly_coeffs == pytest.approx(coeffs, rel=1e-13)


@pytest.mark.parametrize("r", [4, 6, 8])
def test_moments_by_gauss_hermite(r):
    K = build_order_kernel(r)
    z, w = np.polynomial.hermite.hermgauss(40)
    p = np.polynomial.polynomial.polyval(z * z, K.poly_coeffs) / math.sqrt(math.pi)
    for j in range(r):
        assert np.sum(w * p * z**j) == pytest.approx(float(j == 0), abs=1e-12)
    assert abs(np.sum(w * p * z**r)) > 1e-3


@pytest.mark.parametrize("bad", [dict(r=3), dict(r=0), dict(r=4, base="cauchy_base"),
                                 dict(r=2, base="epanechnikov")])
def test_build_rejects(bad):
    with pytest.raises(ValueError):
        build_order_kernel(bad["r"], 1, bad.get("base", "gaussian_base"))


def test_check_order_gaussian_r2_theta():
    rep = check_order(build_order_kernel(2))
    assert rep.passed
    assert rep.theta[(2,)] == pytest.approx(0.25, rel=1e-8)
    assert rep.integral == pytest.approx(1.0, abs=1e-10)


def test_check_order_cauchy_divergent():
    rep = check_order(build_order_kernel(2, 1, "cauchy_base"))
    assert rep.divergent
    assert rep.theta[(2,)] == math.inf
    assert not rep.passed
    assert rep.integral == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("d", [1, 2])
def test_check_order_r4(d):
    rep = check_order(build_order_kernel(4, d))
    assert rep.passed
    assert rep.moments[(1,) + (0,) * (d - 1)][0] == 0.0
    assert rep.moments[(3,) + (0,) * (d - 1)][0] == 0.0
    assert all(math.isfinite(v) for v in rep.theta.values())
    assert "pass" in rep.summary()


def test_check_order_r6_as_order_8_fails():
    rep = check_order(build_order_kernel(6), r=8)
    assert not rep.vanishing_ok


def test_kde_single_point():
    K = build_order_kernel(2)
    assert kde_eval(K, 1.0, [[0.0]], [0.0]) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert kde_eval(K, 1.0, [[0.0]], [0.0]) == pytest.approx(0.564190, abs=1e-6)


@pytest.mark.parametrize("r", [2, 4])
def test_kde_far_tail(rng, r):
    K = build_order_kernel(r)
    X = rng.normal(size=(30, 1))
    h = 0.2
    x = X.max() + 10 * h + 1.0
    assert abs(kde_eval(K, h, X, [x])) < 1e-12


def test_kde_integrates_to_one_n100(rng):
    K = build_order_kernel(2)
    X = rng.normal(size=(100, 1))
    grid = np.linspace(-8, 8, 20001)
    v = kde_eval(K, 0.3, X, grid[:, None])
    assert integrate.trapezoid(v, grid) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 1.0), st.sampled_from([2, 4]),
       st.sampled_from([1, 2]))
def test_kde_mass_one(seed, h, r, d):
    K = build_order_kernel(r, d)
    X = np.random.default_rng(seed).normal(size=(15, d))
    lo, hi = X.min() - 8 * h, X.max() + 8 * h
    if d == 1:
        g = np.linspace(lo, hi, 4001)
        mass = integrate.trapezoid(kde_eval(K, h, X, g[:, None]), g)
    else:
        g = np.linspace(lo, hi, 401)
        G = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        v = kde_eval(K, h, X, G).reshape(len(g), len(g))
        mass = integrate.trapezoid(integrate.trapezoid(v, g, axis=1), g)
    assert mass == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_kde_order2_nonnegative(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(20, 1))
    x = r.uniform(-10, 10, size=(200, 1))
    assert np.all(kde_eval(build_order_kernel(2), 0.3, X, x) >= 0)


def test_kde_order4_can_be_negative():
    v = kde_eval(build_order_kernel(4), 0.5, [[0.0]], [[1.5]])
    assert v[0] < 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_kde_permutation_invariant(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(25, 2))
    x = r.normal(size=(10, 2))
    K = build_order_kernel(4, 2)
    perm = r.permutation(25)
    assert np.array_equal(kde_eval(K, 0.4, X, x), kde_eval(K, 0.4, X[perm], x))


def test_kde_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        kde_eval(build_order_kernel(2), 0.0, [[0.0]], [0.0])


def test_order4_bias_rate():
    # L1 bias of E[kde] = p * K_h against the standard normal density
    K = build_order_kernel(4)
    x = np.linspace(-9, 9, 3601)
    hs = np.array([0.15, 0.2, 0.27, 0.36, 0.48])
    bias = []
    for h in hs:
        conv = integrate.quad_vec(lambda u: stats.norm.pdf(x - h * u) * K.kappa(u), -12, 12,
                                  epsabs=1e-14, epsrel=1e-12)[0]
        bias.append(integrate.trapezoid(np.abs(conv - stats.norm.pdf(x)), x))
    slope = np.polyfit(np.log(hs), np.log(bias), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.4)


def test_bandwidth_rules():
    assert bandwidth_rule(1024, 1, 2) == pytest.approx(1024 ** -0.25, rel=1e-15)
    assert bandwidth_rule(1024, 1, 2) == pytest.approx(0.17678, abs=1e-5)
    n = math.e**2
    assert bandwidth_rule(n, 1, 1, "sup_norm") == pytest.approx((n / 2) ** (-1 / 3), rel=1e-14)
    assert bandwidth_rule(100, 1, 1, constant=2.0) == pytest.approx(2 * 100 ** (-1 / 3))
    with pytest.raises(ValueError):
        bandwidth_rule(1, 1, 1)
    with pytest.raises(ValueError):
        bandwidth_rule(10, 1, 1, "cv")


def test_order_condition():
    assert order_condition(4, 1, 1)
    with pytest.warns(UserWarning):
        assert not order_condition(2, 1, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not order_condition(2, 1, 2, warn=False)


def test_spec_roundtrip():
    K = build_order_kernel(4, 2)
    assert SmoothingKernel.from_spec(K.to_spec()) == K
    assert K.to_spec() == {"base": "gaussian_base", "order": 4, "dim": 2}
