import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkhsball import DistributionSpec, SampleSet, load_csv, sample_distribution, save_csv
from rkhsball import standard_normal


def test_points_are_read_only():
    S = SampleSet([1.0, 2.0])
    assert S.points.shape == (2, 1)
    with pytest.raises(ValueError):
        S.points[0, 0] = 5.0


@pytest.mark.parametrize("bad", [np.zeros((0, 2)), [[np.nan]], [[np.inf, 0.0]], np.zeros((2, 2, 2))])
def test_invalid_points(bad):
    with pytest.raises(ValueError):
        SampleSet(bad)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
              elements=st.floats(-1e300, 1e300, allow_nan=False, allow_subnormal=True)))
def test_csv_roundtrip_is_identity(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    save_csv(SampleSet(pts), path)
    back = load_csv(path)
    assert np.array_equal(back.points, pts)
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(
        f"x{j + 1}" for j in range(pts.shape[1]))


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "x1\n", "x1,x2\n1\n"])
def test_bad_csv(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        load_csv(p)


def test_point_mass_rows_equal_mean():
    spec = DistributionSpec("gaussian_mixture", (1.0,), ((2.5, -1.0),), ((0.0, 0.0),), 2)
    S = sample_distribution(spec, 100, 3)
    assert np.all(S.points == [2.5, -1.0])


def test_normal_mean_clt_width():
    S = sample_distribution(standard_normal(1), 10**6, 11)
    assert abs(S.points.mean()) < 3e-3


def test_degenerate_mixture_matches_first_component():
    one = DistributionSpec("gaussian_mixture", (1.0,), ((1.0,),), ((2.0,),), 1)
    two = DistributionSpec("gaussian_mixture", (1.0, 0.0), ((1.0,), (9.0,)), ((2.0,), (1.0,)), 1)
    assert np.array_equal(sample_distribution(one, 500, 7).points,
                          sample_distribution(two, 500, 7).points)


def test_deterministic_given_seed():
    spec = standard_normal(3)
    a, b = sample_distribution(spec, 50, 5), sample_distribution(spec, 50, 5)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, sample_distribution(spec, 50, 6).points)


@pytest.mark.parametrize("spec", [
    DistributionSpec("gaussian_mixture", (0.3, 0.7), ((-1.0, 0.0), (2.0, 1.0)),
                     ((0.5, 1.0), (1.5, 0.2)), 2),
    DistributionSpec("uniform", (0.5, 0.5), ((0.0,), (3.0,)), ((1.0,), (0.5,)), 1, s=0),
])
def test_moments_within_three_stderr(spec):
    X = sample_distribution(spec, 10**6, 2).points
    se = np.sqrt(spec.variance() / len(X))
    assert np.all(np.abs(X.mean(axis=0) - spec.mean()) < 3 * se)
    # variance of the sample variance needs the fourth moment; use a loose 1%
    assert X.var(axis=0) == pytest.approx(spec.variance(), rel=1e-2)


def test_pdf_integrates_to_one():
    from scipy import integrate
    spec = DistributionSpec("cauchy_mixture", (0.4, 0.6), ((0.0,), (2.0,)), ((1.0,), (0.3,)), 1)
    val, _ = integrate.quad(lambda x: spec.pdf(np.array([x]))[0], -np.inf, np.inf, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("kw", [
    dict(kind="beta", weights=(1.0,), means=((0.0,),), scales=((1.0,),), dim=1),
    dict(kind="gaussian_mixture", weights=(0.5,), means=((0.0,),), scales=((1.0,),), dim=1),
    dict(kind="gaussian_mixture", weights=(1.0,), means=((0.0,),), scales=((-1.0,),), dim=1),
    dict(kind="uniform", weights=(1.0,), means=((0.0,),), scales=((0.0,),), dim=1),
    dict(kind="gaussian_mixture", weights=(1.0,), means=((0.0, 1.0),), scales=((1.0,),), dim=2),
])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        DistributionSpec(**kw)


def test_spec_dict_roundtrip():
    spec = DistributionSpec("gaussian_mixture", (0.3, 0.7), ((-1.0,), (2.0,)), ((0.5,), (1.5,)), 1, s=3)
    assert DistributionSpec.from_dict(spec.to_dict()) == spec


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        sample_distribution(standard_normal(), 0, 1)
