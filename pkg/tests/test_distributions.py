import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from agchan.distributions import (
    DistributionFit,
    fit_distribution,
    frozen,
    ks_critical_value,
    ks_statistic,
    select_best_fit,
)
from agchan.errors import DegenerateSampleError, InvalidArgumentError

N = 10_000


@pytest.mark.parametrize(
    "family,params,sampler",
    [
        ("normal", (-8.68, 5.09), lambda r: r.normal(-8.68, 5.09, N)),
        ("weibull", (0.55, 1.21), lambda r: 0.55 * r.weibull(1.21, N)),
        ("lognormal", (1.87, 0.88), lambda r: np.exp(r.normal(1.87, 0.88, N))),
        ("weibull", (25.75, 1.46), lambda r: 25.75 * r.weibull(1.46, N)),
        ("weibull", (7.11, 1.47), lambda r: 7.11 * r.weibull(1.47, N)),
        ("laplace", (0.0, 9.243), lambda r: r.laplace(0.0, 9.243, N)),
    ],
)
def test_refit_table_values(family, params, sampler):
    f = fit_distribution(sampler(np.random.default_rng(17)), family)
    for got, want in zip(f.params, params):
        if want == 0.0:
            assert abs(got) < 0.05 * params[1]
        else:
            assert got == pytest.approx(want, rel=0.05)
    assert f.ks_pass


def test_errors():
    with pytest.raises(DegenerateSampleError):
        fit_distribution([2.0] * 10, "normal")
    with pytest.raises(InvalidArgumentError):
        fit_distribution([-1.0, 2, 3, 4, 5, 6, 7, 8], "weibull")
    with pytest.raises(InvalidArgumentError):
        fit_distribution(np.arange(1, 10.0), "cauchy")
    with pytest.raises(InvalidArgumentError):
        select_best_fit(np.arange(1, 8.0))


def test_best_fit_self_consistency():
    r = np.random.default_rng(2)
    assert select_best_fit(r.laplace(0, 3, 5000)).family == "laplace"
    assert select_best_fit(r.normal(-4, 2, 5000)).family == "normal"


def test_best_fit_skips_positive_families_for_signed_data():
    f = select_best_fit(np.random.default_rng(0).normal(0, 1, 200))
    assert f.family in ("normal", "laplace")


def test_ks_critical_value_matches_scipy():
    # asymptotic Kolmogorov quantile: P(sqrt(n) D > c) = alpha
    c = ks_critical_value(1000) * math.sqrt(1000)
    assert stats.kstwobign.sf(c) == pytest.approx(0.05, rel=1e-9)


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(1).normal(size=50)
    assert ks_statistic(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic)


@pytest.mark.parametrize("family,params", [
    ("weibull", (2.0, 1.5)), ("normal", (1, 2)), ("lognormal", (0.5, 0.3)), ("laplace", (1, 2)),
    ("exponential", (3.0,)), ("rayleigh", (2.0,)), ("rician", (2.0, 1.0)),
])
def test_frozen_conventions(family, params):
    f = DistributionFit(family, params)
    d = frozen(family, params)
    assert f.mean() == pytest.approx(d.mean())
    if family == "weibull":
        assert d.mean() == pytest.approx(params[0] * math.gamma(1 + 1 / params[1]))
    if family == "lognormal":
        assert d.mean() == pytest.approx(math.exp(params[0] + params[1] ** 2 / 2))


def test_fit_round_trip_dict():
    f = fit_distribution(np.random.default_rng(4).normal(size=100), "normal")
    assert DistributionFit.from_dict(f.to_dict()) == f


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 20), st.floats(0.1, 10))
def test_normal_fit_affine_equivariant(shift, scale, factor):
    x = np.random.default_rng(0).normal(shift, scale, 50)
    a = fit_distribution(x, "normal")
    b = fit_distribution(x * factor + 1.0, "normal")
    assert b.params[0] == pytest.approx(a.params[0] * factor + 1.0, abs=1e-9 * (1 + abs(shift) * factor))
    assert b.params[1] == pytest.approx(a.params[1] * factor, rel=1e-9)
    assert b.ks_statistic == pytest.approx(a.ks_statistic, abs=1e-9)


def test_ks_against_own_ecdf_is_zero():
    x = np.random.default_rng(8).normal(size=40)
    x = np.concatenate([x, x[:5]])
    assert ks_statistic(x, stats.ecdf(x).cdf.evaluate) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=8, max_size=60))
def test_ks_matches_scipy_for_continuous_cdf(xs):
    c = stats.norm(3, 20).cdf
    assert ks_statistic(xs, c) == pytest.approx(stats.kstest(xs, c).statistic, abs=1e-12)
