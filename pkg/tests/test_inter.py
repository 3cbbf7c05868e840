import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agchan.errors import DomainError, FitFailureError, InvalidArgumentError
from agchan.inter import (
    DELAY_INDEX_FIT,
    POWER_DELAY_FIT,
    DoubleExponentialFit,
    OccurrenceModel,
    cluster_count_stats,
    delay_from_index,
    fit_double_exponential,
    fit_occurrence,
    occurrence_probability,
    power_from_delay,
)


def test_delay_from_index_values():
    assert delay_from_index(1) == pytest.approx(29.3913, abs=1e-4)
    want = 29.38 * math.exp(0.183 * 5) + 0.0113 * math.exp(1.106 * 5)
    assert delay_from_index(6) == pytest.approx(want)
    assert want == pytest.approx(76.21, abs=0.01)
    with pytest.raises(InvalidArgumentError):
        delay_from_index(0)


def test_power_from_delay_values():
    assert power_from_delay(29.39) == pytest.approx(-13.79, abs=0.01)
    assert power_from_delay(76.21) == pytest.approx(-23.34, abs=0.01)
    with pytest.raises(DomainError):
        power_from_delay(0.0)
    with pytest.raises(DomainError):
        power_from_delay(551.0)
    # evaluated outside the domain, the fit is unphysical
    assert POWER_DELAY_FIT(0.0) == pytest.approx(77.6, abs=0.01)


def test_monotone_over_domain():
    d = [delay_from_index(k) for k in range(1, 15)]
    assert np.all(np.diff(d) > 0)
    tau = np.linspace(25, 550, 2000)
    f = POWER_DELAY_FIT
    deriv = f.a1 * f.b1 * np.exp(f.b1 * tau) + f.a2 * f.b2 * np.exp(f.b2 * tau)
    assert np.all(deriv < 0)
    assert np.all(np.diff(f(tau)) < 0)


def test_fit_recovers_delay_index_coefficients():
    x = np.arange(10.0)
    y = DELAY_INDEX_FIT(x)
    start = DoubleExponentialFit(25.0, 0.2, 0.02, 1.0)
    fit = fit_double_exponential(x, y, start)
    got = sorted([(fit.a1, fit.b1), (fit.a2, fit.b2)], key=lambda t: t[1])
    np.testing.assert_allclose(got[0], (29.38, 0.183), rtol=0.01)
    np.testing.assert_allclose(got[1], (0.0113, 1.106), rtol=0.01)
    assert fit.rmse < 1e-6


def test_fit_fixed_point_power_delay():
    x = np.linspace(25, 550, 12)
    fit = fit_double_exponential(x, POWER_DELAY_FIT(x), POWER_DELAY_FIT)
    assert fit.rmse < 1e-6


def test_fit_single_exponential_nested():
    x = np.linspace(0, 5, 12)
    y = 3.0 * np.exp(-0.4 * x)
    fit = fit_double_exponential(x, y, DoubleExponentialFit(2.0, -0.3, 0.01, 0.1))
    assert fit.rmse < 1e-6
    # either term may carry the exponential; the other must vanish
    assert min(abs(fit.a1), abs(fit.a2)) < 1e-4


def test_fit_preconditions():
    with pytest.raises(InvalidArgumentError):
        fit_double_exponential([0, 1, 1, 2, 3, 4], np.ones(6))
    with pytest.raises(InvalidArgumentError):
        fit_double_exponential(np.arange(5.0), np.ones(5))


def test_fit_failure_carries_best():
    x = np.arange(8.0)
    with pytest.raises(FitFailureError) as e:
        fit_double_exponential(x, np.exp(x) * np.cos(7 * x), max_nfev=3)
    assert e.value.best is not None


def test_occurrence_values():
    m = OccurrenceModel()
    assert occurrence_probability(4, m) == 1.0
    assert occurrence_probability(10, m) == pytest.approx(0.211)
    assert occurrence_probability(12, m) == 0.0
    assert m.zero_crossing == pytest.approx(11.83, abs=0.005)
    assert m.max_index == 11


@given(st.integers(1, 40))
def test_occurrence_non_increasing(k):
    m = OccurrenceModel()
    p = occurrence_probability(k, m)
    assert 0.0 <= p <= 1.0
    assert occurrence_probability(k + 1, m) <= p
    if k <= 4:
        assert p == 1.0


def test_fit_occurrence_exact():
    n = 1000
    probs = np.array([OccurrenceModel().probability(k) for k in range(1, 12)])
    m = fit_occurrence(probs * n, n)
    assert m.slope == pytest.approx(-0.115, rel=1e-9)
    assert m.intercept == pytest.approx(1.361, rel=1e-9)
    assert m.knee == 4


def test_fit_occurrence_monte_carlo():
    rng = np.random.default_rng(9)
    n = 10_000
    p = np.array([OccurrenceModel().probability(k) for k in range(1, 12)])
    counts = rng.binomial(n, p)
    m = fit_occurrence(counts, n)
    assert m.slope == pytest.approx(-0.115, rel=0.10)


def test_fit_occurrence_degenerate_and_errors():
    m = fit_occurrence([50] * 10, 50)
    assert m.degenerate and m.knee == 10
    assert occurrence_probability(10, m) == 1.0
    with pytest.raises(InvalidArgumentError):
        fit_occurrence([5] * 8, 5)


def test_occurrence_dict_round_trip():
    m = OccurrenceModel()
    assert OccurrenceModel.from_dict(m.to_dict()) == m


@pytest.mark.parametrize("mu,sigma", [(5.19, 1.46), (6.61, 2.07)])
def test_cluster_count_refit(mu, sigma):
    k = np.round(np.random.default_rng(1).normal(mu, sigma, 10_000))
    s = cluster_count_stats(k)
    assert s.mu == pytest.approx(mu, rel=0.05)
    assert not s.degenerate


def test_cluster_count_constant():
    s = cluster_count_stats([5] * 20)
    assert s.degenerate and s.sigma == 0.0 and s.mu == 5.0
    with pytest.raises(InvalidArgumentError):
        cluster_count_stats([5, 6, 7])


def test_double_exponential_dict_round_trip():
    f = DELAY_INDEX_FIT
    assert DoubleExponentialFit.from_dict(f.to_dict()).coefficients == f.coefficients
