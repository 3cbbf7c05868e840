import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agchan.core import MultipathComponent
from agchan.errors import DegenerateProfileError, InvalidArgumentError
from agchan.sage import EstimatorConfig, estimate_mpcs, sage, synthesize_cir_from_mpcs


def _mpc(t, a, i=0):
    return MultipathComponent.from_complex(t, a, i)


def test_empty_mpc_list_gives_zero_taps():
    h = synthesize_cir_from_mpcs([], n_taps=16)
    assert h.shape == (16,)
    assert not h.any()


def test_integer_tap_is_unit_sample():
    h = synthesize_cir_from_mpcs([_mpc(20.0, 1.0)], n_taps=32)
    expected = np.zeros(32)
    expected[10] = 1.0
    np.testing.assert_allclose(h, expected, atol=1e-15)


def test_delay_out_of_range():
    with pytest.raises(InvalidArgumentError):
        synthesize_cir_from_mpcs([_mpc(64.0, 1.0)], n_taps=32)


def test_single_pulse():
    h = synthesize_cir_from_mpcs([_mpc(100.0, 1.0)])
    out = estimate_mpcs(h)
    assert len(out) == 1
    assert abs(out[0].delay_ns - 100.0) < 0.25
    assert abs(out[0].magnitude - 1.0) < 0.01


def test_two_pulses_ten_ns_apart():
    h = synthesize_cir_from_mpcs([_mpc(100.0, 1.0), _mpc(110.0, 1.0)])
    out = estimate_mpcs(h)
    assert len(out) == 2
    assert abs(out[0].delay_ns - 100.0) < 0.25
    assert abs(out[1].delay_ns - 110.0) < 0.25


def test_weak_second_pulse_is_pruned():
    h = synthesize_cir_from_mpcs([_mpc(100.0, 1.0), _mpc(200.0, 10 ** (-40 / 20))])
    out = estimate_mpcs(h)
    assert len(out) == 1


def test_input_errors():
    with pytest.raises(DegenerateProfileError):
        estimate_mpcs(np.zeros(10))
    with pytest.raises(InvalidArgumentError):
        estimate_mpcs(np.array([1.0, np.nan]))
    with pytest.raises(InvalidArgumentError):
        estimate_mpcs(np.array([1.0]))


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        EstimatorConfig(max_paths=0)
    with pytest.raises(InvalidArgumentError):
        EstimatorConfig(delay_grid_oversampling=0)
    with pytest.raises(InvalidArgumentError):
        EstimatorConfig(convergence_tol=0.0)


def test_max_paths_cap_and_determinism():
    rng = np.random.default_rng(3)
    mpcs = [_mpc(float(t), complex(rng.normal(), rng.normal()), i) for i, t in enumerate(np.arange(20, 500, 20.5))]
    h = synthesize_cir_from_mpcs(mpcs)
    cfg = EstimatorConfig(max_paths=5)
    a = estimate_mpcs(h, cfg)
    b = estimate_mpcs(h, cfg)
    assert len(a) <= 5
    assert a == b
    assert [m.delay_ns for m in a] == sorted(m.delay_ns for m in a)


@st.composite
def separated_paths(draw):
    n = draw(st.integers(1, 5))
    slots = draw(st.lists(st.integers(0, 24), min_size=n, max_size=n, unique=True))
    jitter = draw(st.lists(st.floats(-3.0, 3.0), min_size=n, max_size=n))
    mags_db = draw(st.lists(st.floats(-20.0, 0.0), min_size=n, max_size=n))
    phases = draw(st.lists(st.floats(0.0, 6.28), min_size=n, max_size=n))
    out = []
    for i, (s, j, m, p) in enumerate(zip(slots, jitter, mags_db, phases)):
        out.append(MultipathComponent.from_power_db(20.0 + 20.0 * s + j, m, p, i))
    return sorted(out, key=lambda m: m.delay_ns)


@settings(max_examples=40, deadline=None)
@given(separated_paths())
def test_round_trip_property(paths):
    res = sage(synthesize_cir_from_mpcs(paths))
    hist = res.residual_history
    assert all(b <= a * (1 + 1e-12) + 1e-30 for a, b in zip(hist, hist[1:]))
    assert len(res.mpcs) == len(paths)
    for got, want in zip(res.mpcs, paths):
        assert abs(got.delay_ns - want.delay_ns) < 0.125
        assert abs(got.power_db - want.power_db) < 0.1
