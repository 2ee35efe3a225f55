import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtjsnn.constants import CONSTANTS
from mtjsnn.device import (InsufficientStatistics, InvalidGeometry, SwitchingCharacteristic,
                           calibrate_barrier, characterize_switching, dwell_intervals,
                           dwell_time_analysis, fit_sigmoid, hysteretic_states, logit,
                           retention_failure_probability, retention_time, sigmoid,
                           switching_trials)
from mtjsnn.llgs import DeviceParams, table1_device


@settings(max_examples=50, deadline=None)
@given(st.floats(-50e-6, 150e-6), st.floats(0.2e-6, 20e-6))
def test_fit_recovers_exact_logistic(i_bias, i_o):
    x = np.linspace(i_bias - 3 * i_o, i_bias + 3 * i_o, 13)
    b, o, r = fit_sigmoid(x, sigmoid((x - i_bias) / i_o))
    assert b == pytest.approx(i_bias, abs=1e-6 * i_o)
    assert o == pytest.approx(i_o, rel=1e-6)
    assert r < 1e-8


def test_fit_with_binomial_noise(rng):
    x = np.linspace(-3e-6, 3e-6, 13)
    p = rng.binomial(4000, sigmoid(x / 1e-6)) / 4000
    b, o, r = fit_sigmoid(x, p)
    assert abs(b) < 0.05e-6
    assert o == pytest.approx(1e-6, rel=0.05)
    assert r < 0.03


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.999))
def test_logit_inverts_sigmoid(p):
    assert sigmoid(logit(p)) == pytest.approx(p, rel=1e-12)


def test_sigmoid_is_stable_at_extremes():
    v = sigmoid(np.array([-1e4, 0.0, 1e4]))
    assert np.all(np.isfinite(v)) and v[0] == 0.0 and v[1] == 0.5 and v[2] == 1.0


def test_barrier_golden_values():
    # independent: Delta = mu0 Ms^2 V (N_yy - N_xx) / (2 kB T)
    c = CONSTANTS
    for k, frozen in [(1, 0.9807636019128854), (2, 1.9023077717308186), (10, 13.93636122572471),
                      (20, 19.781692372224303)]:
        p = table1_device(k)
        nxx, nyy, _ = p.demag_factors
        expect = c.mu0 * p.saturation_magnetization**2 * p.volume * (nyy - nxx) / (2 * c.kB * 300)
        assert calibrate_barrier(p) == pytest.approx(expect, rel=1e-13)
        assert calibrate_barrier(p) == pytest.approx(frozen, rel=1e-10)


def test_barrier_rejects_wrong_easy_axis():
    p = DeviceParams(25e-9, 10e-9, 1e-9, 8e5)  # width > length: easy axis along y
    with pytest.raises(InvalidGeometry):
        calibrate_barrier(p)


def test_retention_closed_forms():
    assert retention_time(0.0, 1e-9) == 1e-9
    assert retention_time(10.0, 1e-11) == pytest.approx(1e-11 * math.exp(10))
    assert retention_failure_probability(4.6, 1.0) == pytest.approx(0.010000, abs=2e-4)
    assert retention_failure_probability(4.6, 0.0) == 0.0
    assert retention_failure_probability(math.inf, 1.0) == 0.0
    with pytest.raises(ValueError):
        retention_failure_probability(1.0, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 30), st.floats(0, 30), st.floats(0.01, 100))
def test_retention_monotone(d1, d2, t):
    lo, hi = sorted((d1, d2))
    assert retention_failure_probability(hi, t) <= retention_failure_probability(lo, t) + 1e-15


def test_hysteretic_states_and_dwells():
    mx = np.array([0.9, 0.3, -0.3, -0.6, -0.2, 0.4, 0.7, 0.1, -0.7, -0.9, 0.8])
    s = hysteretic_states(mx)
    assert s.tolist() == [1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 1]
    dp, dap, n = dwell_intervals(s, 2.0)
    assert n == 4
    assert dp.tolist() == [4.0]
    assert dap.tolist() == [6.0, 4.0]


def test_switching_trials_shape_and_extremes():
    p = table1_device(10)
    out = switching_trials(p, 0.5e-9, [0.0, 1e-3], 40, seed=1, warmup=1e-9)
    assert out.shape == (2, 40)
    assert out[0].mean() == 0.0
    assert out[1].mean() == 1.0


def test_switching_trials_deterministic():
    p = table1_device(1)
    a = switching_trials(p, 0.5e-9, [2e-6, 4e-6], 50, seed=3, warmup=1e-9)
    b = switching_trials(p, 0.5e-9, [2e-6, 4e-6], 50, seed=3, warmup=1e-9)
    np.testing.assert_array_equal(a, b)


def test_characterize_requires_enough_trials():
    with pytest.raises(ValueError):
        characterize_switching(table1_device(1), 0.5e-9, [0, 1e-6, 2e-6, 3e-6, 4e-6], n_trials=50)


def test_characteristic_files_roundtrip(tmp_path):
    x = np.linspace(0, 10e-6, 7)
    ch = SwitchingCharacteristic(x, sigmoid((x - 5e-6) / 1e-6), 1000, 0.5e-9).with_fit()
    ch.write(tmp_path / "c.csv", tmp_path / "c.json", delta_kbt=13.9, device="10kBT")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "current_A,p_switch,n_trials"
    back = SwitchingCharacteristic.from_files(tmp_path / "c.csv", tmp_path / "c.json")
    np.testing.assert_array_equal(back.currents, ch.currents)
    np.testing.assert_array_equal(back.p_switch, ch.p_switch)
    assert back.i_bias == ch.i_bias and back.i_o == ch.i_o
    assert back.meta["device"] == "10kBT"


def test_dwell_analysis_needs_transitions():
    with pytest.raises(InsufficientStatistics):
        dwell_time_analysis(table1_device(20), 0.0, 20e-9, seed=0)


def test_dwell_analysis_on_superparamagnet():
    st_ = dwell_time_analysis(table1_device(1), 0.0, 2e-6, seed=4)
    assert st_.n_transitions > 50
    assert 0.3 < st_.p_occupancy < 0.7
    assert len(st_.dwell_samples) == len(st_.dwell_p) + len(st_.dwell_ap)
    assert st_.retention_time == pytest.approx(10e-12 * math.exp(st_.barrier_height))
