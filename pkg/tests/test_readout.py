import math

import numpy as np
import pytest

from mtjsnn.llgs import Trajectory, table1_device
from mtjsnn.readout import (ReadCircuitParams, apply_cmos_variation, apply_read_backaction,
                            async_transfer, filter_levels, mean_pulse_width, read_async_stream,
                            read_sync)


def test_read_sync_levels_and_retention_flips(rng):
    c = ReadCircuitParams()
    assert read_sync([0.9, 0, 0], c, 40.0, rng) == 1
    assert read_sync([-0.9, 0, 0], c, 40.0, rng) == 0
    flips = np.mean([read_sync([1.0, 0, 0], c, 0.0, rng) == 0 for _ in range(20000)])
    assert flips == pytest.approx(1 - math.exp(-1), abs=0.015)


def test_filter_suppresses_short_glitches():
    c = ReadCircuitParams(tau_rc=2.5e-9)
    raw = np.zeros(2000)
    raw[500:505] = 1  # 0.5 ns glitch at 0.1 ns sampling
    raw[1000:1400] = 1  # 40 ns pulse
    lv, _, _ = filter_levels(raw, 0.1e-9, c, y0=0.0, s0=0)
    assert lv[:900].max() == 0
    assert lv[1100:1400].min() == 1
    assert lv[-100:].max() == 0


def test_filter_is_resumable(rng):
    c = ReadCircuitParams(tau_rc=1e-9)
    raw = (rng.random(3000) < 0.5).astype(float)
    full, yf, sf = filter_levels(raw, 0.1e-9, c, y0=0.0, s0=0)
    a, y, s = filter_levels(raw[:1234], 0.1e-9, c, y0=0.0, s0=0)
    b, y2, s2 = filter_levels(raw[1234:], 0.1e-9, c, y0=y, s0=s)
    np.testing.assert_array_equal(np.concatenate([a, b]), full)
    assert y2 == pytest.approx(yf) and s2 == sf


def test_mean_pulse_width():
    lv = np.array([0, 1, 1, 1, 0, 0, 1, 0, 1, 1])
    assert mean_pulse_width(lv, 2.0) == pytest.approx(4.0)  # widths 3 and 1 samples
    assert math.isnan(mean_pulse_width(np.zeros(5), 1.0))
    assert math.isnan(mean_pulse_width(np.array([0, 1, 1]), 1.0))


def test_backaction_and_cmos():
    c = ReadCircuitParams(read_current=100e-9)
    assert apply_read_backaction(1e-6, c) == pytest.approx(1.1e-6)
    assert apply_read_backaction(1e-6, c, mode="sync") == 1e-6
    with pytest.raises(ValueError):
        apply_read_backaction(0.0, c, mode="other")
    v = ReadCircuitParams(sigma_level=2, offset_per_sigma=0.05)
    np.testing.assert_allclose(apply_cmos_variation(np.array([0.5, 0.95]), v), [0.6, 1.0])
    assert apply_cmos_variation(0.3, c) == 0.3


@pytest.mark.parametrize("kw", [dict(read_current=-1e-9), dict(read_time_sync=0.0),
                                dict(sigma_level=3), dict(tau_rc=0.0),
                                dict(inverter_threshold_offset=0.5),
                                dict(level_low=0.7, level_high=0.6)])
def test_circuit_validation(kw):
    with pytest.raises(ValueError):
        ReadCircuitParams(**kw)


def test_async_stream_from_trajectory():
    t = np.arange(400) * 0.1e-9
    mx = np.where((t > 10e-9) & (t < 30e-9), 1.0, -1.0)
    tr = Trajectory(t, np.column_stack([mx, np.zeros(400), np.zeros(400)]))
    st = read_async_stream(tr, ReadCircuitParams(tau_rc=1e-9))
    assert len(st) == 400
    assert st.levels[:100].max() == 0 and st.levels[200:300].min() == 1


def test_async_transfer_is_increasing():
    p = table1_device(1)
    out = async_transfer(p, [-3e-6, 0.0, 3e-6], ReadCircuitParams(), duration=0.5e-6, seed=2)
    assert out[0] < 0.25 < out[1] < 0.75 < out[2]
