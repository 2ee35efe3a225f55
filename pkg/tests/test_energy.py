import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtjsnn.energy import (COMPARISON_HEADER, EnergyReport, ReadEnergyModel, TargetUnreached,
                           neuron_energy, read_energy, report, write_comparison)
from mtjsnn.mnist import bundled
from mtjsnn.network import bundled_network
from mtjsnn.snn import NeuronModel, ScheduleSync, build_hardware, evaluate


def test_neuron_energy_examples():
    assert neuron_energy(np.zeros((3, 4)), 400.0) == 0.0
    sch = ScheduleSync()
    # 10 uA through 1 kOhm for the 0.5 ns write window
    assert neuron_energy([[10e-6]], 1000.0, "sync", sch) == pytest.approx(5e-14, rel=1e-12)
    assert neuron_energy([[10e-6]], 1000.0, "async", tick=0.5e-9) == pytest.approx(5e-14, rel=1e-12)
    # the reset pulse adds I_r^2 R t_reset per neuron and cycle
    e = neuron_energy(np.zeros((2, 3)), 100.0, "sync", sch, reset_current=-20e-6)
    assert e == pytest.approx(6 * 100 * 4e-10 * 0.5e-9)
    with pytest.raises(ValueError):
        neuron_energy([[1e-6]], 0.0)


def test_read_energy_linearity():
    m = ReadEnergyModel()
    assert read_energy("sync", 0, m, 100) == 0.0
    assert read_energy("async", 0.0, m, 100) == 0.0
    a = read_energy("async", 50e-9, m, 100, toggles=10)
    b = read_energy("async", 100e-9, m, 100, toggles=20)
    assert b == pytest.approx(2 * a)
    assert read_energy("sync", 10, m, 100) == pytest.approx(10 * 100 * m.sync_cycle)
    with pytest.raises(ValueError):
        read_energy("sync", -1, m, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e-9), st.floats(0, 1e-9), st.floats(0, 1e-9))
def test_report_additivity(a, b, c):
    r = EnergyReport(a, b, c, 123.0, "sync", 10.0, 1e-8, 0.96)
    assert r.total_j == a + b + c


def test_report_rejects_negative():
    with pytest.raises(ValueError):
        EnergyReport(-1.0, 0, 0, 0, "sync", 1, 1, 0.9)


@pytest.fixture(scope="module")
def small_eval():
    net = bundled_network("lenet6-12")
    x, y = bundled("test")
    nm = NeuronModel("sync", 90e-6, 12.9e-6, reset_current=-210e-6)
    hw = build_hardware(net, nm)
    return evaluate(hw, x[:60], y[:60], 30 * 4e-9, seed=1), nm, net


def test_report_monotone_in_target(small_eval, tmp_path):
    ev, nm, net = small_eval
    lo = report(ev, nm, net.n_neurons, 0.5)
    hi = report(ev, nm, net.n_neurons, 0.85)
    assert hi.total_j >= lo.total_j
    assert hi.time_to_target >= lo.time_to_target
    assert lo.total_j == lo.neuron_j + lo.synapse_j + lo.read_j
    lo.to_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["mode"] == "sync"
    write_comparison(tmp_path / "c.csv", [lo, hi])
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == ",".join(COMPARISON_HEADER) == "delta_kbt,mode,neuron_j,synapse_j,read_j,total_j,time_ns"
    assert len(rows) == 3


def test_report_target_unreached(small_eval):
    ev, nm, net = small_eval
    with pytest.raises(TargetUnreached) as e:
        report(ev, nm, net.n_neurons, 1.01)
    assert e.value.best == pytest.approx(ev.accuracy.max())
