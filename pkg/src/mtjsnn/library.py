"""Characterised neuron devices: the numbers the network engine needs, with provenance.

A library entry holds, for one device, the pulsed switching fit, and
either the synchronous-cycle fit (with reset) or the asynchronous inverter
transfer fit and mean pulse width.  ``build_library`` regenerates it from
the LLGS model; a copy for the four reference devices ships with the package.
"""
import json
from importlib import resources

import numpy as np

from .device import auto_characterize, calibrate_barrier, fit_sigmoid
from .llgs import table1_device
from .readout import (ReadCircuitParams, apply_read_backaction, async_transfer, calibrate_tau_rc, mean_pulse_width,
                      stream_from_mx, telegraph_mx)
from .snn import NeuronModel, ScheduleSync, device_spike_rate

RESET_MULTIPLE = 3.0
PULSE_TARGET = 8.2e-9
REFERENCE = (1, 2, 10, 20)


def sync_cycle_rates(params, currents, reset_current, *, n_neurons=400, n_cycles=10, seed=0,
                     burn_in=2, schedule=ScheduleSync(), circuit=None):
    """Steady-state spike rate of the repeated write / rest / read / reset cycle per write current.

    Unlike a single reset-and-write trial, the repeated cycle carries the
    history of the previous read: a neuron that fired enters the next write
    freshly reset.
    """
    probe = NeuronModel("sync", i_bias=0.0, i_o=1.0, bias_current=0.0, reset_current=reset_current,
                        delta=calibrate_barrier(params), schedule=schedule,
                        circuit=circuit or ReadCircuitParams(), hm_resistance=params.hm_resistance)
    return np.array([device_spike_rate(params, probe, cur, n_cycles, seed + 1000 * k, n_neurons,
                                       burn_in).mean() for k, cur in enumerate(currents)])


def sync_entry(params, fig4, *, n_trials=1000, seed=0, schedule=ScheduleSync(), dt=1e-12):
    """Switching fit of the full write / rest / read / reset cycle.

    A reset-and-write sweep locates the window; the fit itself uses the
    steady-state rates of the repeated cycle, which is what the network sees.
    """
    reset = -RESET_MULTIPLE * fig4.i_bias
    ch = auto_characterize(params, schedule.write, max(100, n_trials // 4), seed, reset_current=reset,
                           reset_width=schedule.reset, settle=schedule.rest, dt=dt,
                           start=(0.0, 2 * fig4.i_bias))
    grid = np.linspace(ch.i_bias - 3 * ch.i_o, ch.i_bias + 3 * ch.i_o, 13)
    rates = sync_cycle_rates(params, grid, reset, n_neurons=max(10, n_trials // 10), seed=seed + 1,
                             schedule=schedule)
    b, o, r = fit_sigmoid(grid, rates)
    return {"i_bias_A": b, "i_o_A": o, "residual": r, "reset_current_A": reset,
            "currents_A": grid.tolist(), "p_out": rates.tolist()}


def async_entry(params, circuit, *, duration=10e-6, seed=0, dt=1e-12):
    """Fit of the averaged inverter output versus write current, read current included."""
    scout = np.linspace(-4e-6, 4e-6, 9)
    p = async_transfer(params, scout, circuit, 2e-6, seed + 1, dt=dt)
    b, o, _ = fit_sigmoid(scout, p)
    grid = np.linspace(b - 3 * o, b + 3 * o, 13)
    p = async_transfer(params, grid, circuit, duration, seed, dt=dt)
    b, o, r = fit_sigmoid(grid, p)
    mx = telegraph_mx(params, [apply_read_backaction(0.0, circuit)] * 4, duration, seed + 2, dt=dt)
    width = mean_pulse_width([stream_from_mx(m, dt * 10, circuit) for m in mx], dt * 10)
    return {"i_bias_A": b, "i_o_A": o, "residual": r, "pulse_width_s": width,
            "currents_A": grid.tolist(), "p_out": p.tolist()}


def device_entry(params, circuit, *, mode=None, n_trials=1000, seed=0, dt=1e-12):
    """Library entry for one device; ``mode`` defaults by barrier height."""
    delta = calibrate_barrier(params)
    fig4 = auto_characterize(params, 0.5e-9, n_trials, seed, dt=dt)
    entry = {
        "delta_kbt": delta,
        "hm_resistance_ohm": params.hm_resistance,
        "mode": mode or ("async" if delta < 5 else "sync"),
        "pulsed": {"i_bias_A": fig4.i_bias, "i_o_A": fig4.i_o, "residual": fig4.fit_residual},
    }
    if entry["mode"] == "sync":
        entry["sync"] = sync_entry(params, fig4, n_trials=n_trials, seed=seed + 1, dt=dt)
    else:
        entry["async"] = async_entry(params, circuit, seed=seed + 2, dt=dt)
    return entry


def build_library(kbts=REFERENCE, *, n_trials=1000, seed=0, dt=1e-12, temperature=300.0,
                  tau_rc=None, circuit=None):
    """Characterise the reference devices.  ``tau_rc`` is calibrated on 1 kBT if not given."""
    circuit = circuit or ReadCircuitParams()
    if tau_rc is None:
        tau_rc = calibrate_tau_rc(table1_device(1, temperature=temperature), PULSE_TARGET, circuit,
                                  seed=seed, dt=dt)
    circuit = ReadCircuitParams(**{**circuit.__dict__, "tau_rc": tau_rc})
    lib = {"tau_rc_s": tau_rc, "temperature_K": temperature, "seed": seed, "n_trials": n_trials,
           "devices": {}}
    for k in kbts:
        params = table1_device(k, temperature=temperature)
        lib["devices"][params.name] = dict(device_entry(params, circuit, n_trials=n_trials,
                                                        seed=seed + 101 * k, dt=dt), preset=k)
    return lib


def load_library(path=None):
    if path is None or path == "bundled":
        ref = resources.files("mtjsnn") / "data" / "device_library.json"
        return json.loads(ref.read_text())
    with open(path) as fh:
        return json.load(fh)


def neuron_model(lib, name, mode=None, circuit=None, **overrides):
    """NeuronModel for device ``name`` from a library document."""
    try:
        e = lib["devices"][name]
    except KeyError:
        raise KeyError(f"device {name!r} not in library ({sorted(lib['devices'])})") from None
    mode = mode or e["mode"]
    circuit = circuit or ReadCircuitParams(tau_rc=lib["tau_rc_s"])
    common = dict(hm_resistance=e["hm_resistance_ohm"], delta=e["delta_kbt"], circuit=circuit,
                  name=name)
    if mode == "sync":
        if "sync" not in e:
            raise ValueError(f"{name} has no synchronous characterisation")
        s = e["sync"]
        kw = dict(i_bias=s["i_bias_A"], i_o=s["i_o_A"], reset_current=s["reset_current_A"])
    else:
        if "async" not in e:
            raise ValueError(f"{name} has no asynchronous characterisation")
        a = e["async"]
        kw = dict(i_bias=a["i_bias_A"], i_o=a["i_o_A"], pulse_width=a["pulse_width_s"])
    kw.update(common)
    kw.update(overrides)
    return NeuronModel(mode, **kw)
