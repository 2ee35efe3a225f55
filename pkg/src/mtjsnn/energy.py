"""Energy per classification: HM dissipation in neurons, crossbar dissipation, read circuitry."""
import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .snn import ScheduleSync


class TargetUnreached(RuntimeError):
    def __init__(self, target, best):
        self.target = target
        self.best = best
        super().__init__(f"accuracy target {target:.3f} not reached (best {best:.3f})")


@dataclass(frozen=True)
class ReadEnergyModel:
    """Calibrated constants of the CMOS read interface.

    ``sync_cycle`` is the energy of one gated read of one neuron;
    ``async_static`` the continuous power of an always-on inverter chain and
    ``async_toggle`` the energy of one output transition.  With the 4234
    neurons of the reference network the defaults give about 2.1 nJ per
    image for ten synchronous cycles and 3.3 nJ for 80 ns of asynchronous
    operation.
    """

    sync_cycle: float = 5e-14
    async_static: float = 9.1e-6
    async_toggle: float = 1.2e-14
    mtj_resistance: float = 0.0


@dataclass
class EnergyReport:
    neuron_j: float
    synapse_j: float
    read_j: float
    total_j: float
    mode: str
    device_delta: float
    time_to_target: float
    target_accuracy: float
    accuracy: float = float("nan")
    device: str = ""

    def __post_init__(self):
        parts = (self.neuron_j, self.synapse_j, self.read_j)
        if min(parts) < 0:
            raise ValueError("energy components must be non-negative")
        self.total_j = float(sum(parts))

    def to_json(self, path, **extra):
        d = asdict(self)
        d.update(extra)
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)


def neuron_energy(currents, hm_resistance, mode="sync", schedule=ScheduleSync(), tick=1e-9,
                  reset_current=0.0):
    """I^2 R dissipation in the HM layers.

    ``currents`` are total HM currents (drive plus bias) with shape
    (steps, neurons).  Sync: each step dissipates over the write window plus
    the reset pulse.  Async: current flows for the whole tick.
    """
    if hm_resistance <= 0:
        raise ValueError("hm_resistance must be positive")
    i = np.atleast_2d(np.asarray(currents, dtype=float))
    sq = np.sum(i * i)
    if mode == "sync":
        n_cycles, n = i.shape
        return hm_resistance * (sq * schedule.write + n_cycles * n * reset_current**2 * schedule.reset)
    return hm_resistance * sq * tick


def neuron_energy_from_record(current_sq, n_steps, n_neurons, hm_resistance, neuron):
    if neuron.mode == "sync":
        sch = neuron.schedule
        return hm_resistance * (current_sq * sch.write
                                + n_steps * n_neurons * neuron.reset_current**2 * sch.reset)
    return hm_resistance * current_sq * neuron.tick


def read_energy(mode, amount, model, n_neurons, toggles=0.0, read_current=100e-9,
                read_window=1e-9):
    """Read-path energy; ``amount`` is cycles (sync) or elapsed seconds (async)."""
    if amount < 0:
        raise ValueError("cycles / elapsed time must be non-negative")
    mtj = read_current**2 * model.mtj_resistance
    if mode == "sync":
        return amount * n_neurons * (model.sync_cycle + mtj * read_window)
    return n_neurons * amount * (model.async_static + mtj) + model.async_toggle * toggles


def cumulative_components(evaluation, neuron, n_neurons, model=ReadEnergyModel(), synapse_scale=1.0):
    """Per-image mean energy components accumulated up to every timestep."""
    rec = evaluation.record
    steps = np.arange(1, rec.n_steps + 1)
    cur_sq = np.cumsum(rec.current_sq.mean(axis=0))
    syn_p = np.cumsum(rec.synapse_power.mean(axis=0)) * synapse_scale
    tog = np.cumsum(rec.toggles.mean(axis=0))
    neuron_j = np.array([neuron_energy_from_record(c, s, n_neurons, neuron.hm_resistance, neuron)
                         for c, s in zip(cur_sq, steps)])
    if neuron.mode == "sync":
        synapse_j = syn_p * neuron.schedule.write
        read_j = np.array([read_energy("sync", s, model, n_neurons, read_current=neuron.circuit.read_current,
                                       read_window=neuron.schedule.read) for s in steps])
    else:
        synapse_j = syn_p * neuron.tick
        read_j = np.array([read_energy("async", s * neuron.tick, model, n_neurons, t,
                                       read_current=neuron.circuit.read_current)
                           for s, t in zip(steps, tog)])
    return neuron_j, synapse_j, read_j


def report(evaluation, neuron, n_neurons, target_accuracy=0.96, model=ReadEnergyModel(),
           device_delta=float("nan"), device=""):
    """Energy per classification up to the first timestep reaching ``target_accuracy``."""
    k = evaluation.first_reaching(target_accuracy)
    if k is None:
        raise TargetUnreached(target_accuracy, float(np.max(evaluation.accuracy)))
    nj, sj, rj = cumulative_components(evaluation, neuron, n_neurons, model)
    return EnergyReport(
        neuron_j=float(nj[k]),
        synapse_j=float(sj[k]),
        read_j=float(rj[k]),
        total_j=0.0,
        mode=neuron.mode,
        device_delta=float(device_delta),
        time_to_target=float(evaluation.times[k]),
        target_accuracy=float(target_accuracy),
        accuracy=float(evaluation.accuracy[k]),
        device=device,
    )


COMPARISON_HEADER = ["delta_kbt", "mode", "neuron_j", "synapse_j", "read_j", "total_j", "time_ns"]


def write_comparison(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARISON_HEADER)
        for r in reports:
            w.writerow([f"{r.device_delta:.6g}", r.mode, f"{r.neuron_j:.6e}", f"{r.synapse_j:.6e}",
                        f"{r.read_j:.6e}", f"{r.total_j:.6e}", f"{r.time_to_target * 1e9:.6g}"])
