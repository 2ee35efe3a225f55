"""Stochastic spiking inference on MTJ neurons driven by resistive crossbars.

Behavioural neurons follow the fitted logistic characteristic of their device.

* synchronous: one 4 ns write/rest/read/reset cycle per timestep; each
  neuron is an independent Bernoulli draw per cycle, biased to p = 0.5 by a
  current source; every layer is latched, so layer ``l`` at cycle ``t`` sees
  the outputs of layer ``l-1`` from cycle ``t-1``;
* asynchronous: every neuron is a two-state telegraph process observed on a
  1 ns tick.  Its stationary P occupancy follows the fitted logistic and its
  mean pulse width is the device's mean inverter pulse width.  Downstream
  currents follow upstream outputs within the same tick.

Input pixels are rate coded as Bernoulli spikes each timestep.  Every image
gets its own random stream derived from ``(seed, image index)``, so results
do not depend on batching or on the number of worker processes.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .crossbar import G_O_DEFAULT, column_currents, configure, program, synapse_energy
from .device import hysteretic_states, sigmoid
from .llgs import Ensemble
from .readout import ReadCircuitParams, filter_levels, read_sync

MODES = ("sync", "async")


@dataclass(frozen=True)
class ScheduleSync:
    write: float = 0.5e-9
    rest: float = 2e-9
    read: float = 1e-9
    reset: float = 0.5e-9

    def __post_init__(self):
        if min(self.write, self.rest, self.read, self.reset) < 0 or self.write <= 0:
            raise ValueError("schedule windows must be non-negative and write > 0")

    @property
    def total(self):
        return self.write + self.rest + self.read + self.reset


@dataclass(frozen=True)
class NeuronModel:
    """How a layer of neurons responds to its crossbar current.

    ``i_bias`` and ``i_o`` are the fitted characteristic in the operating
    mode; ``bias_current`` is the fixed current added by the bias source
    (``i_bias`` by default in sync mode, zero in async mode).
    """

    mode: str
    i_bias: float
    i_o: float
    hm_resistance: float = 400.0
    delta: float = 20.0
    pulse_width: float = 8.2e-9
    reset_current: float = 0.0
    tick: float = 1e-9
    bias_current: float | None = None
    schedule: ScheduleSync = ScheduleSync()
    circuit: ReadCircuitParams = ReadCircuitParams()
    name: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.i_o <= 0:
            raise ValueError("i_o must be positive")
        if self.pulse_width <= 0 or self.tick <= 0:
            raise ValueError("pulse_width and tick must be positive")
        if self.bias_current is None:
            object.__setattr__(self, "bias_current", self.i_bias if self.mode == "sync" else 0.0)

    @property
    def step_duration(self):
        return self.schedule.total if self.mode == "sync" else self.tick

    @property
    def hm_offset_current(self):
        """Current through the HM on top of the crossbar drive."""
        if self.mode == "sync":
            return self.bias_current
        return self.bias_current + self.circuit.read_current

    @property
    def resample_probability(self):
        # chance per tick that the telegraph forgets its state; mean
        # high-pulse width is 2 * tau_bar at p = 0.5
        tau_bar = self.pulse_width / 2
        return -math.expm1(-self.tick / tau_bar)

    def probability(self, current):
        return sigmoid((np.asarray(current, dtype=float) + self.bias_current - self.i_bias) / self.i_o)


def neuron_step_behavioral(drive_current, char, bias, rng):
    """One Bernoulli spike with probability sigmoid((drive + bias - i_bias) / i_o)."""
    p = sigmoid((drive_current + bias - char.i_bias) / char.i_o)
    return int(rng.random() < p)


@dataclass
class Hardware:
    """A network programmed onto crossbars and bound to one neuron model."""

    net: object
    neuron: NeuronModel
    crossbars: list
    supply_noise: float = 0.0
    cmos_offsets: list | None = None

    @property
    def n_neurons(self):
        return self.net.n_neurons


def build_hardware(net, neuron, *, g_o=G_O_DEFAULT, i_o_ref=None, synapse_sigma=0.0,
                   supply_noise=0.0, cmos_offsets=None, seed=0):
    """Program every layer's crossbar and set its supply so one unit weight gives ``i_o_ref``."""
    i_o_ref = neuron.i_o if i_o_ref is None else i_o_ref
    cbs = []
    for li, layer in enumerate(net.layers):
        cb = program(layer.weights, g_o=g_o, variation_sigma=synapse_sigma, seed=[seed, li])
        cbs.append(configure(cb, i_o_ref))
    return Hardware(net, neuron, cbs, supply_noise, cmos_offsets)


def image_rng(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


@dataclass
class RunRecord:
    """Per-image, per-timestep activity of a batch of inferences.

    ``counts`` are cumulative output spike counts (batch, steps, outputs).
    ``current_sq`` is sum over neurons of the squared HM current, A^2.
    ``synapse_power`` is the crossbar dissipation while rows are driven, W.
    ``toggles`` counts neuron output transitions.
    """

    counts: np.ndarray
    current_sq: np.ndarray
    synapse_power: np.ndarray
    toggles: np.ndarray
    step_duration: float
    rates: list | None = None
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_steps(self):
        return self.counts.shape[1]

    def times(self):
        return (np.arange(self.n_steps) + 1) * self.step_duration


def _stack(records):
    rates = None
    if records[0].rates is not None:
        rates = [np.concatenate([r.rates[k] for r in records]) for k in range(len(records[0].rates))]
    return RunRecord(
        counts=np.concatenate([r.counts for r in records]),
        current_sq=np.concatenate([r.current_sq for r in records]),
        synapse_power=np.concatenate([r.synapse_power for r in records]),
        toggles=np.concatenate([r.toggles for r in records]),
        step_duration=records[0].step_duration,
        rates=rates,
        indices=np.concatenate([r.indices for r in records]),
    )


def simulate(hw, images, n_steps, seed, indices=None, *, rate_mode=False, record_rates=False,
             burn_in=0, chunk=16):
    """Run ``n_steps`` timesteps of inference for a batch of images.

    ``rate_mode`` replaces every Bernoulli draw by its probability, giving
    the deterministic rate-propagation limit.  With ``record_rates`` the
    mean output of every layer (input layer first) after ``burn_in`` steps
    is returned in ``RunRecord.rates``.
    """
    if n_steps < 1:
        raise ValueError("need at least one timestep")
    neuron = hw.neuron
    sync = neuron.mode == "sync"
    x_img = np.asarray(images, dtype=float).reshape(len(images), -1)
    bsz, n_in = x_img.shape
    if n_in != hw.net.n_inputs:
        raise ValueError("image size does not match the network input")
    if np.any(x_img < 0) or np.any(x_img > 1):
        raise ValueError("pixel intensities must lie in [0, 1]")
    idx = np.arange(bsz) if indices is None else np.asarray(indices)
    sizes = hw.net.layer_sizes()
    offs = np.cumsum([0, n_in] + sizes)
    n_draw = int(offs[-1])
    rngs = [image_rng(seed, i) for i in idx]
    q = neuron.resample_probability
    hm_off = neuron.hm_offset_current
    states = [np.zeros((bsz, n)) for n in sizes]
    ones = np.ones((bsz, 1))
    n_out = sizes[-1]
    counts = np.zeros((bsz, n_steps, n_out), dtype=np.int32)
    acc = np.zeros((bsz, n_out))
    current_sq = np.zeros((bsz, n_steps))
    syn_p = np.zeros((bsz, n_steps))
    toggles = np.zeros((bsz, n_steps))
    sums = [np.zeros((bsz, n)) for n in [n_in] + sizes] if record_rates else None
    u = None
    for t in range(n_steps):
        if not rate_mode:
            k = t % chunk
            if k == 0:
                m = min(chunk, n_steps - t)
                u = np.stack([r.random((m, n_draw)) for r in rngs], axis=1)
            ut = u[k]
            x = (ut[:, :n_in] < x_img).astype(float)
        else:
            x = x_img
        prev = states
        new = []
        for li, cb in enumerate(hw.crossbars):
            if li == 0:
                src = x
            else:
                src = prev[li - 1] if sync else new[li - 1]
            ext = np.hstack([src, ones])
            noise = hw.supply_noise[li] if isinstance(hw.supply_noise, (list, tuple)) else hw.supply_noise
            cur = column_currents(cb, ext, noise)
            p = sigmoid((cur + neuron.bias_current - neuron.i_bias) / neuron.i_o)
            if not sync and hw.cmos_offsets is not None:
                p = np.clip(p + hw.cmos_offsets[li], 0.0, 1.0)
            old = prev[li]
            if rate_mode:
                s = p if sync else old + q * (p - old)
            else:
                ul = ut[:, offs[li + 1]:offs[li + 2]]
                if sync:
                    s = (ul < p).astype(float)
                else:
                    s = np.where(ul < q * p, 1.0, np.where(ul < q, 0.0, old))
            current_sq[:, t] += np.sum((cur + hm_off) ** 2, axis=1)
            syn_p[:, t] += synapse_energy(cb, ext, 1.0)
            toggles[:, t] += np.sum(s != old, axis=1)
            new.append(s)
        states = new
        acc = acc + states[-1]
        counts[:, t] = np.rint(acc) if not rate_mode else acc
        if record_rates and t >= burn_in:
            sums[0] += x
            for li, s in enumerate(states):
                sums[li + 1] += s
    rates = None
    if record_rates:
        rates = [s / max(1, n_steps - burn_in) for s in sums]
    return RunRecord(counts, current_sq, syn_p, toggles, neuron.step_duration, rates, idx)


def _simulate_job(args):
    hw, images, n_steps, seed, indices, kw = args
    return simulate(hw, images, n_steps, seed, indices, **kw)


def simulate_many(hw, images, n_steps, seed, *, batch=100, workers=1, **kw):
    """``simulate`` over a dataset in batches, optionally on worker processes."""
    n = len(images)
    jobs = [(hw, images[i:i + batch], n_steps, seed, np.arange(i, min(n, i + batch)), kw)
            for i in range(0, n, batch)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(_simulate_job, jobs))
    else:
        recs = [_simulate_job(j) for j in jobs]
    return _stack(recs)


def tie_aware_correct(counts, labels):
    """Expected correctness under uniform random tie-breaking, (batch, steps)."""
    c = np.asarray(counts)
    top = c.max(axis=-1, keepdims=True)
    winners = c == top
    n_win = winners.sum(axis=-1)
    lab = np.asarray(labels)[:, None, None]
    hit = np.take_along_axis(winners, np.broadcast_to(lab, c.shape[:2] + (1,)), axis=-1)[..., 0]
    return hit / n_win


@dataclass
class InferenceTrace:
    counts: np.ndarray
    timestep_duration: float
    predictions: np.ndarray

    def times(self):
        return (np.arange(self.counts.shape[0]) + 1) * self.timestep_duration


def run_inference(hw, image, total_time, seed, index=0):
    """Single-image inference; ``predictions`` holds the argmax after every step."""
    n = int(math.floor(total_time / hw.neuron.step_duration + 1e-9))
    if n < 1:
        raise ValueError("total_time is shorter than one timestep")
    rec = simulate(hw, np.asarray(image)[None], n, seed, [index])
    counts = rec.counts[0]
    return InferenceTrace(counts, rec.step_duration, np.argmax(counts, axis=1))


@dataclass
class Evaluation:
    """Accuracy versus time over a labelled image set, plus the raw activity record."""

    times: np.ndarray
    accuracy: np.ndarray
    record: RunRecord
    labels: np.ndarray

    def checkpoints(self, n=None):
        """Indices of roughly geometric checkpoints (every step if the run is short)."""
        steps = len(self.times)
        if n is None or steps <= n:
            return np.arange(steps)
        g = np.unique(np.round(np.geomspace(1, steps, n)).astype(int)) - 1
        return g

    def first_reaching(self, target):
        hit = np.nonzero(self.accuracy >= target)[0]
        return int(hit[0]) if len(hit) else None

    def to_csv(self, path, n_checkpoints=None):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ns", "accuracy"])
            for i in self.checkpoints(n_checkpoints):
                w.writerow([f"{self.times[i] * 1e9:.6g}", f"{self.accuracy[i]:.6f}"])


def evaluate(hw, images, labels, total_time, seed, n_images=None, *, workers=1, batch=100):
    """Accuracy after every timestep up to ``total_time``."""
    if n_images is not None:
        images, labels = images[:n_images], labels[:n_images]
    if len(images) == 0:
        raise ValueError("empty dataset")
    n = int(math.floor(total_time / hw.neuron.step_duration + 1e-9))
    if n < 1:
        raise ValueError("total_time is shorter than one timestep")
    rec = simulate_many(hw, images, n, seed, batch=batch, workers=workers)
    acc = tie_aware_correct(rec.counts, labels).mean(axis=0)
    return Evaluation(rec.times(), acc, rec, np.asarray(labels))


SWEEP_KINDS = ("synapse_sigma", "supply_mv", "cmos_sigma", "temperature")


def sweep_variations(hw_factory, images, labels, kind, values, n_mc, seed, total_time, *,
                     workers=1):
    """Mean and std of final accuracy over ``n_mc`` variation draws per sweep value.

    ``hw_factory(kind, value, mc_seed)`` returns the Hardware for one draw.
    Inference noise uses the same ``seed`` for every draw, so differences
    between sweep points come from the variation alone.
    """
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}")
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    means, stds = [], []
    for v in values:
        accs = []
        for mc in range(n_mc):
            hw = hw_factory(kind, v, int(np.random.SeedSequence([seed, mc]).generate_state(1)[0]))
            ev = evaluate(hw, images, labels, total_time, seed, workers=workers)
            accs.append(ev.accuracy[-1])
        means.append(float(np.mean(accs)))
        stds.append(float(np.std(accs)))
    return np.array(means), np.array(stds)


def variation_factory(net, neuron, *, g_o=G_O_DEFAULT, recharacterize=None, supply_model="shared"):
    """``hw_factory`` for ``sweep_variations`` around a nominal design.

    Sweep units: ``synapse_sigma`` in percent, ``supply_mv`` as the standard
    deviation in mV of one supply offset shared by every row of the draw
    (``supply_model="per_row"`` draws one per row driver), ``cmos_sigma`` as the
    process corner in sigmas (a uniform inverter offset, asynchronous reads
    only), ``temperature`` in kelvin.  ``recharacterize(T)`` must return the
    fitted ``(i_bias, i_o)`` at temperature ``T``; the crossbar supply and the
    bias source stay at their nominal design values.
    """

    if supply_model not in ("shared", "per_row"):
        raise ValueError("supply_model must be 'shared' or 'per_row'")

    def factory(kind, value, mc_seed):
        if kind == "synapse_sigma":
            return build_hardware(net, neuron, g_o=g_o, synapse_sigma=value / 100.0, seed=mc_seed)
        if kind == "supply_mv":
            hw = build_hardware(net, neuron, g_o=g_o, seed=mc_seed)
            rng = np.random.default_rng(mc_seed)
            if supply_model == "per_row":
                hw.supply_noise = [rng.normal(0.0, value * 1e-3, cb.n_inputs) for cb in hw.crossbars]
            else:
                hw.supply_noise = float(rng.normal(0.0, value * 1e-3))
            return hw
        if kind == "cmos_sigma":
            hw = build_hardware(net, neuron, g_o=g_o, seed=mc_seed)
            if neuron.mode == "async":
                off = value * neuron.circuit.offset_per_sigma
                hw.cmos_offsets = [off] * len(hw.crossbars)
            return hw
        if kind == "temperature":
            if recharacterize is None:
                raise ValueError("temperature sweeps need a recharacterize callback")
            b, o = recharacterize(value)
            nm = replace(neuron, i_bias=b, i_o=o)
            return build_hardware(net, nm, g_o=g_o, i_o_ref=neuron.i_o, seed=mc_seed)
        raise ValueError(f"unknown sweep kind {kind!r}")

    return factory


class DeviceNeuronBank:
    """LLGS-level neurons stepped through the same timesteps as the behavioural model."""

    def __init__(self, params, neuron, n, seed, *, dt=1e-12, stride=10, first_index=0):
        self.params = params
        self.neuron = neuron
        self.dt = dt
        self.stride = stride
        m0 = np.tile([-1.0, 0.0, 0.0], (n, 1))
        self.ens = Ensemble(params, m0, dt=dt, seed=seed, indices=np.arange(n) + first_index)
        self.rng = image_rng(seed, 10**9 + first_index)
        self.n = n
        # settle into the AP basin before the first step
        self.ens.run(int(round(5e-9 / dt)))
        if neuron.mode == "sync":
            self.ens.force(-1)
        self.comp = (self.ens.m[:, 0] > 0).astype(np.int8)
        self.y = self.comp.astype(float)
        self.level = self.comp.copy()

    def _steps(self, t):
        return int(round(t / self.dt))

    def step(self, drive):
        drive = np.broadcast_to(np.asarray(drive, dtype=float), (self.n,))
        nm = self.neuron
        if nm.mode == "sync":
            sch = nm.schedule
            self.ens.run(self._steps(sch.write), drive + nm.bias_current)
            self.ens.run(self._steps(sch.rest))
            spikes = np.array([read_sync(m, nm.circuit, nm.delta, self.rng) for m in self.ens.m])
            self.ens.run(self._steps(sch.read))
            self.ens.run(self._steps(sch.reset), nm.reset_current)
            return spikes
        k = self._steps(nm.tick)
        k -= k % self.stride
        rec = self.ens.run(k, drive + nm.hm_offset_current, record_stride=self.stride)
        out = np.empty(self.n, dtype=np.int8)
        for j in range(self.n):
            comp = hysteretic_states(rec[j, :, 0], initial=self.comp[j])
            lv, self.y[j], s = filter_levels(comp, self.dt * self.stride, nm.circuit,
                                             y0=self.y[j], s0=self.level[j])
            self.comp[j] = comp[-1]
            self.level[j] = s
            out[j] = lv[-1]
        return out


def neuron_step_device(bank, drive_current):
    """Advance a DeviceNeuronBank by one timestep; returns its spikes."""
    return bank.step(drive_current)


def device_spike_rate(params, neuron, drive, n_steps, seed, n_neurons=1, burn_in=0):
    """Spike rate of each of ``n_neurons`` device neurons after ``burn_in`` discarded steps."""
    bank = DeviceNeuronBank(params, neuron, n_neurons, seed)
    for _ in range(burn_in):
        bank.step(drive)
    total = np.zeros(n_neurons)
    for _ in range(n_steps):
        total += bank.step(drive)
    return total / n_steps
