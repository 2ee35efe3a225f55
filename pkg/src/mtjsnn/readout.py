"""Behavioural read path: divider + inverter chain collapsed to comparator, RC, comparator."""
import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .device import (SwitchingCharacteristic, fit_sigmoid, hysteretic_states,
                     retention_failure_probability)
from .llgs import SWITCH_BAND, Ensemble

# offset of the inverter output probability per sigma of CMOS threshold
# variation; +2 sigma costs the 1 kBT asynchronous reference network about 3%
CMOS_OFFSET_PER_SIGMA = 0.05


@dataclass(frozen=True)
class ReadCircuitParams:
    read_current: float = 100e-9
    r_ref: float | None = None
    read_time_sync: float = 1e-9
    inverter_threshold_offset: float = 0.0
    sigma_level: int = 0
    tau_rc: float = 2.5e-9
    offset_per_sigma: float = CMOS_OFFSET_PER_SIGMA
    level_low: float = 0.4
    level_high: float = 0.6

    def __post_init__(self):
        if self.read_current < 0:
            raise ValueError("read_current must be >= 0")
        if self.read_time_sync <= 0:
            raise ValueError("read_time_sync must be > 0")
        if not -0.1 <= self.inverter_threshold_offset <= 0.1:
            raise ValueError("inverter_threshold_offset must lie in [-0.1, 0.1]")
        if self.sigma_level not in (-2, -1, 0, 1, 2):
            raise ValueError("sigma_level must be one of -2..2")
        if self.tau_rc <= 0:
            raise ValueError("tau_rc must be > 0")
        if not 0 <= self.level_low <= self.level_high <= 1:
            raise ValueError("need 0 <= level_low <= level_high <= 1")

    @property
    def output_offset(self):
        """Total shift of the inverter output probability."""
        return self.inverter_threshold_offset + self.sigma_level * self.offset_per_sigma


@dataclass(frozen=True)
class ReadSample:
    time: float
    level: int


@dataclass
class ReadStream:
    times: np.ndarray
    levels: np.ndarray

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return ReadSample(float(self.times[i]), int(self.levels[i]))

    def mean(self):
        return float(np.mean(self.levels))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "level"])
            for t, v in zip(self.times, self.levels):
                w.writerow([f"{t:.17g}", int(v)])


def read_sync(m_final, circuit, delta, rng):
    """Latched inverter output after a write; retention failures flip the bit."""
    level = 1 if m_final[0] > 0 else 0
    p_flip = retention_failure_probability(delta, circuit.read_time_sync * 1e9)
    if p_flip > 0 and rng.random() < p_flip:
        level = 1 - level
    return level


def filter_levels(raw, sample_dt, circuit, y0=None, s0=None):
    """RC low-pass of a binary comparator stream followed by a hysteretic re-threshold.

    Returns ``(levels, y_end, s_end)`` so long streams can be processed in pieces.
    """
    raw = np.ascontiguousarray(raw, dtype=float)
    if y0 is None:
        y0 = float(raw[0]) if len(raw) else 0.0
    if s0 is None:
        s0 = int(y0 > 0.5)
    decay = math.exp(-sample_dt / circuit.tau_rc)
    out = np.empty(len(raw), dtype=np.int8)
    y, s = _kernels.filter_stream(raw, float(y0), int(s0), decay, circuit.level_low,
                                  circuit.level_high, out)
    return out, float(y), int(s)


def stream_from_mx(mx, sample_dt, circuit, band=SWITCH_BAND):
    comp = hysteretic_states(mx, band)
    levels, _, _ = filter_levels(comp, sample_dt, circuit)
    return levels


def read_async_stream(trajectory, circuit):
    """Inverter output sampled on the trajectory's own time grid."""
    t = np.asarray(trajectory.times)
    dt = float(t[1] - t[0]) if len(t) > 1 else 1e-12
    levels = stream_from_mx(np.asarray(trajectory.m)[:, 0], dt, circuit)
    return ReadStream(times=t.copy(), levels=levels)


def apply_read_backaction(write_current, circuit, mode="async"):
    """HM current seen by the free layer once the read current is added."""
    if mode == "sync":
        return write_current
    if mode != "async":
        raise ValueError("mode must be 'sync' or 'async'")
    return write_current + circuit.read_current


def apply_cmos_variation(mean_output, circuit):
    if circuit.sigma_level == 0 and circuit.inverter_threshold_offset == 0:
        return mean_output
    return np.clip(np.asarray(mean_output, dtype=float) + circuit.output_offset, 0.0, 1.0)


def pulse_widths(levels, sample_dt):
    """Durations of the completed high pulses in a level stream."""
    s = np.asarray(levels, dtype=np.int8)
    d = np.diff(s)
    up = np.nonzero(d == 1)[0]
    down = np.nonzero(d == -1)[0]
    if len(up) == 0:
        return np.zeros(0)
    down = down[down > up[0]]
    n = min(len(up), len(down))
    return (down[:n] - up[:n]) * sample_dt


def mean_pulse_width(levels, sample_dt):
    """Mean duration of completed high pulses, NaN if none are complete.

    A 2-D input is a stack of independent streams whose pulses are pooled.
    """
    levels = np.asarray(levels)
    rows = levels if levels.ndim == 2 else levels[None]
    w = np.concatenate([pulse_widths(r, sample_dt) for r in rows])
    return float(np.mean(w)) if len(w) else float("nan")


def telegraph_mx(params, currents, duration, seed, *, dt=1e-12, stride=10, indices=None):
    """Sampled m_x of independent trajectories, one per entry of ``currents``."""
    currents = np.atleast_1d(np.asarray(currents, dtype=float))
    n = len(currents)
    idx = np.arange(n) if indices is None else indices
    # start each member on a random side so no state is favoured at t = 0
    side = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    m0 = np.column_stack([side, np.zeros(n), np.zeros(n)])
    ens = Ensemble(params, m0, dt=dt, seed=seed, indices=idx)
    steps = int(round(duration / dt))
    return ens.run(steps - steps % stride, currents, record_stride=stride)[:, :, 0]


def calibrate_tau_rc(params, target=8.2e-9, circuit=None, duration=10e-6, seed=0, *, dt=1e-12,
                     stride=10, bracket=(0.05e-9, 30e-9), n_traj=4):
    """RC constant at which the zero-input mean inverter pulse width hits ``target``.

    The read current flows during the calibration run, as it does in operation.
    Pulses from ``n_traj`` independent trajectories of length ``duration`` are pooled.
    """
    circuit = circuit or ReadCircuitParams()
    cur = apply_read_backaction(0.0, circuit)
    mx = telegraph_mx(params, [cur] * n_traj, duration, seed, dt=dt, stride=stride)
    comps = [hysteretic_states(m) for m in mx]
    sdt = dt * stride

    def width(tau):
        c = ReadCircuitParams(**{**circuit.__dict__, "tau_rc": tau})
        return mean_pulse_width([filter_levels(cp, sdt, c)[0] for cp in comps], sdt)

    f = lambda lt: math.log(width(math.exp(lt))) - math.log(target)  # noqa: E731
    lt = brentq(f, math.log(bracket[0]), math.log(bracket[1]), xtol=1e-4)
    return math.exp(lt)


def async_transfer(params, currents, circuit, duration=2e-6, seed=0, *, dt=1e-12, stride=10,
                   warmup=20e-9):
    """Time-averaged inverter output for each write current (read current added)."""
    currents = np.atleast_1d(np.asarray(currents, dtype=float))
    eff = apply_read_backaction(currents, circuit)
    mx = telegraph_mx(params, eff, duration + warmup, seed, dt=dt, stride=stride)
    skip = int(round(warmup / (dt * stride)))
    out = np.empty(len(currents))
    for j in range(len(currents)):
        lv = stream_from_mx(mx[j], dt * stride, circuit)
        out[j] = lv[skip:].mean()
    return apply_cmos_variation(out, circuit)


def characterize_async(params, circuit, currents=None, duration=2e-6, seed=0, **kw):
    """Fit the logistic transfer of the averaged inverter output (bias current 0)."""
    if currents is None:
        currents = np.linspace(-3e-6, 3e-6, 13)
    currents = np.asarray(currents, dtype=float)
    p = async_transfer(params, currents, circuit, duration, seed, **kw)
    b, o, r = fit_sigmoid(currents, p)
    return SwitchingCharacteristic(currents.copy(), p, 1, duration, b, o, r,
                                   meta={"device": params.name, "mode": "async", "seed": seed})
