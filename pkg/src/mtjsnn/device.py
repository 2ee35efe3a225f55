"""Device characterisation: switching curves, sigmoid fits, barriers, retention, dwell times."""
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .constants import CONSTANTS
from .llgs import Ensemble, SWITCH_BAND

DEFAULT_TAU0 = 10e-12
WARMUP = 5e-9


class InsufficientRangeError(ValueError):
    """Sampled curve does not span enough of the sigmoid to fit it."""


class InsufficientStatistics(RuntimeError):
    """Too few telegraphic transitions were observed."""


class InvalidGeometry(ValueError):
    """Shape anisotropy gives no in-plane barrier along x."""


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass
class SwitchingCharacteristic:
    """Sampled AP to P switching probability and its logistic fit."""

    currents: np.ndarray
    p_switch: np.ndarray
    n_trials: int
    pulse_width: float
    i_bias: float = float("nan")
    i_o: float = float("nan")
    fit_residual: float = float("nan")
    meta: dict = field(default_factory=dict)

    def probability(self, current):
        return sigmoid((np.asarray(current, dtype=float) - self.i_bias) / self.i_o)

    def with_fit(self):
        b, o, r = fit_sigmoid(self.currents, self.p_switch)
        return SwitchingCharacteristic(self.currents, self.p_switch, self.n_trials, self.pulse_width,
                                       b, o, r, dict(self.meta))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["current_A", "p_switch", "n_trials"])
            for i, p in zip(self.currents, self.p_switch):
                w.writerow([repr(float(i)), repr(float(p)), int(self.n_trials)])

    def sidecar(self, delta_kbt=None, **extra):
        d = {
            "i_bias_A": self.i_bias,
            "i_o_A": self.i_o,
            "pulse_width_s": self.pulse_width,
            "residual": self.fit_residual,
            "delta_kbt": delta_kbt,
        }
        d.update(extra)
        return d

    def write(self, csv_path, json_path, delta_kbt=None, **extra):
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(delta_kbt, **extra), fh, indent=2, sort_keys=True)

    @classmethod
    def from_files(cls, csv_path, json_path=None):
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        out = cls(currents=data[:, 0].copy(), p_switch=data[:, 1].copy(),
                  n_trials=int(data[0, 2]), pulse_width=float("nan"))
        if json_path is not None:
            with open(json_path) as fh:
                d = json.load(fh)
            out.i_bias, out.i_o = d["i_bias_A"], d["i_o_A"]
            out.pulse_width, out.fit_residual = d["pulse_width_s"], d["residual"]
            out.meta = {k: v for k, v in d.items()
                        if k not in ("i_bias_A", "i_o_A", "pulse_width_s", "residual")}
        return out


@dataclass
class RetentionStats:
    """Telegraphic dwell statistics and the retention time implied by the barrier."""

    barrier_height: float
    tau0: float
    retention_time: float
    dwell_samples: np.ndarray
    dwell_p: np.ndarray = field(default_factory=lambda: np.empty(0))
    dwell_ap: np.ndarray = field(default_factory=lambda: np.empty(0))
    p_occupancy: float = float("nan")
    n_transitions: int = 0


def calibrate_barrier(params, const=CONSTANTS):
    """Shape-anisotropy barrier height in units of kB*T."""
    nxx, nyy, _ = params.demag_factors
    if nyy <= nxx:
        raise InvalidGeometry("easy axis is not x: need N_yy > N_xx")
    ms = params.saturation_magnetization
    eb = 0.5 * const.mu0 * ms * ms * params.volume * (nyy - nxx)
    return eb / (const.kB * params.temperature)


def retention_time(delta, tau0=DEFAULT_TAU0):
    return tau0 * math.exp(delta)


def retention_failure_probability(delta, t_read):
    """Chance that a state flips during a read of ``t_read`` nanoseconds."""
    if t_read < 0:
        raise ValueError("t_read must be non-negative")
    if math.isinf(delta) and delta > 0:
        return 0.0
    return -math.expm1(-t_read / math.exp(delta))


def _crossing(x, y, level):
    # first interpolated crossing of a roughly increasing curve
    idx = np.nonzero(y >= level)[0]
    if len(idx) == 0:
        return x[-1]
    i = idx[0]
    if i == 0:
        return x[0]
    x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0) if y1 != y0 else x1


def fit_sigmoid(currents, p_switch):
    """Least-squares logistic fit; returns ``(i_bias, i_o, max_abs_residual)``."""
    x = np.asarray(currents, dtype=float)
    y = np.asarray(p_switch, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("currents and p_switch must be equal-length 1-D arrays")
    if len(x) < 5 or y.min() >= 0.2 or y.max() <= 0.8:
        raise InsufficientRangeError("need >= 5 points spanning p < 0.2 to p > 0.8")
    order = np.argsort(x)
    x, y = x[order], y[order]
    b0 = _crossing(x, y, 0.5)
    spread = _crossing(x, y, 0.75) - _crossing(x, y, 0.25)
    o0 = spread / 2.2 if spread > 0 else (x[-1] - x[0]) / 10
    # work in units of the initial scale so the problem is O(1)
    sx = abs(o0)

    def resid(q):
        return sigmoid((x / sx - q[0]) / q[1]) - y

    def jac(q):
        s = sigmoid((x / sx - q[0]) / q[1])
        ds = s * (1 - s)
        z = (x / sx - q[0]) / q[1]
        return np.column_stack([-ds / q[1], -ds * z / q[1]])

    sol = least_squares(resid, [b0 / sx, 1.0], jac=jac, method="lm", xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=2000)
    b, o = sol.x[0] * sx, abs(sol.x[1]) * sx
    r = float(np.max(np.abs(sigmoid((x - b) / o) - y)))
    return float(b), float(o), r


def switching_trials(params, pulse_width, currents, n_trials, seed, *, dt=1e-12, warmup=WARMUP,
                     reset_current=None, reset_width=0.5e-9, settle=0.0, common_noise=False):
    """Per-trial switching outcomes, shape (len(currents), n_trials), as int8.

    Protocol per trial: thermalise ``warmup`` at zero current, force the AP
    basin, optionally apply a reset pulse, apply the write pulse, optionally
    relax for ``settle`` at zero current, then report the hysteretic state.

    By default every current point gets fresh trials, so sampling errors of
    neighbouring points are independent and average out in a fit.  With
    ``common_noise`` trial ``i`` replays the same warm-up and pulse noise at
    every current, which makes the sampled curve monotone but shares one
    sampling error across all points.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if pulse_width <= 0:
        raise ValueError("pulse_width must be positive")
    currents = np.atleast_1d(np.asarray(currents, dtype=float))
    n_pulse = int(round(pulse_width / dt))
    n_settle = int(round(settle / dt))
    out = np.empty((len(currents), n_trials), dtype=np.int8)
    prepared = None
    for k, cur in enumerate(currents):
        # each current point owns a disjoint block of trajectory indices
        block = 0 if common_noise else k
        idx = np.arange(n_trials) + block * n_trials
        if prepared is None or not common_noise:
            prepared = _prepare_ap(params, idx, seed, dt, warmup, reset_current, reset_width)
        m0, s0 = prepared
        ens = Ensemble(params, m0, dt=dt, seed=seed, indices=idx, stream=2, state=s0)
        ens.run(n_pulse, cur)
        if n_settle:
            ens.run(n_settle)
        out[k] = ens.state
    return out


def _prepare_ap(params, idx, seed, dt, warmup, reset_current, reset_width):
    warm = Ensemble(params, np.tile([-1.0, 0.0, 0.0], (len(idx), 1)), dt=dt, seed=seed,
                    indices=idx, stream=1)
    warm.run(int(round(warmup / dt)))
    warm.force(-1)
    if reset_current is not None:
        warm.run(int(round(reset_width / dt)), reset_current)
    return warm.m.copy(), warm.state.copy()


def characterize_switching(params, pulse_width, currents, n_trials=1000, seed=0, *, fit=True,
                           **protocol):
    """Monte Carlo AP to P switching probability versus write current."""
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    currents = np.asarray(currents, dtype=float)
    outcomes = switching_trials(params, pulse_width, currents, n_trials, seed, **protocol)
    p = outcomes.mean(axis=1)
    if np.any(np.isnan(p)):
        raise FloatingPointError("NaN switching probability")
    ch = SwitchingCharacteristic(currents.copy(), p, n_trials, pulse_width,
                                 meta={"device": params.name, "seed": seed})
    return ch.with_fit() if fit else ch


def auto_characterize(params, pulse_width, n_trials=1000, seed=0, *, n_points=13, span=3.0,
                      scout_trials=200, start=None, **protocol):
    """Locate the switching window with a coarse scout, then sample ``i_bias +- span*i_o``."""
    lo, hi = (0.0, 1e-6) if start is None else start
    # widen until the scout spans the sigmoid
    for _ in range(40):
        grid = np.linspace(lo, hi, 9)
        ps = switching_trials(params, pulse_width, grid, scout_trials, seed + 7919,
                              **dict(protocol, common_noise=True))
        p = ps.mean(axis=1)
        if p[0] < 0.1 and p[-1] > 0.9:
            break
        if p[0] >= 0.1:
            lo -= (hi - lo)
        if p[-1] <= 0.9:
            hi += (hi - lo)
    else:
        raise InsufficientRangeError("could not bracket the switching window")
    b, o, _ = fit_sigmoid(grid, p)
    grid = np.linspace(b - span * o, b + span * o, n_points)
    return characterize_switching(params, pulse_width, grid, n_trials, seed, **protocol)


def probability_at(params, pulse_width, current, n_trials, seed, **protocol):
    return float(switching_trials(params, pulse_width, [current], n_trials, seed, **protocol).mean())


def hysteretic_states(mx, band=SWITCH_BAND, initial=None):
    from ._kernels import hysteresis

    mx = np.ascontiguousarray(mx, dtype=float)
    s0 = int(mx[0] > 0) if initial is None else int(initial)
    out = np.empty(mx.shape[0], dtype=np.int8)
    hysteresis(mx, s0, band, out)
    return out


def dwell_intervals(states, sample_dt):
    """Completed dwell durations ``(p_dwells, ap_dwells)``; edge intervals are dropped."""
    s = np.asarray(states, dtype=np.int8)
    edges = np.nonzero(np.diff(s))[0] + 1
    if len(edges) < 2:
        return np.empty(0), np.empty(0), len(edges)
    lengths = np.diff(edges) * sample_dt
    level = s[edges[:-1]]
    return lengths[level == 1], lengths[level == 0], len(edges)


def telegraph_trace(params, current, duration, seed, *, dt=1e-12, stride=10, m0=(1.0, 0.0, 0.0),
                    index=0):
    """m_x sampled every ``stride`` steps of one long trajectory."""
    ens = Ensemble(params, [m0], dt=dt, seed=seed, indices=[index])
    n = int(round(duration / dt))
    rec = ens.run(n - n % stride, current, record_stride=stride)
    return rec[0, :, 0]


def dwell_time_analysis(params, bias_current=0.0, duration=10e-6, seed=0, *, dt=1e-12, stride=10,
                        tau0=DEFAULT_TAU0, min_transitions=20):
    """Segment a telegraphic trajectory into P / AP dwell intervals."""
    mx = telegraph_trace(params, bias_current, duration, seed, dt=dt, stride=stride)
    st = hysteretic_states(mx)
    dp, dap, n_tr = dwell_intervals(st, dt * stride)
    if n_tr < min_transitions:
        raise InsufficientStatistics(f"only {n_tr} transitions in {duration:g} s")
    delta = calibrate_barrier(params)
    return RetentionStats(
        barrier_height=delta,
        tau0=tau0,
        retention_time=retention_time(delta, tau0),
        dwell_samples=np.concatenate([dp, dap]),
        dwell_p=dp,
        dwell_ap=dap,
        p_occupancy=float(st.mean()),
        n_transitions=int(n_tr),
    )
