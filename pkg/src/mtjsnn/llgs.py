"""Macrospin stochastic LLGS dynamics of a spin-Hall-driven MTJ free layer.

Conventions used throughout the package:

* fields are in A/m; the equation is integrated in the reduced time
  ``tau = |gamma| mu0 t / (1 + alpha^2)``;
* the pinned layer points along +x (the long in-plane axis), so the parallel
  (P) state is ``m_x > 0``;
* positive heavy-metal current pumps the free layer towards P: the spin
  accumulation injected by a positive current points along ``-mp``.
"""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .constants import CONSTANTS

PINNED_DIRECTION = np.array([1.0, 0.0, 0.0])
SPIN_DIRECTION = -PINNED_DIRECTION
SWITCH_BAND = 0.5


class NumericalFailure(RuntimeError):
    """Integration produced a non-finite magnetisation."""

    def __init__(self, step, trajectory=None):
        self.step = int(step)
        self.trajectory = trajectory
        where = f" (trajectory {trajectory})" if trajectory is not None else ""
        super().__init__(f"non-finite magnetisation at step {self.step}{where}")


def _demag_z(a, b, c):
    # Aharoni (1998), prism of half-sizes a, b, c along x, y, z; returns N_zz.
    # Logarithms rewritten so that (r - a) etc. never cancel.
    r = math.sqrt(a * a + b * b + c * c)
    rab = math.sqrt(a * a + b * b)
    rbc = math.sqrt(b * b + c * c)
    rac = math.sqrt(a * a + c * c)
    abc = a * b * c
    s = (
        (b * b - c * c) / (2 * b * c) * (math.log(b * b + c * c) - 2 * math.log(r + a))
        + (a * a - c * c) / (2 * a * c) * (math.log(a * a + c * c) - 2 * math.log(r + b))
        + b / (2 * c) * (2 * math.log(rab + a) - 2 * math.log(b))
        + a / (2 * c) * (2 * math.log(rab + b) - 2 * math.log(a))
        + c / (2 * a) * (2 * math.log(c) - 2 * math.log(rbc + b))
        + c / (2 * b) * (2 * math.log(c) - 2 * math.log(rac + a))
        + 2 * math.atan(a * b / (c * r))
        + (a**3 + b**3 - 2 * c**3) / (3 * abc)
        + (a * a + b * b - 2 * c * c) / (3 * abc) * r
        + c / (a * b) * (rac + rbc)
        - (rab**3 + rbc**3 + rac**3) / (3 * abc)
    )
    return s / math.pi


def demag_factors_rect_prism(length, width, thickness):
    """Demagnetisation factors (N_xx, N_yy, N_zz) of a uniformly magnetised prism.

    ``length`` runs along x, ``width`` along y and ``thickness`` along z.
    """
    if min(length, width, thickness) <= 0:
        raise ValueError("prism dimensions must be positive")
    # rescale to O(1) to keep the polynomial terms well conditioned
    s = max(length, width, thickness)
    a, b, c = 0.5 * length / s, 0.5 * width / s, 0.5 * thickness / s
    nzz = _demag_z(a, b, c)
    nxx = _demag_z(b, c, a)
    nyy = _demag_z(c, a, b)
    return (nxx, nyy, nzz)


@dataclass(frozen=True)
class DeviceParams:
    """Geometry, magnetic and spin-Hall parameters of one SHE-MTJ.

    ``hm_width`` is the width of the heavy-metal strip across which the charge
    current flows; it defaults to the free-layer length (the strip runs
    under the full length of the magnet and current flows along its width).
    """

    free_layer_width: float
    free_layer_length: float
    free_layer_thickness: float
    saturation_magnetization: float
    hm_thickness: float = 2e-9
    hm_width: float | None = None
    hm_resistivity: float = 200e-8  # beta-W, 200 uOhm cm
    gilbert_damping: float = 0.0122
    spin_hall_angle: float = 0.3
    spin_flip_length: float = 1e-9
    temperature: float = 300.0
    mgo_resistance_p: float = 25e3
    mgo_resistance_ap: float = 50e3
    demag_factors: tuple | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        lengths = (self.free_layer_width, self.free_layer_length, self.free_layer_thickness,
                   self.hm_thickness, self.spin_flip_length)
        if min(lengths) <= 0 or self.saturation_magnetization <= 0:
            raise ValueError("lengths and saturation magnetisation must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not 0 < self.gilbert_damping < 1:
            raise ValueError("gilbert_damping must lie in (0, 1)")
        if not 0 <= self.spin_hall_angle <= 1:
            raise ValueError("spin_hall_angle must lie in [0, 1]")
        if not self.mgo_resistance_ap > self.mgo_resistance_p > 0:
            raise ValueError("need R_AP > R_P > 0")
        if self.hm_width is None:
            object.__setattr__(self, "hm_width", self.free_layer_length)
        elif self.hm_width <= 0:
            raise ValueError("hm_width must be positive")
        if self.demag_factors is None:
            n = demag_factors_rect_prism(self.free_layer_length, self.free_layer_width,
                                         self.free_layer_thickness)
        else:
            n = tuple(float(v) for v in self.demag_factors)
            if len(n) != 3 or min(n) < 0 or abs(sum(n) - 1.0) > 1e-6:
                raise ValueError("demag factors must be 3 non-negative values summing to 1")
        object.__setattr__(self, "demag_factors", tuple(n))

    @property
    def volume(self):
        return self.free_layer_length * self.free_layer_width * self.free_layer_thickness

    @property
    def footprint_area(self):
        """Elliptical MTJ footprint, pi w L / 4 (the area ratio inside the SHE efficiency)."""
        return math.pi * self.free_layer_width * self.free_layer_length / 4.0

    @property
    def hm_resistance(self):
        """Heavy-metal resistance under the free layer (current along the width)."""
        return self.hm_resistivity * self.free_layer_width / (self.hm_width * self.hm_thickness)

    def at_temperature(self, temperature):
        return replace(self, temperature=float(temperature))

    def to_dict(self):
        return {
            "name": self.name,
            "free_layer_width": self.free_layer_width,
            "free_layer_length": self.free_layer_length,
            "free_layer_thickness": self.free_layer_thickness,
            "saturation_magnetization": self.saturation_magnetization,
            "hm_thickness": self.hm_thickness,
            "hm_width": self.hm_width,
            "hm_resistivity": self.hm_resistivity,
            "gilbert_damping": self.gilbert_damping,
            "spin_hall_angle": self.spin_hall_angle,
            "spin_flip_length": self.spin_flip_length,
            "temperature": self.temperature,
            "mgo_resistance_p": self.mgo_resistance_p,
            "mgo_resistance_ap": self.mgo_resistance_ap,
            "demag_factors": list(self.demag_factors),
        }


def table1_device(kbt, **overrides):
    """One of the four reference devices (nominal barrier 1, 2, 10 or 20 kBT)."""
    geo = {
        1: (10e-9, 25e-9, 0.8e-9, 750e3),
        2: (17e-9, 42.5e-9, 0.8e-9, 750e3),
        10: (30e-9, 75e-9, 1.2e-9, 1000e3),
        20: (40e-9, 100e-9, 1.2e-9, 1000e3),
    }
    if kbt not in geo:
        raise ValueError(f"no reference device for {kbt} kBT; choose from {sorted(geo)}")
    w, length, t, ms = geo[kbt]
    # RA = 5 Ohm um^2, TMR 100 %
    area_um2 = math.pi * w * length / 4 * 1e12
    rp = 5.0 / area_um2
    kw = dict(free_layer_width=w, free_layer_length=length, free_layer_thickness=t,
              saturation_magnetization=ms, mgo_resistance_p=rp, mgo_resistance_ap=2 * rp,
              name=f"{kbt}kBT")
    kw.update(overrides)
    return DeviceParams(**kw)


def she_efficiency(params):
    """Spin-Hall charge-to-spin conversion ratio I_spin / I_charge."""
    w, t = params.free_layer_width, params.hm_thickness
    x = t / params.spin_flip_length
    sech = 2.0 * math.exp(-x) / (1.0 + math.exp(-2.0 * x))  # overflow-free 1 / cosh
    return (math.pi * w / (4 * t)) * params.spin_hall_angle * (1.0 - sech)


def torque_per_amp(params, const=CONSTANTS):
    """Damping-like torque amplitude ``beta * eps_she`` per ampere of HM current, A/m/A.

    The current density entering ``beta`` is the spin-pumping charge current
    referred to the MTJ footprint, so ``eps_she * J`` is the spin current
    density that actually reaches the free layer.
    """
    tfl = params.free_layer_thickness
    ms = params.saturation_magnetization
    beta_per_amp = const.hbar / (params.footprint_area * 2 * const.e_charge * const.mu0 * ms * tfl)
    return beta_per_amp * she_efficiency(params)


def stt_torque(m, mp, charge_current, params, const=CONSTANTS):
    """|gamma| beta (m x (eps_she m x mp)) in rad/s, gamma taken for fields in A/m."""
    if params.free_layer_thickness <= 0:
        raise ValueError("free-layer thickness must be positive")
    m = np.asarray(m, dtype=float)
    mp = np.asarray(mp, dtype=float)
    coeff = const.gamma_h * torque_per_amp(params, const) * charge_current
    return coeff * np.cross(m, np.cross(m, mp))


def thermal_sigma(params, dt, const=CONSTANTS):
    """Per-component standard deviation of the thermal field, A/m."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if params.temperature == 0:
        return 0.0
    num = 2 * params.gilbert_damping * const.kB * params.temperature
    den = const.gamma_h * const.mu0 * params.saturation_magnetization * params.volume * dt
    return math.sqrt(num / den)


def thermal_field(params, dt, rng_draw, const=CONSTANTS):
    return np.asarray(rng_draw, dtype=float) * thermal_sigma(params, dt, const)


def demag_field(m, params):
    n = np.asarray(params.demag_factors)
    return -params.saturation_magnetization * n * np.asarray(m, dtype=float)


def effective_field(m, params, thermal, external):
    return demag_field(m, params) + np.asarray(thermal, dtype=float) + np.asarray(external, dtype=float)


def magnetic_energy(m, params, const=CONSTANTS):
    """Shape-anisotropy energy in joules; ``m`` may be (3,) or (..., 3)."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(params.demag_factors)
    ms = params.saturation_magnetization
    return 0.5 * const.mu0 * ms * ms * params.volume * np.sum(n * m * m, axis=-1)


def llgs_rhs(m, h, torque_field, spin_dir, alpha):
    """dm/dtau for field ``h`` and damping-like torque amplitude ``torque_field`` (A/m)."""
    c = np.cross(m, h)
    e = np.cross(m, spin_dir)
    return -c - alpha * np.cross(m, c) + torque_field * (np.cross(m, e) - alpha * e)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-12
    duration: float = 1e-9
    seed: int = 0
    renormalize_each_step: bool = True
    external_field: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must be at least one time step")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    m: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "mx", "my", "mz"])
            for t, (x, y, z) in zip(self.times, self.m):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(times=data[:, 0].copy(), m=data[:, 1:4].copy())


def heun_step(m, params, dt, current=0.0, zeta=(0.0, 0.0, 0.0), external=(0.0, 0.0, 0.0),
              renormalize=True, step_index=0, const=CONSTANTS):
    """One stochastic Heun (Stratonovich) step of length ``dt`` seconds.

    ``zeta`` is the standard-normal draw shared by predictor and corrector.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NumericalFailure(step_index)
    alpha = params.gilbert_damping
    dtau = const.gamma_h * dt / (1 + alpha * alpha)
    h_fixed = thermal_field(params, dt, zeta, const) + np.asarray(external, dtype=float)
    b = torque_per_amp(params, const) * current
    f1 = llgs_rhs(m, demag_field(m, params) + h_fixed, b, SPIN_DIRECTION, alpha)
    pred = m + f1 * dtau
    f2 = llgs_rhs(pred, demag_field(pred, params) + h_fixed, b, SPIN_DIRECTION, alpha)
    out = m + 0.5 * (f1 + f2) * dtau
    if renormalize:
        out = out / np.linalg.norm(out)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure(step_index)
    return out


def trajectory_rng(seed, index, stream=0):
    """Independent random stream of trajectory ``index`` under master ``seed``.

    ``stream`` separates protocol phases (warm-up, pulse, rest...) of the same
    trajectory without correlating them.
    """
    key = (int(index),) if stream == 0 else (int(index), int(stream))
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def pack_device(params, dt, external=(0.0, 0.0, 0.0), const=CONSTANTS):
    alpha = params.gilbert_damping
    dev = np.empty(_kernels.DEV_LEN)
    dev[0] = params.saturation_magnetization
    dev[1:4] = params.demag_factors
    dev[4] = alpha
    dev[5] = thermal_sigma(params, dt, const)
    dev[6] = torque_per_amp(params, const)
    dev[7:10] = SPIN_DIRECTION
    dev[10:13] = external
    dev[13] = const.gamma_h * dt / (1 + alpha * alpha)
    return dev


class Ensemble:
    """A batch of independent macrospins advanced segment by segment.

    Each member ``j`` draws thermal noise from its own stream derived from
    ``(seed, indices[j])``, so results do not depend on how members are
    grouped into batches or scheduled on threads.
    """

    chunk_steps = 2048

    def __init__(self, params, m0, *, dt=1e-12, seed=0, indices=None, stream=0,
                 external=(0.0, 0.0, 0.0), renormalize=True, band=SWITCH_BAND, state=None):
        m0 = np.array(m0, dtype=float, ndmin=2)
        if m0.shape[1] != 3:
            raise ValueError("m0 must have shape (n, 3)")
        norms = np.linalg.norm(m0, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("initial magnetisation must be unit length")
        self.params = params
        self.dt = float(dt)
        self.m = np.ascontiguousarray(m0)
        n = self.m.shape[0]
        self.indices = np.arange(n) if indices is None else np.asarray(indices)
        self.rngs = [trajectory_rng(seed, i, stream) for i in self.indices]
        self.dev = pack_device(params, self.dt, external)
        self.renormalize = bool(renormalize)
        self.band = float(band)
        if state is None:
            state = (self.m[:, 0] > 0).astype(np.int8)
        self.state = np.array(state, dtype=np.int8)
        self.steps_done = 0

    @property
    def n(self):
        return self.m.shape[0]

    def _noise(self, k):
        noise = np.empty((self.n, k, 3))
        if self.dev[5] == 0.0:
            noise[...] = 0.0
        else:
            for j, rng in enumerate(self.rngs):
                noise[j] = rng.standard_normal((k, 3))
        return noise

    def run(self, n_steps, current=0.0, record_stride=0):
        """Advance all members ``n_steps`` at a current that is constant per member.

        ``current`` may be a scalar, an (n,) array, or an (n, n_steps) array of
        per-step currents (sampled at step midpoints).  With
        ``record_stride > 0`` returns the (n, n_steps // stride, 3) samples.
        """
        n_steps = int(n_steps)
        cur = np.asarray(current, dtype=float)
        per_step = cur.ndim == 2
        if per_step and cur.shape != (self.n, n_steps):
            raise ValueError("per-step current must have shape (n, n_steps)")
        if not per_step:
            cur = np.broadcast_to(cur, (self.n,)).astype(float)
        stride = int(record_stride)
        if stride < 0:
            raise ValueError("record_stride must be non-negative")
        # chunks are multiples of the stride so sample cadence stays aligned
        chunk = max(stride, self.chunk_steps - self.chunk_steps % stride) if stride else self.chunk_steps
        rec_all = np.empty((self.n, n_steps // stride if stride else 0, 3))
        fail = np.full(self.n, -1, dtype=np.int64)
        done = 0
        while done < n_steps:
            k = min(chunk, n_steps - done)
            if per_step:
                ck = np.ascontiguousarray(cur[:, done:done + k])
            else:
                ck = np.repeat(cur[:, None], k, axis=1)
            rec = np.empty((self.n, k // stride if stride else 0, 3))
            _kernels.heun_batch(self.m, self._noise(k), ck, self.dev, self.state, rec,
                                stride if stride else 1, self.renormalize, self.band, fail)
            if np.any(fail >= 0):
                j = int(np.argmax(fail >= 0))
                raise NumericalFailure(self.steps_done + done + fail[j], int(self.indices[j]))
            if stride:
                base = done // stride
                rec_all[:, base:base + rec.shape[1]] = rec
            done += k
        self.steps_done += n_steps
        return rec_all if stride else None

    def force(self, sign):
        """Set every member to the P (+1) or AP (-1) side of the easy axis."""
        self.m[:, 0] = sign * np.abs(self.m[:, 0])
        self.state[:] = 1 if sign > 0 else 0


def integrate(m0, config, params, current_waveform=None, *, trajectory_index=0, stride=1):
    """Integrate one trajectory over ``config.duration``; returns every ``stride``-th sample.

    ``current_waveform`` maps time (s) to HM current (A); it is sampled at the
    midpoint of each step.  ``None`` means zero current.
    """
    n_steps = config.n_steps
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ens = Ensemble(params, m0, dt=config.dt, seed=config.seed, indices=[trajectory_index],
                   external=config.external_field, renormalize=config.renormalize_each_step)
    if current_waveform is None:
        cur = 0.0
    else:
        t_mid = (np.arange(n_steps) + 0.5) * config.dt
        cur = np.array([current_waveform(t) for t in t_mid], dtype=float)[None, :]
    rec = ens.run(n_steps, cur, record_stride=stride)
    m = np.vstack([np.asarray(m0, dtype=float).reshape(1, 3), rec[0]])
    times = np.arange(m.shape[0]) * stride * config.dt
    return Trajectory(times=times, m=m)
