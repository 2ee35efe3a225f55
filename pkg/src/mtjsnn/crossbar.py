"""Resistive crossbar: signed weights as (G+, G-) conductance pairs feeding current-mode neurons."""
import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

G_O_DEFAULT = 5e-6


def _as_csr(a):
    if sparse.issparse(a):
        out = a.tocsr().astype(float)
    else:
        out = sparse.csr_matrix(np.asarray(a, dtype=float))
    out.sum_duplicates()
    return out


@dataclass(frozen=True)
class CrossbarInstance:
    """Programmed conductances, shape inputs x neurons, plus the row supply magnitude.

    ``g_plus`` and ``g_minus`` share one sparsity pattern: the crosspoints that
    physically exist.  Absent entries are open circuits.
    """

    g_plus: sparse.csr_matrix
    g_minus: sparse.csr_matrix
    g_o: float = G_O_DEFAULT
    delta_v: float = 1.0
    variation_sigma: float = 0.0

    def __post_init__(self):
        if self.g_plus.shape != self.g_minus.shape:
            raise ValueError("g_plus and g_minus must have the same shape")
        if self.g_o <= 0:
            raise ValueError("g_o must be positive")
        if (self.g_plus.data < 0).any() or (self.g_minus.data < 0).any():
            raise ValueError("conductances must be non-negative")
        net = (self.g_plus - self.g_minus).tocsr()
        tot = (self.g_plus + self.g_minus).tocsr()
        object.__setattr__(self, "_net", net)
        object.__setattr__(self, "_net_t", net.T.tocsr())
        object.__setattr__(self, "_row_g", np.asarray(tot.sum(axis=1)).ravel())

    @property
    def shape(self):
        return self.g_plus.shape

    @property
    def n_inputs(self):
        return self.shape[0]

    @property
    def n_neurons(self):
        return self.shape[1]

    @property
    def row_conductance(self):
        """Total conductance hanging off each input row, S."""
        return self._row_g

    def effective_weights(self):
        """Signed weights implied by the programmed conductances (dense)."""
        return (self._net / self.g_o).toarray()

    def to_csv(self, path):
        gp = self.g_plus.tocoo()
        gm = self.g_minus.tocsr()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["input", "neuron", "g_plus_S", "g_minus_S"])
            for r, c, v in zip(gp.row, gp.col, gp.data):
                w.writerow([int(r), int(c), repr(float(v)), repr(float(gm[r, c]))])


def program(weights, g_o=G_O_DEFAULT, variation_sigma=0.0, seed=0, g_off=0.0, delta_v=1.0):
    """Map signed weights onto conductance pairs, with multiplicative programming variation.

    Zero weights in a dense matrix are not programmed; in a sparse matrix,
    every stored entry is a physical crosspoint.
    """
    if g_o <= 0:
        raise ValueError("g_o must be positive")
    if variation_sigma < 0 or g_off < 0:
        raise ValueError("variation_sigma and g_off must be non-negative")
    w = _as_csr(weights)
    if not sparse.issparse(weights):
        w.eliminate_zeros()
    pos = w.data > 0
    neg = w.data < 0
    gp_data = np.where(pos, w.data * g_o, g_off)
    gm_data = np.where(neg, -w.data * g_o, g_off)
    if variation_sigma > 0:
        rng = np.random.default_rng(seed)
        # one draw per crosspoint; only the programmed member of the pair varies
        f = 1.0 + variation_sigma * rng.standard_normal(len(w.data))
        gp_data = np.where(pos, np.maximum(gp_data * f, 0.0), gp_data)
        gm_data = np.where(neg, np.maximum(gm_data * f, 0.0), gm_data)
    gp = sparse.csr_matrix((gp_data, w.indices.copy(), w.indptr.copy()), shape=w.shape)
    gm = sparse.csr_matrix((gm_data, w.indices.copy(), w.indptr.copy()), shape=w.shape)
    return CrossbarInstance(gp, gm, g_o=g_o, delta_v=delta_v, variation_sigma=variation_sigma)


def configure(cb, i_o):
    """Set the supply so a unit weight delivers exactly one ``i_o`` of drive."""
    if i_o <= 0:
        raise ValueError("i_o must be positive")
    return replace(cb, delta_v=i_o / cb.g_o)


def column_currents(cb, spikes, supply_noise=0.0):
    """Column currents, A, for a spike vector (inputs,) or a batch (batch, inputs).

    ``supply_noise`` is a deviation of the row supply in volts, either one
    value for all rows or one per row.
    """
    s = np.asarray(spikes, dtype=float)
    if s.shape[-1] != cb.n_inputs:
        raise ValueError(f"spike vector has {s.shape[-1]} entries, crossbar has {cb.n_inputs} rows")
    noise = np.asarray(supply_noise, dtype=float)
    if noise.ndim == 0:
        v = cb.delta_v + float(noise)
    else:
        if noise.shape != (cb.n_inputs,):
            raise ValueError("per-row supply noise must have one entry per row")
        s = s * (cb.delta_v + noise)
        v = 1.0
    if s.ndim == 1:
        return v * (cb._net_t @ s)
    return v * (cb._net_t @ s.T).T


def synapse_energy(cb, spikes, duration):
    """Energy dissipated in all conductors of the active rows over ``duration``."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    s = np.asarray(spikes, dtype=float)
    if s.shape[-1] != cb.n_inputs:
        raise ValueError("spike vector length does not match the crossbar")
    return cb.delta_v**2 * duration * (s @ cb.row_conductance)
