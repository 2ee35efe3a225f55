import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from mtjsnn.crossbar import column_currents, configure, program, synapse_energy


def brute_force(w, spikes, g_o, dv):
    # signed MVM by explicit loops over crosspoints
    n_in, n_out = w.shape
    out = np.zeros(n_out)
    for j in range(n_out):
        for i in range(n_in):
            if spikes[i]:
                out[j] += dv * (g_o * w[i, j])
    return out


def test_matches_brute_force(rng):
    for _ in range(20):
        w = rng.normal(size=(15, 7)) * (rng.random((15, 7)) < 0.6)
        s = (rng.random(15) < 0.5).astype(float)
        cb = configure(program(w, g_o=5e-6), 3e-6)
        ref = brute_force(w, s, 5e-6, cb.delta_v)
        np.testing.assert_allclose(column_currents(cb, s), ref, rtol=1e-12, atol=1e-24)


def test_sign_mapping_and_off_state():
    w = np.array([[1.5, -2.0], [0.0, 0.5]])
    cb = program(w, g_o=2e-6, g_off=1e-9)
    gp, gm = cb.g_plus.toarray(), cb.g_minus.toarray()
    assert gp[0, 0] == pytest.approx(3e-6) and gm[0, 0] == pytest.approx(1e-9)
    assert gm[0, 1] == pytest.approx(4e-6) and gp[0, 1] == pytest.approx(1e-9)
    assert gp[1, 0] == 0 and gm[1, 0] == 0  # zero weight: no crosspoint
    np.testing.assert_allclose(program(w, g_o=2e-6).effective_weights(), w, rtol=1e-12)


def test_variation_zero_is_exact_and_seeded(rng):
    w = rng.normal(size=(30, 10))
    a = program(w, variation_sigma=0.0, seed=1)
    np.testing.assert_allclose(a.effective_weights(), w, rtol=1e-12)
    b = program(w, variation_sigma=0.2, seed=1)
    c = program(w, variation_sigma=0.2, seed=1)
    np.testing.assert_array_equal(b.g_plus.toarray(), c.g_plus.toarray())
    rel = b.effective_weights() / w - 1
    assert 0.15 < rel.std() < 0.25
    # variation never flips a sign
    assert np.all(np.sign(b.effective_weights()) * np.sign(w) >= 0)


def test_configure_sets_unit_drive():
    cb = configure(program(np.ones((1, 1)), g_o=5e-6), 12.9e-6)
    assert cb.delta_v == pytest.approx(12.9e-6 / 5e-6)
    assert column_currents(cb, np.ones(1))[0] == pytest.approx(12.9e-6)
    with pytest.raises(ValueError):
        configure(cb, 0.0)


def test_batch_and_supply_noise(rng):
    w = rng.normal(size=(8, 4))
    cb = configure(program(w), 1e-6)
    s = (rng.random((5, 8)) < 0.5).astype(float)
    batch = column_currents(cb, s)
    for k in range(5):
        np.testing.assert_allclose(batch[k], column_currents(cb, s[k]), rtol=1e-13)
    shifted = column_currents(cb, s[0], supply_noise=0.01)
    np.testing.assert_allclose(shifted, column_currents(cb, s[0]) * (cb.delta_v + 0.01) / cb.delta_v,
                               rtol=1e-12)
    rows = rng.normal(scale=0.01, size=8)
    expect = brute_force(w * ((cb.delta_v + rows) / cb.delta_v)[:, None], s[0], cb.g_o, cb.delta_v)
    np.testing.assert_allclose(column_currents(cb, s[0], supply_noise=rows), expect, rtol=1e-12)
    with pytest.raises(ValueError):
        column_currents(cb, s[0], supply_noise=np.zeros(3))
    with pytest.raises(ValueError):
        column_currents(cb, np.ones(9))


def test_synapse_energy():
    w = np.array([[1.0, -1.0], [2.0, 0.0]])
    cb = configure(program(w, g_o=1e-6), 1e-6)  # delta_v = 1 V
    e = synapse_energy(cb, np.array([1.0, 1.0]), 2e-9)
    # V^2 t sum(G) = 1 * 2e-9 * (1e-6 + 1e-6 + 2e-6)
    assert e == pytest.approx(8e-15)
    assert synapse_energy(cb, np.zeros(2), 1e-9) == 0.0
    with pytest.raises(ValueError):
        synapse_energy(cb, np.ones(2), -1.0)


def test_csv_export(tmp_path):
    cb = program(np.array([[1.0, 0.0], [-0.5, 2.0]]))
    cb.to_csv(tmp_path / "x.csv")
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[0] == "input,neuron,g_plus_S,g_minus_S"
    assert len(lines) == 4


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**31 - 1), st.floats(0.1, 10))
def test_linearity(n_in, n_out, seed, scale):
    r = np.random.default_rng(seed)
    w = r.normal(size=(n_in, n_out))
    cb = configure(program(sparse.csr_matrix(w)), 1e-6)
    s1, s2 = r.random(n_in), r.random(n_in)
    lhs = column_currents(cb, scale * s1 + s2)
    rhs = scale * column_currents(cb, s1) + column_currents(cb, s2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-20)
