import json
from importlib import resources

import numpy as np
import pytest
from scipy import signal

from mtjsnn.device import sigmoid
from mtjsnn.mnist import bundled
from mtjsnn.network import (build_network, bundled_network, conv_matrix, forward_rates,
                            oracle_accuracy, pool_matrix)
from mtjsnn.snn import NeuronModel, build_hardware, simulate


def reference_forward(doc, img):
    """Dense oracle straight from the weight document."""
    a = img.reshape(doc["input_shape"])
    for spec in doc["layers"]:
        k = spec["kernel"]
        if spec["type"] == "subsample":
            c, h, w = a.shape
            a = a.reshape(c, h // k[0], k[0], w // k[1], k[1]).mean(axis=(2, 4))
        elif spec["type"] == "conv":
            wt = np.array(spec["weights"]).reshape(k)
            out = np.stack([sum(signal.correlate(a[i], wt[o, i], mode="valid") for i in range(k[1]))
                            + spec["bias"][o] for o in range(k[0])])
            a = sigmoid(out)
        else:
            wt = np.array(spec["weights"]).reshape(k)
            a = sigmoid(wt @ a.ravel() + np.array(spec["bias"]))
    return a.ravel()


def doc(name):
    return json.loads((resources.files("mtjsnn") / "data" / f"{name}.json").read_text())


@pytest.mark.parametrize("name", ["lenet6-12", "lenet4-8"])
def test_forward_matches_dense_oracle(name):
    d = doc(name)
    net = build_network(d)
    x, _ = bundled("test")
    out = forward_rates(net, x[:3])[-1]
    for k in range(3):
        np.testing.assert_allclose(out[k], reference_forward(d, x[k]), rtol=0, atol=1e-12)


def test_conv_matrix_against_scipy(rng):
    kern = rng.normal(size=(3, 2, 3, 3))
    img = rng.normal(size=(2, 8, 9))
    m, shape = conv_matrix(kern, (2, 8, 9))
    out = (m.T @ img.ravel()).reshape(shape)
    ref = np.stack([sum(signal.correlate(img[i], kern[o, i], mode="valid") for i in range(2))
                    for o in range(3)])
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_pool_matrix(rng):
    a = rng.normal(size=(2, 4, 6))
    m, shape = pool_matrix((2, 4, 6))
    ref = a.reshape(2, 2, 2, 3, 2).mean(axis=(2, 4))
    np.testing.assert_allclose((m.T @ a.ravel()).reshape(shape), ref, rtol=1e-13)
    with pytest.raises(ValueError):
        pool_matrix((1, 5, 4))


def test_reference_architecture_sizes():
    net = bundled_network("lenet6-12")
    assert net.layer_sizes() == [3456, 768, 10]
    assert net.n_neurons == 4234
    assert net.n_inputs == 784


def test_invalid_documents():
    d = doc("lenet4-8")
    bad = json.loads(json.dumps(d))
    bad["layers"][0]["weights"] = bad["layers"][0]["weights"][:-1]
    with pytest.raises(ValueError):
        build_network(bad)
    bad = json.loads(json.dumps(d))
    bad["layers"] = bad["layers"][:-1]
    with pytest.raises(ValueError):
        build_network(bad)
    bad = json.loads(json.dumps(d))
    bad["extra"] = 1
    with pytest.raises(Exception):
        build_network(bad)


@pytest.mark.parametrize("mode", ["sync", "async"])
def test_rate_mode_reproduces_forward_pass(mode):
    net = bundled_network("lenet6-12")
    x, _ = bundled("test")
    nm = NeuronModel(mode, 90e-6 if mode == "sync" else 0.0, 12.9e-6 if mode == "sync" else 0.9e-6)
    hw = build_hardware(net, nm)
    steps = 4 if mode == "sync" else 400
    rec = simulate(hw, x[:4], steps, seed=0, rate_mode=True, record_rates=True, burn_in=steps - 1)
    for r, f in zip(rec.rates[1:], forward_rates(net, x[:4])):
        assert np.max(np.abs(r - f)) < 1e-6


def test_oracle_accuracy_of_shipped_weights():
    x, y = bundled("test")
    assert oracle_accuracy(bundled_network("lenet6-12"), x, y) > 0.95
    assert oracle_accuracy(bundled_network("lenet4-8"), x, y) > 0.7
