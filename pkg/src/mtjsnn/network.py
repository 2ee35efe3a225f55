"""Layered network description, weight-file ingestion and the deterministic sigmoid oracle.

Every weighted layer (conv or full) becomes one crossbar feeding one bank of
neurons.  A subsample layer has no neurons of its own: 2x2 average pooling is
folded into the following crossbar by giving each of the four pooled inputs a
quarter of the weight.  Trained biases are an extra, always-active input row.
"""
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np
from scipy import sparse

from .device import sigmoid

WEIGHTS_SCHEMA = {
    "type": "object",
    "required": ["layers", "scale"],
    "properties": {
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "input_shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                        "minItems": 3, "maxItems": 3},
        "name": {"type": "string"},
        "layers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["type", "kernel"],
                "properties": {
                    "type": {"enum": ["conv", "subsample", "full"]},
                    "kernel": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                    "weights": {"type": "array", "items": {"type": "number"}},
                    "bias": {"type": "array", "items": {"type": "number"}},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}


@dataclass
class Layer:
    """One crossbar plus neuron bank; ``weights`` has shape (n_in + 1, n_out), last row = bias."""

    kind: str
    weights: sparse.csr_matrix
    out_shape: tuple

    @property
    def n_in(self):
        return self.weights.shape[0] - 1

    @property
    def n_out(self):
        return self.weights.shape[1]


@dataclass
class NetworkSpec:
    layers: list
    input_shape: tuple = (1, 28, 28)
    scale: float = 1.0
    name: str = ""
    digest: str = field(default="", compare=False)

    def __post_init__(self):
        n = int(np.prod(self.input_shape))
        for i, layer in enumerate(self.layers):
            if layer.n_in != n:
                raise ValueError(f"layer {i} expects {layer.n_in} inputs, previous gives {n}")
            n = layer.n_out

    @property
    def n_inputs(self):
        return int(np.prod(self.input_shape))

    @property
    def n_outputs(self):
        return self.layers[-1].n_out

    @property
    def n_neurons(self):
        return sum(layer.n_out for layer in self.layers)

    def layer_sizes(self):
        return [layer.n_out for layer in self.layers]


def conv_matrix(kernel, in_shape):
    """Sparse (C_in*H*W, C_out*Ho*Wo) matrix of a stride-1 valid cross-correlation."""
    kernel = np.asarray(kernel, dtype=float)
    co, ci, kh, kw = kernel.shape
    c, h, w = in_shape
    if ci != c:
        raise ValueError(f"kernel expects {ci} channels, input has {c}")
    ho, wo = h - kh + 1, w - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError("kernel larger than input")
    o, i, a, b, y, x = np.meshgrid(np.arange(co), np.arange(ci), np.arange(kh), np.arange(kw),
                                   np.arange(ho), np.arange(wo), indexing="ij")
    rows = (i * h + y + a) * w + x + b
    cols = (o * ho + y) * wo + x
    vals = kernel[o, i, a, b]
    m = sparse.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                          shape=(c * h * w, co * ho * wo))
    return m.tocsr(), (co, ho, wo)


def pool_matrix(in_shape, k=(2, 2)):
    """Sparse (C*H*W, C*H/k*W/k) average-pooling matrix."""
    c, h, w = in_shape
    kh, kw = k
    if h % kh or w % kw:
        raise ValueError("pooling window must tile the feature map")
    ho, wo = h // kh, w // kw
    ch, y, x = np.meshgrid(np.arange(c), np.arange(h), np.arange(w), indexing="ij")
    rows = (ch * h + y) * w + x
    cols = (ch * ho + y // kh) * wo + x // kw
    vals = np.full(rows.size, 1.0 / (kh * kw))
    m = sparse.coo_matrix((vals, (rows.ravel(), cols.ravel())), shape=(c * h * w, c * ho * wo))
    return m.tocsr(), (c, ho, wo)


def _with_bias(m, bias):
    return sparse.vstack([m, sparse.csr_matrix(np.asarray(bias, dtype=float)[None, :])]).tocsr()


def build_network(doc):
    """NetworkSpec from a parsed weight document (see ``WEIGHTS_SCHEMA``)."""
    jsonschema.validate(doc, WEIGHTS_SCHEMA)
    scale = float(doc["scale"])
    shape = tuple(doc.get("input_shape", (1, 28, 28)))
    layers = []
    pending = None  # pooling matrix waiting for the next weighted layer
    for spec in doc["layers"]:
        kind, kern = spec["type"], tuple(spec["kernel"])
        if kind == "subsample":
            if len(kern) != 2:
                raise ValueError("subsample kernel must be [kh, kw]")
            p, shape = pool_matrix(shape, kern)
            pending = p if pending is None else (pending @ p).tocsr()
            continue
        w = np.asarray(spec.get("weights", []), dtype=float)
        if w.size != int(np.prod(kern)):
            raise ValueError(f"{kind} layer: {w.size} weights for kernel {list(kern)}")
        w = scale * w.reshape(kern)
        if kind == "conv":
            if len(kern) != 4:
                raise ValueError("conv kernel must be [out, in, kh, kw]")
            m, out_shape = conv_matrix(w, shape)
            n_out = m.shape[1]
            per_out = np.prod(out_shape[1:])
            bias_src = np.asarray(spec.get("bias", np.zeros(kern[0])), dtype=float)
            if bias_src.size != kern[0]:
                raise ValueError("conv bias needs one value per output channel")
            bias = np.repeat(scale * bias_src, per_out)
        else:
            if len(kern) != 2:
                raise ValueError("full kernel must be [out, in]")
            if kern[1] != int(np.prod(shape)):
                raise ValueError(f"full layer expects {kern[1]} inputs, previous gives {int(np.prod(shape))}")
            m = sparse.csr_matrix(w.T)
            out_shape = (kern[0],)
            n_out = kern[0]
            bias = scale * np.asarray(spec.get("bias", np.zeros(kern[0])), dtype=float)
            if bias.size != n_out:
                raise ValueError("full bias needs one value per output")
        if pending is not None:
            m = (pending @ m).tocsr()
            pending = None
        layers.append(Layer(kind, _with_bias(m, bias), out_shape))
        shape = out_shape
    if pending is not None:
        raise ValueError("network cannot end with a subsample layer")
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]
    return NetworkSpec(layers, tuple(doc.get("input_shape", (1, 28, 28))), scale,
                       doc.get("name", ""), digest)


def load_network(path):
    with open(path) as fh:
        return build_network(json.load(fh))


def bundled_network(name="lenet6-12"):
    ref = resources.files("mtjsnn") / "data" / f"{name}.json"
    return build_network(json.loads(ref.read_text()))


def with_bias(x):
    x = np.atleast_2d(x)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def drives(layer, a):
    """Pre-activations (in units of i_o) for input activations ``a`` of shape (batch, n_in)."""
    return (layer.weights.T @ with_bias(a).T).T


def forward_rates(net, images):
    """Deterministic sigmoid forward pass; list of activations per layer, each (batch, n)."""
    a = np.asarray(images, dtype=float).reshape(-1, net.n_inputs)
    out = []
    for layer in net.layers:
        a = sigmoid(drives(layer, a))
        out.append(a)
    return out


def oracle_accuracy(net, images, labels):
    out = forward_rates(net, images)[-1]
    return float(np.mean(np.argmax(out, axis=1) == np.asarray(labels)))
