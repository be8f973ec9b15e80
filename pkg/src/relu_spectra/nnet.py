"""Small multilayer perceptrons with single and double (factorised) layers.

A single layer computes ``act(A x + b)``; a double layer ``act(W M x + b)``
with ``W`` of shape ``(m, k)`` and ``M`` of shape ``(k, n)``, so its weight
matrix has rank at most ``k`` for as long as the factors are trained
separately. The model ends in a linear head producing logits; softmax is
applied only at inference time.
"""

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .csvio import atomic_write_text
from .errors import InsufficientSamplesError, OptimizerDivergence
from .spectra import ACTIVATIONS, EvalSet, ReluLayer, activate, activation_grad
from .tensor_core import as_rng

FORMAT_VERSION = 1


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"
    slope: float = 0.01

    kind = "single"
    param_names = ("weights", "bias")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @property
    def inner_dim(self):
        return min(self.weights.shape)

    def matrix(self):
        return self.weights

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def param_count(self):
        m, n = self.weights.shape
        return m * n + m

    def as_relu_layer(self):
        return ReluLayer(self.weights, self.bias, self.activation, self.slope)


@dataclass
class DoubleLayer:
    w: np.ndarray
    m: np.ndarray
    bias: np.ndarray
    activation: str = "relu"
    slope: float = 0.01

    kind = "double"
    param_names = ("w", "m", "bias")

    @property
    def in_dim(self):
        return self.m.shape[1]

    @property
    def out_dim(self):
        return self.w.shape[0]

    @property
    def inner_dim(self):
        return self.w.shape[1]

    def matrix(self):
        return self.w @ self.m

    def params(self):
        return {"w": self.w, "m": self.m, "bias": self.bias}

    def param_count(self):
        k = self.inner_dim
        return k * (self.out_dim + self.in_dim) + self.out_dim

    def as_relu_layer(self):
        return ReluLayer(self.matrix(), self.bias, self.activation, self.slope)


@dataclass
class LayerSpec:
    """Architecture entry: ``rank=None`` builds a single layer."""

    out_dim: int
    rank: int = None
    activation: str = "relu"
    slope: float = 0.01

    @property
    def kind(self):
        return "single" if self.rank is None else "double"


@dataclass
class MlpModel:
    hidden: list
    head: object

    @property
    def layers(self):
        return list(self.hidden) + [self.head]

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def num_classes(self):
        return self.head.out_dim

    def replace_layer(self, index, layer):
        """Copy of the model with ``layers[index]`` swapped for ``layer``."""
        layers = self.layers
        layers[index] = layer
        return MlpModel(hidden=layers[:-1], head=layers[-1])

    def copy(self):
        return copy.deepcopy(self)


@dataclass
class TrainConfig:
    batch_size: int = 32
    num_steps: int = 1000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.num_steps < 0 or self.learning_rate < 0:
            raise ValueError("batch_size must be >= 1, num_steps and learning_rate >= 0")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")


@dataclass
class Checkpoint:
    step: int
    model: MlpModel
    loss: float = float("nan")
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------- init


def glorot_init(m, n, rng):
    """``m x n`` matrix with i.i.d. ``N(0, 4 / (m + n))`` entries."""
    return rng.normal((m, n), scale=math.sqrt(4.0 / (m + n)))


def double_p_variance(m, n, k, denominator="n+n"):
    """Target variance of a single factor entry, ``sqrt((4/k) / (n+n))``."""
    denom = {"n+n": 2 * n, "m+n": m + n}[denominator]
    return math.sqrt((4.0 / k) / denom)


def _product_of_normals(rng, shape, p, variance):
    # each factor has variance variance**(1/p); the product has variance `variance`
    scale = math.sqrt(variance ** (1.0 / p))
    out = np.ones(shape)
    for _ in range(p):
        out *= rng.normal(shape, scale=scale)
    return out


def double_p_product_init(m, n, k, p, rng, denominator="n+n"):
    """Double-p-product initialisation of ``act(W M x + b)``.

    Entries of ``W`` and ``M`` are products of ``p`` zero-mean normals whose
    variance is ``((4/k) / (n+n)) ** (1 / (2p))``. Each entry then has
    variance ``sqrt((4/k) / (n+n))`` and an entry of ``W M`` sums ``k``
    products, giving the Glorot target ``4 / (n+n)``. Pass
    ``denominator="m+n"`` to use ``m + n`` instead.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 1 <= k <= min(m, n):
        raise ValueError(f"rank {k} must lie in [1, {min(m, n)}]")
    var = double_p_variance(m, n, k, denominator)
    w = _product_of_normals(rng, (m, k), p, var)
    mm = _product_of_normals(rng, (k, n), p, var)
    return w, mm, np.zeros(m)


def build_mlp(in_dim, specs, num_classes, rng=None, init="glorot", p=1, denominator="n+n"):
    """Materialise an MLP from ``LayerSpec`` entries plus a linear head.

    ``init="glorot"`` draws single layers from ``N(0, 4/(m+n))``;
    ``init="double_p"`` uses the double-p-product scheme for single layers
    too (``A = W M`` with ``k = min(m, n)``). Double layers always use it.
    """
    rng = as_rng(rng)
    hidden = []
    n = in_dim
    for spec in specs:
        if spec.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {spec.activation!r}")
        m = spec.out_dim
        if spec.rank is None:
            if init == "glorot":
                a = glorot_init(m, n, rng)
            else:
                w, mm, _ = double_p_product_init(m, n, min(m, n), p, rng, denominator)
                a = w @ mm
            hidden.append(DenseLayer(a, np.zeros(m), spec.activation, spec.slope))
        else:
            w, mm, b = double_p_product_init(m, n, spec.rank, p, rng, denominator)
            hidden.append(DoubleLayer(w, mm, b, spec.activation, spec.slope))
        n = m
    head = DenseLayer(glorot_init(num_classes, n, rng), np.zeros(num_classes), "none")
    return MlpModel(hidden=hidden, head=head)


# ---------------------------------------------------------------- forward


def _layer_pre(layer, x):
    if layer.kind == "double":
        return (x @ layer.m.T) @ layer.w.T + layer.bias
    return x @ layer.weights.T + layer.bias


def forward(model, x):
    """Return ``(hidden activations, logits)`` for a batch of rows ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.in_dim:
        raise ValueError(f"input has dimension {x.shape[1]}, model expects {model.in_dim}")
    acts = []
    h = x
    for layer in model.hidden:
        h = activate(_layer_pre(layer, h), layer.activation, layer.slope)
        acts.append(h)
    logits = activate(_layer_pre(model.head, h), model.head.activation, model.head.slope)
    return acts, logits


def layer_inputs(model, x):
    """Inputs seen by every layer (hidden layers and head) for the batch ``x``."""
    acts, _ = forward(model, x)
    return [np.atleast_2d(np.asarray(x, dtype=np.float64))] + acts


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model, x):
    return softmax(forward(model, x)[1])


def predict(model, x):
    return np.argmax(forward(model, x)[1], axis=1)


def cross_entropy(logits, labels):
    """Mean cross entropy computed from logits with log-sum-exp."""
    shift = logits.max(axis=1, keepdims=True)
    lse = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(labels.size), labels]))


def loss_and_grads(model, x, y):
    """Mean cross-entropy loss and its gradient for every parameter.

    Gradients come back as a list aligned with ``model.layers``; each entry
    maps parameter names (``weights``/``bias`` or ``w``/``m``/``bias``) to
    arrays of the parameter's shape.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.intp)
    layers = model.layers
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise ValueError("labels out of range")
    inputs, pres = [], []
    h = x
    for layer in layers:
        inputs.append(h)
        z = _layer_pre(layer, h)
        pres.append(z)
        h = activate(z, layer.activation, layer.slope)
    logits = h
    loss = cross_entropy(logits, y)

    batch = y.size
    delta = softmax(logits)
    delta[np.arange(batch), y] -= 1.0
    delta /= batch
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        dz = delta * activation_grad(pres[i], layer.activation, layer.slope)
        inp = inputs[i]
        if layer.kind == "double":
            proj = inp @ layer.m.T
            dz_w = dz @ layer.w
            grads[i] = {"w": dz.T @ proj, "m": dz_w.T @ inp, "bias": dz.sum(axis=0)}
            delta = dz_w @ layer.m
        else:
            grads[i] = {"weights": dz.T @ inp, "bias": dz.sum(axis=0)}
            delta = dz @ layer.weights
    return loss, grads


# ---------------------------------------------------------------- training


class Adam:
    """Adam with bias correction over a list of per-layer parameter dicts."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = learning_rate, beta1, beta2, eps
        self.t = 0
        self.moments = None

    def step(self, layers, grads):
        if self.moments is None:
            self.moments = [
                {name: (np.zeros_like(g), np.zeros_like(g)) for name, g in gl.items()}
                for gl in grads
            ]
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for layer, gl, ml in zip(layers, grads, self.moments):
            for name, g in gl.items():
                m1, m2 = ml[name]
                m1 = self.beta1 * m1 + (1 - self.beta1) * g
                m2 = self.beta2 * m2 + (1 - self.beta2) * g * g
                ml[name] = (m1, m2)
                update = self.lr * (m1 / c1) / (np.sqrt(m2 / c2) + self.eps)
                setattr(layer, name, getattr(layer, name) - update)


def _train_arrays(data):
    if isinstance(data, tuple):
        x, y = data
    else:
        x, y = data.split("train")
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.intp)


class BatchStream:
    """Seeded mini-batches; the sample order is reshuffled every epoch."""

    def __init__(self, size, batch_size, rng):
        self.size, self.batch_size, self.rng = size, min(batch_size, size), rng
        self.order = rng.permutation(size)
        self.cursor = 0

    def next(self):
        if self.cursor + self.batch_size > self.size:
            self.order = self.rng.permutation(self.size)
            self.cursor = 0
        idx = self.order[self.cursor : self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return idx


def train(model, data, config, num_steps=None, start_step=0):
    """Train a copy of ``model`` with Adam on the training split of ``data``.

    Returns ``(trained model, checkpoints)``. Checkpoints are deep copies of
    the model at step 0, at every multiple of ``checkpoint_every`` and at
    the final step.
    """
    x, y = _train_arrays(data)
    steps = config.num_steps if num_steps is None else num_steps
    model = model.copy()
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    batches = BatchStream(x.shape[0], config.batch_size, as_rng(config.seed))
    layers = model.layers
    checkpoints = [Checkpoint(start_step, model.copy())]
    loss = float("nan")
    for step in range(1, steps + 1):
        idx = batches.next()
        loss, grads = loss_and_grads(model, x[idx], y[idx])
        if not math.isfinite(loss):
            raise OptimizerDivergence(start_step + step)
        opt.step(layers, grads)
        for layer in layers:
            for arr in layer.params().values():
                if not np.all(np.isfinite(arr)):
                    raise OptimizerDivergence(start_step + step)
        every = config.checkpoint_every
        if (every and step % every == 0) or step == steps:
            checkpoints.append(Checkpoint(start_step + step, model.copy(), loss))
    return model, checkpoints


# ---------------------------------------------------------------- evaluation


def accuracy(model, x, y=None):
    """Fraction of correctly classified rows; accepts ``(x, y)`` or a Dataset split."""
    if y is None:
        x, y = _train_arrays(x)
    return float(np.mean(predict(model, x) == np.asarray(y)))


def split_by_correctness(model, x, y, subset_size=None, rng=None, name="data"):
    """Equal-size random subsets of correctly and incorrectly classified rows.

    ``subset_size=None`` uses ``min(#correct, #incorrect, 256)``.
    """
    rng = as_rng(rng)
    x = np.asarray(x, dtype=np.float64)
    hit = predict(model, x) == np.asarray(y)
    pools = {"correct": np.flatnonzero(hit), "incorrect": np.flatnonzero(~hit)}
    if subset_size is None:
        subset_size = min(pools["correct"].size, pools["incorrect"].size, 256)
    if subset_size < 1:
        short = "incorrect" if pools["incorrect"].size == 0 else "correct"
        raise InsufficientSamplesError(short, 0, 1)
    out = []
    for label in ("correct", "incorrect"):
        pool = pools[label]
        if pool.size < subset_size:
            raise InsufficientSamplesError(label, pool.size, subset_size)
        pick = np.sort(pool[rng.choice(pool.size, subset_size)])
        out.append(EvalSet(x[pick], {"kind": "dataset", "name": name, "subset": label,
                                     "indices": pick}))
    return tuple(out)


def param_count(model):
    return sum(layer.param_count() for layer in model.layers)


def layer_param_count(out_dim, in_dim, rank=None):
    """Parameters of a single layer (``rank=None``) or a rank-``rank`` double layer."""
    if rank is None:
        return out_dim * in_dim + out_dim
    return rank * (out_dim + in_dim) + out_dim


# ---------------------------------------------------------------- checkpoints


def _fmt_array(arr):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        return "[" + ", ".join(format(float(v), ".17g") for v in arr) + "]"
    return "[" + ", ".join(_fmt_array(row) for row in arr) + "]"


def _layer_doc(layer, arrays):
    doc = {
        "kind": layer.kind,
        "in_dim": layer.in_dim,
        "out_dim": layer.out_dim,
        "rank": layer.inner_dim if layer.kind == "double" else None,
        "activation": layer.activation,
        "slope": layer.slope,
        "params": {},
    }
    for name in layer.param_names:
        arr = getattr(layer, name)
        # zero-size factors keep their shape explicitly
        doc["params"][name] = {"shape": list(arr.shape), "values": f"@@{len(arrays)}@@"}
        arrays.append(arr)
    return doc


def model_to_json(model, metadata=None):
    """Versioned JSON text; floats written with 17 significant digits."""
    arrays = []
    doc = {
        "format_version": FORMAT_VERSION,
        "layers": [_layer_doc(layer, arrays) for layer in model.hidden],
        "head": _layer_doc(model.head, arrays),
        "metadata": metadata or {},
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    for i, arr in enumerate(arrays):
        text = text.replace(f'"@@{i}@@"', _fmt_array(arr) if arr.size else "[]", 1)
    return text + "\n"


def _layer_from_doc(doc):
    params = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        params[name] = np.array(entry["values"], dtype=np.float64).reshape(shape)
    act, slope = doc["activation"], float(doc["slope"])
    if doc["kind"] == "double":
        return DoubleLayer(params["w"], params["m"], params["bias"], act, slope)
    if doc["kind"] == "single":
        return DenseLayer(params["weights"], params["bias"], act, slope)
    raise ValueError(f"unknown layer kind {doc['kind']!r}")


def model_from_json(text):
    """Inverse of :func:`model_to_json`; returns ``(model, metadata)``."""
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    hidden = [_layer_from_doc(d) for d in doc["layers"]]
    return MlpModel(hidden=hidden, head=_layer_from_doc(doc["head"])), doc["metadata"]


def save_model(model, path, metadata=None):
    atomic_write_text(Path(path), model_to_json(model, metadata))


def load_model(path):
    return model_from_json(Path(path).read_text())
