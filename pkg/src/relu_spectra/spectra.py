"""ReLU layer evaluation and numerical upper bounds on ReLU singular values.

For a layer ``x -> relu(A x + b)`` and a finite evaluation set ``X`` the
k-th (data-dependent) ReLU singular value is

    s_k = min_{rank L <= k} max_{x in X} |relu(A x + b) - relu(L x + b)|

It is intractable in general; :func:`rsv_upper_bound_curve` bounds it from
above by fitting a factorised ``L = W M`` with Adam and then scanning ``X``
for the worst-case residual.
"""

from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .errors import OptimizerDivergence
from .tensor_core import Rng, as_matrix, sample_sphere, svd

ACTIVATIONS = ("relu", "leaky_relu", "none")


def activate(z, activation="relu", slope=0.01):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "leaky_relu":
        return np.where(z > 0, z, slope * z)
    if activation == "none":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def activation_grad(z, activation="relu", slope=0.01):
    if activation == "relu":
        return (z > 0).astype(np.float64)
    if activation == "leaky_relu":
        return np.where(z > 0, 1.0, slope)
    if activation == "none":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {activation!r}")


@dataclass
class ReluLayer:
    weights: np.ndarray
    bias: np.ndarray = None
    activation: str = "relu"
    slope: float = 0.01

    def __post_init__(self):
        self.weights = as_matrix(self.weights, "weights")
        m = self.weights.shape[0]
        if self.bias is None:
            self.bias = np.zeros(m)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape != (m,):
            raise ValueError(f"bias has length {self.bias.size}, weights have {m} rows")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.activation == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ValueError("leaky ReLU slope must lie in (0, 1)")

    @property
    def shape(self):
        return self.weights.shape

    def __call__(self, x):
        return apply_layer(self, x)


@dataclass
class EvalSet:
    """Finite evaluation set, one sample per row."""

    points: np.ndarray
    origin: dict = field(default_factory=lambda: {"kind": "explicit"})

    def __post_init__(self):
        self.points = as_matrix(self.points, "points")
        if self.points.shape[0] < 1:
            raise ValueError("an evaluation set needs at least one point")

    def __len__(self):
        return self.points.shape[0]

    @property
    def radius(self):
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def sphere_eval_set(n, count=None, seed=0):
    """Uniform sample of the unit sphere; ``count`` defaults to ``256 * n``."""
    count = 256 * n if count is None else count
    pts = sample_sphere(Rng(seed), count, n)
    return EvalSet(pts, {"kind": "sphere_sample", "count": count, "seed": seed})


def _points(xs):
    if isinstance(xs, EvalSet):
        return xs.points
    return as_matrix(np.atleast_2d(xs), "evaluation set")


def apply_layer(layer, x):
    """``act(A x + b)`` for a vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    n = layer.weights.shape[1]
    if x.shape[-1] != n:
        raise ValueError(f"input has dimension {x.shape[-1]}, layer expects {n}")
    z = x @ layer.weights.T + layer.bias
    return activate(z, layer.activation, layer.slope)


def relu_mask(layer, x):
    """0/1 vector ``d`` with ``diag(d) A x = relu(A x)``; ties at zero map to 0."""
    if layer.activation != "relu" or np.any(layer.bias != 0):
        raise ValueError("relu_mask is defined only for bias-free pure ReLU layers")
    z = layer.weights @ np.asarray(x, dtype=np.float64)
    return (z > 0).astype(np.float64)


def lipschitz_gap(x, y, activation="relu", slope=0.01):
    """Return ``(|act x - act y|, |x - y|)``; the first never exceeds the second."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal shape")
    lhs = np.linalg.norm(activate(x, activation, slope) - activate(y, activation, slope))
    rhs = np.linalg.norm(x - y)
    return float(lhs), float(rhs)


def operator_norm_over_set(layer, xs):
    """``max_{x in X} |act(A x + b)|``, exact on the finite set."""
    pts = _points(xs)
    return float(np.max(np.linalg.norm(apply_layer(layer, pts), axis=1)))


@dataclass
class RsvConfig:
    """Adam settings for the rank-constrained fit.

    ``batch_size=None`` means full batch. With ``warm_start`` the factors
    start at the truncated SVD, which makes the reported bound never exceed
    the linear one on the sampled set.
    """

    steps: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = None
    seed: int = 0
    warm_start: bool = True
    eval_every: int = 50

    def as_dict(self):
        return {
            "steps": self.steps,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "warm_start": self.warm_start,
        }


@dataclass
class RsvBoundCurve:
    k_values: np.ndarray
    raw_bounds: np.ndarray
    monotone_bounds: np.ndarray
    linear_curve: np.ndarray
    radius: float
    optimizer_config: dict

    def rows(self):
        for k, raw, mono, sig in zip(
            self.k_values, self.raw_bounds, self.monotone_bounds, self.linear_curve
        ):
            yield int(k), float(raw), float(mono), float(sig)

    def to_csv(self, path):
        write_csv(path, ["k", "raw_bound", "monotone_bound", "linear_sigma"], self.rows())


def _worst_residual(target, pred):
    return float(np.sqrt(np.max(np.sum((target - pred) ** 2, axis=1))))


def _fit_rank_k(layer, pts, target, k, config, rng, factors):
    """Adam on ``sum |act(A x + b) - act(W M x + b)|^2``; return best max residual."""
    w, mm = factors
    act, slope, b = layer.activation, layer.slope, layer.bias
    n_pts = pts.shape[0]
    full_batch = config.batch_size is None or config.batch_size >= n_pts
    m_w = np.zeros_like(w)
    v_w = np.zeros_like(w)
    m_m = np.zeros_like(mm)
    v_m = np.zeros_like(mm)
    b1, b2 = config.beta1, config.beta2

    best = _worst_residual(target, activate(pts @ mm.T @ w.T + b, act, slope))
    order = rng.permutation(n_pts) if not full_batch else None
    cursor = 0
    for step in range(1, config.steps + 1):
        if full_batch:
            xb, tb = pts, target
        else:
            if cursor + config.batch_size > n_pts:
                order = rng.permutation(n_pts)
                cursor = 0
            idx = order[cursor : cursor + config.batch_size]
            cursor += config.batch_size
            xb, tb = pts[idx], target[idx]
        proj = xb @ mm.T
        z = proj @ w.T + b
        resid = activate(z, act, slope) - tb
        loss = float(np.sum(resid * resid))
        if not np.isfinite(loss):
            raise OptimizerDivergence(step, k)
        if full_batch:
            best = min(best, float(np.sqrt(np.max(np.sum(resid * resid, axis=1)))))
        dz = 2.0 * resid * activation_grad(z, act, slope)
        g_w = dz.T @ proj
        g_m = (w.T @ dz.T) @ xb

        m_w = b1 * m_w + (1 - b1) * g_w
        v_w = b2 * v_w + (1 - b2) * g_w * g_w
        m_m = b1 * m_m + (1 - b1) * g_m
        v_m = b2 * v_m + (1 - b2) * g_m * g_m
        corr1 = 1 - b1**step
        corr2 = 1 - b2**step
        w = w - config.learning_rate * (m_w / corr1) / (np.sqrt(v_w / corr2) + config.eps)
        mm = mm - config.learning_rate * (m_m / corr1) / (np.sqrt(v_m / corr2) + config.eps)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mm))):
            raise OptimizerDivergence(step, k)
        if not full_batch and step % config.eval_every == 0:
            best = min(best, _worst_residual(target, activate(pts @ mm.T @ w.T + b, act, slope)))
    best = min(best, _worst_residual(target, activate(pts @ mm.T @ w.T + b, act, slope)))
    return best


def rsv_upper_bound_curve(layer, xs, config=None):
    """Upper bounds on the (data-dependent) ReLU singular values of ``layer``.

    For every ``k`` in ``0 .. min(m, n) - 1`` this fits ``W M`` of inner
    dimension ``k`` and reports the smallest worst-case residual over ``X``
    seen among the optimiser iterates. ``k = 0`` is closed form (``L = 0``).
    ``monotone_bounds`` is the running minimum over ``k``.
    """
    config = config or RsvConfig()
    if config.steps < 1:
        raise ValueError("config.steps must be >= 1")
    pts = _points(xs)
    a = layer.weights
    m, n = a.shape
    r = min(m, n)
    target = apply_layer(layer, pts)
    dec = svd(a)
    root = np.sqrt(dec.sigma)
    base = Rng(config.seed)

    raw = np.empty(r)
    bias_only = activate(layer.bias, layer.activation, layer.slope)
    raw[0] = _worst_residual(target, bias_only[None, :])
    for k in range(1, r):
        rng = base.spawn(k)
        if config.warm_start:
            w = dec.u[:, :k] * root[:k]
            mm = root[:k, None] * dec.v[:, :k].T
        else:
            w = rng.normal((m, k), scale=1.0 / np.sqrt(k))
            mm = rng.normal((k, n), scale=1.0 / np.sqrt(n))
        raw[k] = _fit_rank_k(layer, pts, target, k, config, rng, (w, mm))
    return RsvBoundCurve(
        k_values=np.arange(r),
        raw_bounds=raw,
        monotone_bounds=np.minimum.accumulate(raw),
        linear_curve=dec.sigma.copy(),
        radius=float(np.max(np.linalg.norm(pts, axis=1))),
        optimizer_config=config.as_dict(),
    )
