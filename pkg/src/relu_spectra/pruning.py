"""Harmonic pruning: greedy rank reduction of an MLP's weight matrices.

Each iteration tries, for every layer, zeroing its smallest nonzero singular
value, keeps the candidate that hurts training accuracy least (ties go to
the lowest layer index), and rebuilds that layer as a double layer
``W = U_k sqrt(S_k)``, ``M = sqrt(S_k) V_k^T`` with inner dimension one less
than its current rank. Retraining runs whenever a configured criterion fires.
"""

from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .nnet import DoubleLayer, TrainConfig, accuracy, param_count, train
from .tensor_core import svd

RANK_TOL = 1e-9


@dataclass
class PruneConfig:
    retrain_batches: int = 50
    retrain_batch_size: int = 1024
    accuracy_drop_threshold: float = 0.005
    periodic_every: int = 10
    low_rank_trigger: int = 10
    stop: str = "exhaustion"  # or "max_iterations", "accuracy_floor"
    max_iterations: int = None
    accuracy_floor: float = None
    learning_rate: float = 1e-3
    seed: int = 0
    exempt_head: bool = False

    def __post_init__(self):
        if self.stop not in ("exhaustion", "max_iterations", "accuracy_floor"):
            raise ValueError(f"unknown stop criterion {self.stop!r}")
        if self.stop == "max_iterations" and (self.max_iterations is None or self.max_iterations < 0):
            raise ValueError("stop=max_iterations needs max_iterations >= 0")
        if self.stop == "accuracy_floor" and self.accuracy_floor is None:
            raise ValueError("stop=accuracy_floor needs accuracy_floor")
        if not 0.0 < self.accuracy_drop_threshold < 1.0:
            raise ValueError("accuracy_drop_threshold must lie in (0, 1)")
        if min(self.retrain_batches, self.retrain_batch_size, self.periodic_every) < 1:
            raise ValueError("retraining settings must be positive")


@dataclass
class HistoryEntry:
    iteration: int
    layer: int
    rank_after: int
    ranks: tuple
    train_acc: float
    test_acc: float
    params: int
    retrained: bool


@dataclass
class PruneState:
    model: object
    baseline_accuracy: float
    iteration: int = 0
    history: list = field(default_factory=list)
    last_scores: dict = field(default_factory=dict)

    def ranks(self):
        return tuple(layer_rank(layer) for layer in self.model.layers)

    def history_rows(self):
        for h in self.history:
            yield (h.iteration, h.layer, h.rank_after, h.train_acc, h.test_acc,
                   h.params, h.retrained, *h.ranks)

    def to_csv(self, path):
        n_layers = len(self.model.layers)
        header = ["iteration", "layer", "rank_after", "train_acc", "test_acc", "params",
                  "retrained"] + [f"rank_layer{i}" for i in range(n_layers)]
        write_csv(path, header, self.history_rows())


def layer_rank(layer):
    """Number of singular values of the layer's weight matrix above ``RANK_TOL``."""
    if min(layer.matrix().shape) == 0 or layer.inner_dim == 0:
        return 0
    return int(np.sum(svd(layer.matrix()).sigma > RANK_TOL))


def split_without_smallest(layer):
    """Double layer equal to ``layer`` with its smallest nonzero singular value removed."""
    dec = svd(layer.matrix())
    k = int(np.sum(dec.sigma > RANK_TOL)) - 1
    if k < 0:
        raise ValueError("layer already has rank 0")
    root = np.sqrt(dec.sigma[:k])
    w = dec.u[:, :k] * root
    m = root[:, None] * dec.v[:, :k].T
    return DoubleLayer(w, m, layer.bias.copy(), layer.activation, layer.slope)


def _split_arrays(data, which):
    if isinstance(data, dict):
        return data[which]
    return data.split(which)


def prunable_layers(model, config):
    count = len(model.layers) - (1 if config.exempt_head else 0)
    return [i for i in range(count) if layer_rank(model.layers[i]) >= 1]


def candidate_scores(state, data, config=None):
    """Accuracy change of the whole network per candidate layer.

    Returns ``{layer index: (delta, candidate layer)}``; ``state.model`` is
    not modified.
    """
    config = config or PruneConfig()
    x, y = _split_arrays(data, "train")
    current = accuracy(state.model, x, y)
    indices = prunable_layers(state.model, config)
    if not indices:
        raise ValueError("every prunable layer already has rank 0")
    scores = {}
    for i in indices:
        candidate = split_without_smallest(state.model.layers[i])
        trial = state.model.replace_layer(i, candidate)
        scores[i] = (accuracy(trial, x, y) - current, candidate)
    return scores


def prune_step(state, config, data):
    """Remove one rank from the layer whose pruning costs the least accuracy."""
    scores = candidate_scores(state, data, config)
    best = max(scores, key=lambda i: (scores[i][0], -i))
    model = state.model.replace_layer(best, scores[best][1])
    return PruneState(
        model=model,
        baseline_accuracy=state.baseline_accuracy,
        iteration=state.iteration + 1,
        history=list(state.history),
        last_scores={i: d for i, (d, _) in scores.items()},
    ), best


def retrain_due(state, config, train_acc):
    ranks = state.ranks()
    return (
        train_acc < state.baseline_accuracy - config.accuracy_drop_threshold
        or state.iteration % config.periodic_every == 0
        or min(ranks) < config.low_rank_trigger
    )


def maybe_retrain(state, config, data):
    """Retrain for ``retrain_batches`` batches if any criterion fires.

    Returns ``(state, retrained)``. Factors of double layers are trained
    separately, so no layer's rank can grow past its inner dimension.
    """
    x, y = _split_arrays(data, "train")
    if not retrain_due(state, config, accuracy(state.model, x, y)):
        return state, False
    tc = TrainConfig(
        batch_size=config.retrain_batch_size,
        num_steps=config.retrain_batches,
        learning_rate=config.learning_rate,
        seed=config.seed ^ state.iteration,
    )
    model, _ = train(state.model, (x, y), tc)
    return PruneState(model, state.baseline_accuracy, state.iteration,
                      list(state.history), state.last_scores), True


def _stop_now(state, config, train_acc):
    if config.stop == "max_iterations":
        return state.iteration >= config.max_iterations
    if config.stop == "accuracy_floor" and train_acc is not None:
        return train_acc < config.accuracy_floor
    return False


def harmonic_prune(model, data, config=None, callback=None):
    """Run harmonic pruning until the stop criterion or until every rank is 0.

    ``callback(state)``, if given, runs after each iteration's history entry
    is recorded (for example to serialize intermediate models).
    """
    config = config or PruneConfig()
    x, y = _split_arrays(data, "train")
    xt, yt = _split_arrays(data, "test")
    state = PruneState(model.copy(), baseline_accuracy=accuracy(model, x, y))
    train_acc = None
    while not _stop_now(state, config, train_acc):
        if not prunable_layers(state.model, config):
            break
        state, layer = prune_step(state, config, data)
        state, retrained = maybe_retrain(state, config, data)
        train_acc = accuracy(state.model, x, y)
        test_acc = accuracy(state.model, xt, yt) if len(yt) else float("nan")
        ranks = state.ranks()
        state.history.append(HistoryEntry(
            iteration=state.iteration,
            layer=layer,
            rank_after=ranks[layer],
            ranks=ranks,
            train_acc=train_acc,
            test_acc=test_acc,
            params=param_count(state.model),
            retrained=retrained,
        ))
        if callback is not None:
            callback(state)
    return state
