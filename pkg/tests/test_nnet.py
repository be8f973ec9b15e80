import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relu_spectra.datasets import synth_blobs
from relu_spectra.errors import InsufficientSamplesError, OptimizerDivergence
from relu_spectra.nnet import (
    DenseLayer,
    DoubleLayer,
    LayerSpec,
    MlpModel,
    TrainConfig,
    accuracy,
    build_mlp,
    cross_entropy,
    double_p_product_init,
    double_p_variance,
    forward,
    glorot_init,
    layer_inputs,
    layer_param_count,
    load_model,
    loss_and_grads,
    model_from_json,
    model_to_json,
    param_count,
    predict_proba,
    save_model,
    split_by_correctness,
    train,
)
from relu_spectra.tensor_core import Rng, singular_value_curve


def toy_model(seed=0, double=True, activation="relu"):
    rng = Rng(seed)
    hidden = [DenseLayer(rng.normal((4, 3)), rng.normal(4), activation, 0.1)]
    if double:
        hidden.append(DoubleLayer(rng.normal((3, 2)), rng.normal((2, 4)), rng.normal(3),
                                  activation, 0.1))
    n = hidden[-1].out_dim
    head = DenseLayer(rng.normal((2, n)), rng.normal(2), "none")
    return MlpModel(hidden, head)


def numeric_grads(model, x, y, h=1e-5):
    out = []
    for layer in model.layers:
        entry = {}
        for name in layer.param_names:
            arr = getattr(layer, name)
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = cross_entropy(forward(model, x)[1], y)
                arr[idx] = old - h
                down = cross_entropy(forward(model, x)[1], y)
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            entry[name] = g
        out.append(entry)
    return out


class TestInit:
    def test_glorot_variance(self):
        rng = Rng(0)
        samples = np.concatenate([glorot_init(100, 100, rng).ravel() for _ in range(100)])
        assert samples.var() == pytest.approx(0.02, rel=0.05)

    def test_glorot_deterministic(self):
        assert np.array_equal(glorot_init(3, 1, Rng(2)), glorot_init(3, 1, Rng(2)))

    def test_factor_variance_closed_form(self):
        assert double_p_variance(50, 50, 10) == pytest.approx(math.sqrt(0.4 / 100))
        assert double_p_variance(30, 50, 10, "m+n") == pytest.approx(math.sqrt(0.4 / 80))

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_factor_entry_variance(self, p):
        n = k = m = 20
        rng = Rng(p)
        ws = np.concatenate([double_p_product_init(m, n, k, p, rng)[0].ravel() for _ in range(2500)])
        assert ws.var() == pytest.approx(math.sqrt((4 / k) / (2 * n)), rel=0.1)
        assert abs(ws.mean()) <= 3 * ws.std() / math.sqrt(ws.size)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_product_variance(self, p):
        rng = Rng(10 + p)
        vals = []
        for _ in range(200):
            w, mm, b = double_p_product_init(50, 50, 10, p, rng)
            vals.append((w @ mm).ravel())
            assert np.all(b == 0)
        assert np.concatenate(vals).var() == pytest.approx(0.04, rel=0.1)

    def test_rank_bound(self):
        w, mm, _ = double_p_product_init(8, 6, 3, 2, Rng(3))
        assert np.sum(singular_value_curve(w @ mm) > 1e-9) <= 3

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            double_p_product_init(4, 4, 5, 1, Rng(0))
        with pytest.raises(ValueError):
            double_p_product_init(4, 4, 2, 0, Rng(0))


class TestForward:
    def test_identity_layer(self):
        model = MlpModel([DenseLayer(np.eye(2), np.zeros(2))], DenseLayer(np.eye(2), np.zeros(2), "none"))
        acts, _ = forward(model, [[-1.0, 2.0]])
        assert np.array_equal(acts[0], [[0.0, 2.0]])

    def test_double_identity_matches_single(self):
        single = MlpModel([DenseLayer(np.eye(3), np.zeros(3))], DenseLayer(np.ones((2, 3)), np.zeros(2), "none"))
        double = single.replace_layer(0, DoubleLayer(np.eye(3), np.eye(3), np.zeros(3)))
        x = Rng(0).normal((5, 3))
        assert np.allclose(forward(single, x)[1], forward(double, x)[1])

    def test_zero_model_uniform(self):
        model = MlpModel([DenseLayer(np.zeros((3, 2)), np.zeros(3))],
                         DenseLayer(np.zeros((4, 3)), np.zeros(4), "none"))
        p = predict_proba(model, Rng(1).normal((6, 2)))
        assert np.allclose(p, 0.25)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(toy_model(), np.zeros((1, 5)))

    def test_layer_inputs(self):
        model = toy_model()
        x = Rng(2).normal((3, 3))
        ins = layer_inputs(model, x)
        assert len(ins) == len(model.layers)
        assert np.array_equal(ins[0], x)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_softmax_normalised(self, seed):
        p = predict_proba(toy_model(seed), 10 * Rng(seed).normal((8, 3)))
        assert np.abs(p.sum(axis=1) - 1).max() <= 1e-12


class TestLoss:
    def test_uniform_logits(self):
        assert cross_entropy(np.zeros((1, 2)), np.array([0])) == pytest.approx(math.log(2))

    def test_confident_logits(self):
        assert cross_entropy(np.array([[1e4, 0.0]]), np.array([0])) == pytest.approx(0.0, abs=1e-12)

    def test_large_logits_stable(self):
        loss = cross_entropy(np.array([[1000.0, -1000.0]]), np.array([1]))
        assert loss == pytest.approx(2000.0)

    @pytest.mark.parametrize("activation", ["relu", "leaky_relu"])
    def test_gradient_check(self, activation):
        model = toy_model(3, activation=activation)
        assert param_count(model) <= 100
        x = Rng(4).normal((6, 3))
        y = np.array([0, 1, 1, 0, 1, 0])
        _, grads = loss_and_grads(model, x, y)
        num = numeric_grads(model, x, y)
        for g_layer, n_layer in zip(grads, num):
            for name in g_layer:
                g, n = g_layer[name], n_layer[name]
                assert np.abs(g - n).max() <= 1e-6 * max(1.0, np.abs(n).max())

    def test_labels_out_of_range(self):
        with pytest.raises(ValueError):
            loss_and_grads(toy_model(), np.zeros((1, 3)), np.array([5]))


class TestTraining:
    def test_separable_blobs(self):
        data = synth_blobs(2, 2, 200, 6.0, seed=0)
        model = build_mlp(2, [LayerSpec(8)], 2, Rng(1))
        trained, _ = train(model, data, TrainConfig(num_steps=2000, seed=2))
        assert accuracy(trained, data.split("train")) >= 0.99

    def test_zero_learning_rate(self):
        data = synth_blobs(2, 2, 20, 3.0, seed=0)
        model = build_mlp(2, [LayerSpec(4)], 2, Rng(1))
        trained, cks = train(model, data, TrainConfig(num_steps=5, learning_rate=0.0, checkpoint_every=1))
        assert model_to_json(trained) == model_to_json(model)
        assert len({model_to_json(c.model) for c in cks}) == 1

    def test_deterministic(self):
        data = synth_blobs(3, 2, 30, 3.0, seed=0)
        model = build_mlp(2, [LayerSpec(5, rank=2)], 3, Rng(1))
        cfg = TrainConfig(num_steps=50, seed=9)
        assert model_to_json(train(model, data, cfg)[0]) == model_to_json(train(model, data, cfg)[0])

    def test_checkpoint_schedule(self):
        data = synth_blobs(2, 2, 20, 3.0, seed=0)
        model = build_mlp(2, [LayerSpec(4)], 2, Rng(1))
        _, cks = train(model, data, TrainConfig(num_steps=25, checkpoint_every=10))
        assert [c.step for c in cks] == [0, 10, 20, 25]

    def test_divergence(self):
        data = synth_blobs(2, 2, 20, 3.0, seed=0)
        model = build_mlp(2, [LayerSpec(4)], 2, Rng(1))
        model.head.weights *= 1e300
        with pytest.raises(OptimizerDivergence):
            train(model, data, TrainConfig(num_steps=3, learning_rate=1e300))

    def test_double_layer_rank_preserved(self):
        data = synth_blobs(3, 4, 40, 3.0, seed=0)
        model = build_mlp(4, [LayerSpec(6, rank=2)], 3, Rng(1))
        trained, _ = train(model, data, TrainConfig(num_steps=100))
        assert np.sum(singular_value_curve(trained.layers[0].matrix()) > 1e-9) <= 2


class TestEvaluation:
    def test_perfect_classifier_shortfall(self):
        data = synth_blobs(2, 2, 50, 20.0, seed=0)
        model = build_mlp(2, [LayerSpec(8)], 2, Rng(1))
        model, _ = train(model, data, TrainConfig(num_steps=1000))
        x, y = data.split("train")
        assert accuracy(model, x, y) == 1.0
        with pytest.raises(InsufficientSamplesError) as info:
            split_by_correctness(model, x, y, 5)
        assert info.value.shortfall == 5

    def test_random_guessing(self):
        rng = Rng(5)
        x = rng.normal((4000, 3))
        y = (rng.uniform(4000) > 0.5).astype(int)
        model = build_mlp(3, [LayerSpec(4)], 2, Rng(6))
        acc = accuracy(model, x, y)
        assert abs(acc - 0.5) <= 3 * math.sqrt(0.25 / 4000)

    def test_disjoint_subsets(self):
        rng = Rng(7)
        x = rng.normal((300, 3))
        y = (rng.uniform(300) > 0.5).astype(int)
        model = build_mlp(3, [LayerSpec(4)], 2, Rng(8))
        good, bad = split_by_correctness(model, x, y, 40, Rng(9))
        assert len(good) == len(bad) == 40
        assert not set(good.origin["indices"]) & set(bad.origin["indices"])


class TestParamCount:
    def test_published_architectures(self):
        dims = [3072, 100, 100, 100]
        double = sum(layer_param_count(dims[i + 1], dims[i], r) for i, r in enumerate([18, 8, 6]))
        single = sum(layer_param_count(dims[i + 1], dims[i]) for i in range(3))
        assert double + layer_param_count(10, 100) == 61_206
        assert single + layer_param_count(10, 100) == 328_510

    def test_model_count_matches_formula(self):
        model = build_mlp(3072, [LayerSpec(100, 18), LayerSpec(100, 8), LayerSpec(100, 6)], 10, Rng(0))
        assert param_count(model) == 61_206

    def test_threshold_sweep(self):
        for m in range(1, 31):
            for n in range(1, 31):
                for k in range(1, min(m, n) + 1):
                    cheaper = layer_param_count(m, n, k) < layer_param_count(m, n)
                    assert cheaper == (k * (m + n) < m * n)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        model = toy_model(11)
        save_model(model, tmp_path / "m.json", {"seed": 1, "step": 7})
        loaded, meta = load_model(tmp_path / "m.json")
        assert meta == {"seed": 1, "step": 7}
        for a, b in zip(model.layers, loaded.layers):
            assert a.kind == b.kind
            for name in a.param_names:
                assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_zero_rank_layer(self):
        model = toy_model(12).replace_layer(1, DoubleLayer(np.zeros((3, 0)), np.zeros((0, 4)), np.zeros(3)))
        loaded, _ = model_from_json(model_to_json(model))
        assert loaded.layers[1].w.shape == (3, 0)
        assert param_count(loaded) == param_count(model)

    def test_version_checked(self):
        text = model_to_json(toy_model()).replace('"format_version": 1', '"format_version": 99')
        with pytest.raises(ValueError):
            model_from_json(text)
