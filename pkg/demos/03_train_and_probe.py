"""Train a small MLP on noisy blobs and probe each hidden layer.

Points the trained network classifies correctly and incorrectly are
compared layer by layer: the max RSV bound and the Gaussian mean width of
the propagated sets.

Run: python demos/03_train_and_probe.py
"""

from relu_spectra import (
    EvalSet,
    LayerSpec,
    Rng,
    RsvConfig,
    TrainConfig,
    accuracy,
    build_mlp,
    gmw_set,
    layer_inputs,
    rsv_upper_bound_curve,
    split_by_correctness,
    synth_blobs,
    train,
)

data = synth_blobs(3, 10, 500, 3.0, seed=0, label_noise=0.2)
model = build_mlp(10, [LayerSpec(20)] * 3, 3, Rng(0))
model, checkpoints = train(model, data, TrainConfig(num_steps=5000, checkpoint_every=1000))
x, y = data.split("train")
print("train accuracy", accuracy(model, x, y), " test accuracy", accuracy(model, *data.split("test")))

for subset in split_by_correctness(model, x, y, None, Rng(1)):
    inputs = layer_inputs(model, subset.points)
    print(f"\n{subset.origin['subset']} subset, {len(subset)} points")
    print("  input GMW", round(gmw_set(inputs[0], 500, Rng(2)).value, 3))
    for i, layer in enumerate(model.hidden):
        curve = rsv_upper_bound_curve(layer.as_relu_layer(), EvalSet(inputs[i]), RsvConfig(steps=200))
        width = gmw_set(inputs[i + 1], 500, Rng(3 + i)).value
        print(f"  layer {i + 1}: max RSV bound {curve.monotone_bounds.max():7.3f}   GMW {width:7.3f}")

# Widths over training, one checkpoint every 1000 steps.
print("\nstep  GMW of layer 3 on the training set")
for ck in checkpoints:
    print(f"{ck.step:5d}  {gmw_set(layer_inputs(ck.model, x[:256])[3], 200, Rng(9)).value:.3f}")
