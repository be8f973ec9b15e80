"""Harmonic pruning of an MLP trained on data with a planted rank-2 structure.

Writes prune_history.csv and prune_history.svg to the current directory.

Run: python demos/04_harmonic_pruning.py
"""

from relu_spectra import (
    LayerSpec,
    PruneConfig,
    Rng,
    TrainConfig,
    build_mlp,
    harmonic_prune,
    param_count,
    synth_lowrank,
    train,
)
from relu_spectra.report import report_csv

data = synth_lowrank(rank=2, n_dim=6, samples=2000, noise=0.0, seed=0)
model = build_mlp(6, [LayerSpec(8), LayerSpec(8)], 3, Rng(0))
model, _ = train(model, data, TrainConfig(batch_size=64, num_steps=4000))
print("parameters before pruning:", param_count(model))

state = harmonic_prune(model, data, PruneConfig(learning_rate=3e-3))
print(f"baseline train accuracy {state.baseline_accuracy:.4f}")
print("iter layer  ranks        train   test    params")
for h in state.history:
    print(f"{h.iteration:4d} {h.layer:5d}  {str(h.ranks):12s} {h.train_acc:.4f}  {h.test_acc:.4f} {h.params:6d}")

# Accuracy stays near the baseline until some layer drops below rank 2.
state.to_csv("prune_history.csv")
report_csv("prune_history.csv", "prune_history.svg", x="iteration", y=["train_acc", "test_acc"],
           title="harmonic pruning")
