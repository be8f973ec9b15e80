"""Nonlinear spectral measures of ReLU layers.

ReLU singular-value upper bounds, Gaussian mean widths of sets and
operators, small MLPs with rank-constrained double layers, and harmonic
pruning.
"""

from .datasets import (
    Dataset,
    binarize_by_median,
    load_cifar10_binary,
    load_csv_labeled,
    load_idx,
    standardize,
    synth_blobs,
    synth_lowrank,
)
from .errors import (
    ConvergenceError,
    DataError,
    InsufficientSamplesError,
    NumericError,
    OptimizerDivergence,
    ReluSpectraError,
)
from .meanwidth import (
    WidthEstimate,
    c_const,
    gmw_operator_general,
    gmw_operator_linear,
    gmw_set,
    hull_diff_lp,
    smw_set,
    sup_linear_over_hull_diff,
)
from .nnet import (
    DenseLayer,
    DoubleLayer,
    LayerSpec,
    MlpModel,
    TrainConfig,
    accuracy,
    build_mlp,
    double_p_product_init,
    forward,
    glorot_init,
    layer_inputs,
    load_model,
    loss_and_grads,
    param_count,
    save_model,
    split_by_correctness,
    train,
)
from .pruning import PruneConfig, PruneState, harmonic_prune
from .spectra import (
    EvalSet,
    ReluLayer,
    RsvBoundCurve,
    RsvConfig,
    apply_layer,
    lipschitz_gap,
    operator_norm_over_set,
    relu_mask,
    rsv_upper_bound_curve,
    sphere_eval_set,
)
from .tensor_core import (
    Rng,
    SvdResult,
    sample_gaussian_vector,
    sample_sphere,
    sample_sphere_vector,
    singular_value_curve,
    svd,
)

__version__ = "0.1.0"
