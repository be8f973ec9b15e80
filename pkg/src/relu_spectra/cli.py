"""Batch experiment driver: ``relu-spectra <train|rsv|gmw|prune|report>``.

Settings come from a flat ``key = value`` text file (``#`` starts a
comment); ``--seed``, ``--data-dir`` and ``--out`` override the matching
keys. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import glob
import os
import sys
from pathlib import Path

from . import datasets as ds
from .csvio import write_csv
from .errors import DataError, NumericError
from .meanwidth import gmw_set
from .nnet import (
    LayerSpec,
    TrainConfig,
    accuracy,
    build_mlp,
    cross_entropy,
    forward,
    layer_inputs,
    load_model,
    save_model,
    split_by_correctness,
    train,
)
from .pruning import PruneConfig, harmonic_prune
from .report import report_csv
from .spectra import EvalSet, RsvConfig, rsv_upper_bound_curve
from .tensor_core import Rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "seed": "0",
    "out": "out",
    "data_dir": "",
    # data
    "dataset": "blobs",
    "num_classes": "3",
    "n_dim": "4",
    "per_class": "200",
    "separation": "8.0",
    "label_noise": "0.0",
    "rank": "2",
    "samples": "1000",
    "noise": "0.0",
    "test_fraction": "0.2",
    "train_images": "",
    "train_labels": "",
    "test_images": "",
    "test_labels": "",
    "csv_path": "",
    "label_column": "",
    "binarize_column": "",
    "standardize": "false",
    "cifar_train": "",
    "cifar_test": "",
    # model / training
    "hidden": "20,20,20",
    "ranks": "",
    "activation": "relu",
    "slope": "0.01",
    "init": "glorot",
    "p": "1",
    "denominator": "n+n",
    "steps": "2000",
    "batch_size": "32",
    "learning_rate": "0.001",
    "checkpoint_every": "0",
    # probes
    "checkpoint": "",
    "checkpoints": "",
    "subset_size": "",
    "num_g": "100",
    "rsv_steps": "2000",
    "rsv_learning_rate": "0.001",
    "rsv_warm_start": "true",
    # pruning
    "retrain_batches": "50",
    "retrain_batch_size": "1024",
    "accuracy_drop_threshold": "0.005",
    "periodic_every": "10",
    "low_rank_trigger": "10",
    "stop": "exhaustion",
    "max_iterations": "",
    "accuracy_floor": "",
    "exempt_head": "false",
    # report
    "inputs": "",
    "x": "",
    "y": "",
    "group": "",
    "window": "1",
    "title": "",
}

# seed offsets per purpose; every derived seed is a function of the master seed
SEED_PURPOSE = {"data": 1, "init": 2, "train": 3, "subset": 4, "rsv": 5, "gmw": 6, "prune": 7}


class UsageError(Exception):
    pass


class ExperimentConfig:
    """Typed view of the flat key-value configuration."""

    def __init__(self, values):
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        self.values = {**DEFAULTS, **values}

    @classmethod
    def parse(cls, text):
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        return cls(values)

    def str(self, key):
        return self.values[key]

    def int(self, key):
        try:
            return int(self.values[key])
        except ValueError:
            raise UsageError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def float(self, key):
        try:
            return float(self.values[key])
        except ValueError:
            raise UsageError(f"{key} must be a number, got {self.values[key]!r}") from None

    def bool(self, key):
        value = self.values[key].lower()
        if value not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"{key} must be true/false, got {value!r}")
        return value in ("true", "1", "yes")

    def list(self, key):
        return [v.strip() for v in self.values[key].split(",") if v.strip()]

    def optional_int(self, key):
        return self.int(key) if self.values[key] else None

    def seed(self, purpose):
        return Rng(self.int("seed")).spawn(SEED_PURPOSE[purpose]).seed

    @property
    def out(self):
        return Path(self.values["out"])

    @property
    def data_dir(self):
        return self.values["data_dir"] or None


# ---------------------------------------------------------------- shared pieces


def _path(cfg, key):
    value = cfg.str(key)
    if not value:
        raise UsageError(f"dataset {cfg.str('dataset')!r} needs '{key}'")
    return ds.resolve_path(value, cfg.data_dir)


def load_dataset(cfg):
    data = _load_dataset(cfg)
    data.check_class_coverage()
    return data


def _load_dataset(cfg):
    kind = cfg.str("dataset")
    seed = cfg.seed("data")
    if kind == "blobs":
        return ds.synth_blobs(cfg.int("num_classes"), cfg.int("n_dim"), cfg.int("per_class"),
                              cfg.float("separation"), seed, cfg.float("label_noise"),
                              cfg.float("test_fraction"))
    if kind == "lowrank":
        return ds.synth_lowrank(cfg.int("rank"), cfg.int("n_dim"), cfg.int("samples"),
                                cfg.float("noise"), seed, cfg.optional_int("num_classes"),
                                cfg.float("test_fraction"))
    if kind == "idx":
        train_ds = ds.load_idx(_path(cfg, "train_images"), _path(cfg, "train_labels"), "train")
        if not cfg.str("test_images"):
            return train_ds
        test_ds = ds.load_idx(_path(cfg, "test_images"), _path(cfg, "test_labels"), "test")
        return ds.Dataset.concat(train_ds, test_ds)
    if kind == "cifar10":
        files = [ds.resolve_path(p, cfg.data_dir) for p in cfg.list("cifar_train")]
        if not files:
            raise UsageError("dataset 'cifar10' needs 'cifar_train'")
        data = ds.load_cifar10_binary(files, "train")
        tests = [ds.resolve_path(p, cfg.data_dir) for p in cfg.list("cifar_test")]
        if tests:
            data = ds.Dataset.concat(data, ds.load_cifar10_binary(tests, "test"))
        return data
    if kind == "csv":
        label = cfg.str("label_column") or None
        data = ds.load_csv_labeled(_path(cfg, "csv_path"), label,
                                   test_fraction=cfg.float("test_fraction"), seed=seed)
        if cfg.str("binarize_column"):
            data = ds.binarize_by_median(data, cfg.str("binarize_column"))
        if cfg.bool("standardize"):
            data = ds.standardize(data)
        return data
    raise UsageError(f"unknown dataset {kind!r}")


def layer_specs(cfg):
    widths = [int(w) for w in cfg.list("hidden")]
    ranks = cfg.list("ranks")
    if ranks and len(ranks) != len(widths):
        raise UsageError("'ranks' must list one entry per hidden layer")
    specs = []
    for i, width in enumerate(widths):
        rank = int(ranks[i]) if ranks and int(ranks[i]) > 0 else None
        specs.append(LayerSpec(width, rank, cfg.str("activation"), cfg.float("slope")))
    return specs


def _checkpoint_path(cfg):
    value = cfg.str("checkpoint")
    return Path(value) if value else cfg.out / "model.json"


def _checkpoint_list(cfg):
    items = cfg.list("checkpoints")
    if not items:
        items = [str(cfg.out / "checkpoints" / "step_*.json")]
    paths = []
    for item in items:
        matches = sorted(glob.glob(item))
        paths.extend(matches if matches else [item])
    return [Path(p) for p in paths]


def _subset_size(cfg):
    return cfg.optional_int("subset_size")


# ---------------------------------------------------------------- commands


def cmd_train(cfg):
    data = load_dataset(cfg)
    model = build_mlp(data.n_features, layer_specs(cfg), data.num_classes,
                      Rng(cfg.seed("init")), cfg.str("init"), cfg.int("p"),
                      cfg.str("denominator"))
    tc = TrainConfig(batch_size=cfg.int("batch_size"), num_steps=cfg.int("steps"),
                     learning_rate=cfg.float("learning_rate"), seed=cfg.seed("train"),
                     checkpoint_every=cfg.int("checkpoint_every"))
    model, checkpoints = train(model, data, tc)
    x, y = data.split("train")
    xt, yt = data.split("test")
    rows = []
    for ck in checkpoints:
        loss = cross_entropy(forward(ck.model, x)[1], y)
        test_acc = accuracy(ck.model, xt, yt) if len(yt) else float("nan")
        rows.append((ck.step, loss, accuracy(ck.model, x, y), test_acc))
        save_model(ck.model, cfg.out / "checkpoints" / f"step_{ck.step:08d}.json",
                   {"seed": cfg.int("seed"), "step": ck.step})
    save_model(model, cfg.out / "model.json",
               {"seed": cfg.int("seed"), "step": checkpoints[-1].step})
    write_csv(cfg.out / "metrics.csv", ["step", "loss", "train_acc", "test_acc"], rows)
    return rows


def cmd_rsv(cfg):
    model, _ = load_model(_checkpoint_path(cfg))
    data = load_dataset(cfg)
    x, y = data.split("train")
    subsets = split_by_correctness(model, x, y, _subset_size(cfg), Rng(cfg.seed("subset")),
                                   data.name)
    rsv_cfg = RsvConfig(steps=cfg.int("rsv_steps"), learning_rate=cfg.float("rsv_learning_rate"),
                        warm_start=cfg.bool("rsv_warm_start"), seed=cfg.seed("rsv"))
    summary = []
    curves = {}
    for subset in subsets:
        label = subset.origin["subset"]
        inputs = layer_inputs(model, subset.points)
        for i, layer in enumerate(model.hidden):
            curve = rsv_upper_bound_curve(layer.as_relu_layer(), EvalSet(inputs[i]), rsv_cfg)
            curve.to_csv(cfg.out / f"rsv_layer{i + 1}_{label}.csv")
            curves[(i + 1, label)] = curve
            summary.append((i + 1, label, float(curve.monotone_bounds.max()), curve.radius,
                            float(curve.linear_curve[0])))
    write_csv(cfg.out / "rsv_summary.csv",
              ["layer", "subset", "max_bound", "input_radius", "sigma0"], summary)
    return curves


def cmd_gmw(cfg):
    data = load_dataset(cfg)
    x, y = data.split("train")
    paths = _checkpoint_list(cfg)
    if not paths:
        raise DataError("no checkpoints found")
    rows = []
    for path in paths:
        model, meta = load_model(path)
        step = int(meta.get("step", 0))
        subsets = split_by_correctness(model, x, y, _subset_size(cfg),
                                       Rng(cfg.seed("subset")).spawn(step), data.name)
        for subset in subsets:
            label = subset.origin["subset"]
            # layer 0 is the input set, layer i the output of hidden layer i
            for layer, pts in enumerate(layer_inputs(model, subset.points)):
                est = gmw_set(pts, cfg.int("num_g"), Rng(cfg.seed("gmw")).spawn(layer))
                rows.append((step, layer, label, est.value, est.stderr))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    write_csv(cfg.out / "gmw_trace.csv", ["step", "layer", "subset", "gmw", "stderr"], rows)
    return rows


def cmd_prune(cfg):
    model, _ = load_model(_checkpoint_path(cfg))
    data = load_dataset(cfg)
    pc = PruneConfig(
        retrain_batches=cfg.int("retrain_batches"),
        retrain_batch_size=cfg.int("retrain_batch_size"),
        accuracy_drop_threshold=cfg.float("accuracy_drop_threshold"),
        periodic_every=cfg.int("periodic_every"),
        low_rank_trigger=cfg.int("low_rank_trigger"),
        stop=cfg.str("stop"),
        max_iterations=cfg.optional_int("max_iterations"),
        accuracy_floor=cfg.float("accuracy_floor") if cfg.str("accuracy_floor") else None,
        learning_rate=cfg.float("learning_rate"),
        seed=cfg.seed("prune"),
        exempt_head=cfg.bool("exempt_head"),
    )
    state = harmonic_prune(model, data, pc)
    save_model(state.model, cfg.out / "pruned_model.json",
               {"seed": cfg.int("seed"), "iteration": state.iteration})
    state.to_csv(cfg.out / "prune_history.csv")
    return state


def cmd_report(cfg):
    inputs = cfg.list("inputs")
    if not inputs:
        raise UsageError("report needs 'inputs' (comma-separated CSV paths)")
    outputs = []
    for item in inputs:
        path = Path(item)
        svg = cfg.out / (path.stem + ".svg")
        report_csv(path, svg, cfg.str("x") or None, cfg.list("y") or None,
                   tuple(cfg.list("group")), cfg.int("window"), cfg.str("title"))
        outputs.append(svg)
    return outputs


COMMANDS = {"train": cmd_train, "rsv": cmd_rsv, "gmw": cmd_gmw, "prune": cmd_prune,
            "report": cmd_report}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="relu-spectra", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--data-dir", help=f"data directory (fallback: ${ds.DATA_DIR_ENV})")
    parser.add_argument("--out", help="output directory (overrides config)")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        cfg = ExperimentConfig.parse(text)
        if args.seed is not None:
            cfg.values["seed"] = str(args.seed)
        if args.out:
            cfg.values["out"] = args.out
        if args.data_dir:
            cfg.values["data_dir"] = args.data_dir
        if not cfg.values["data_dir"] and os.environ.get(ds.DATA_DIR_ENV):
            cfg.values["data_dir"] = os.environ[ds.DATA_DIR_ENV]
        COMMANDS[args.command](cfg)
    except (UsageError, ValueError) as exc:
        print(f"relu-spectra: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"relu-spectra: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"relu-spectra: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
