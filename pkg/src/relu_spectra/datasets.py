"""Dataset container, file loaders (IDX, CIFAR-10 binary, CSV) and synthetic data.

Image pixels are scaled to ``[0, 1]`` by dividing bytes by 255. Tabular data
is left on its raw scale unless :func:`standardize` is applied, which uses
training-split statistics only. Datasets without a canonical split get an
80/20 train/test split from a seeded shuffle.
"""

import csv
import math
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatchError,
    CsvParseError,
    DataError,
    IdxMagicError,
    TruncatedPayloadError,
)
from .tensor_core import Rng, as_rng

DATA_DIR_ENV = "RELU_SPECTRA_DATA_DIR"
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3072


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    is_train: np.ndarray
    num_classes: int
    feature_names: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)
    # loaders set this for single files that need not cover every class
    partial: bool = False

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        is_train = np.asarray(self.is_train, dtype=bool)
        if feats.ndim != 2 or labels.shape != (feats.shape[0],) or is_train.shape != labels.shape:
            raise DataError("features, labels and split tags disagree in length")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"{self.name}: features contain NaN or Inf")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DataError(f"{self.name}: labels outside [0, {self.num_classes})")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "is_train", is_train)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not self.partial:
            self.check_class_coverage()

    def check_class_coverage(self):
        train_labels = self.labels[self.is_train]
        if train_labels.size:
            missing = sorted(set(range(self.num_classes)) - set(train_labels.tolist()))
            if missing:
                raise DataError(f"{self.name}: classes {missing} absent from train split")

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self):
        return self.features.shape[1]

    def split(self, which):
        """``(features, labels)`` of the ``"train"`` or ``"test"`` rows."""
        if which not in ("train", "test"):
            raise ValueError(f"unknown split {which!r}")
        mask = self.is_train if which == "train" else ~self.is_train
        return self.features[mask], self.labels[mask]

    @staticmethod
    def concat(first, second, name=None):
        if first.n_features != second.n_features:
            raise DataError("cannot concatenate datasets with different feature counts")
        return Dataset(
            name=name or first.name,
            features=np.vstack([first.features, second.features]),
            labels=np.concatenate([first.labels, second.labels]),
            is_train=np.concatenate([first.is_train, second.is_train]),
            num_classes=max(first.num_classes, second.num_classes),
            feature_names=first.feature_names,
            partial=first.partial and second.partial,
        )


def resolve_path(path, data_dir=None):
    """Resolve a relative data path against ``data_dir`` or ``$RELU_SPECTRA_DATA_DIR``."""
    path = Path(path)
    if path.is_absolute():
        return path
    base = data_dir or os.environ.get(DATA_DIR_ENV)
    return Path(base) / path if base else path


def random_split(count, test_fraction=0.2, seed=0):
    """Boolean train mask from a seeded shuffle; ``test_fraction`` of rows go to test."""
    order = Rng(seed).permutation(count)
    n_test = int(round(test_fraction * count))
    is_train = np.ones(count, dtype=bool)
    is_train[order[:n_test]] = False
    return is_train


# ---------------------------------------------------------------- IDX


def _read_idx(path, expected_magic):
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedPayloadError(path, len(data), 4)
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedPayloadError(path, len(data), header)
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(data) < header + size:
        raise TruncatedPayloadError(path, len(data), header + size)
    payload = np.frombuffer(data, dtype=np.uint8, count=size, offset=header)
    return payload.reshape(dims)


def load_idx(images_path, labels_path, split="train", num_classes=None, name="idx"):
    """MNIST-style IDX image/label pair; pixels scaled to ``[0, 1]``."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC).astype(np.intp)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images_path} holds {images.shape[0]} images but "
            f"{labels_path} holds {labels.shape[0]} labels"
        )
    feats = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    num_classes = num_classes or (int(labels.max()) + 1 if labels.size else 1)
    return Dataset(name, feats, labels, np.full(labels.size, split == "train"), num_classes,
                   partial=True)


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 ``images`` (count, rows, cols) and ``labels`` as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">I", IDX_IMAGES_MAGIC))
        fh.write(struct.pack(">3I", *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


# ---------------------------------------------------------------- CIFAR-10


def load_cifar10_binary(paths, split="train", name="cifar10"):
    """CIFAR-10 binary batches: records of 1 label byte plus 3072 pixel bytes."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    feats, labels = [], []
    for path in paths:
        data = Path(path).read_bytes()
        whole = len(data) // CIFAR_RECORD * CIFAR_RECORD
        if whole != len(data):
            raise TruncatedPayloadError(path, whole, whole + CIFAR_RECORD)
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        if records.size and records[:, 0].max() > 9:
            bad = int(np.argmax(records[:, 0] > 9))
            raise DataError(f"{path}: label byte {records[bad, 0]} > 9 in record {bad}")
        labels.append(records[:, 0].astype(np.intp))
        feats.append(records[:, 1:].astype(np.float64) / 255.0)
    feats = np.vstack(feats)
    labels = np.concatenate(labels)
    return Dataset(name, feats, labels, np.full(labels.size, split == "train"), 10, partial=True)


def write_cifar10_binary(path, images, labels):
    images = np.asarray(images, dtype=np.uint8).reshape(len(labels), 3072)
    records = np.hstack([np.asarray(labels, dtype=np.uint8)[:, None], images])
    Path(path).write_bytes(records.tobytes())


# ---------------------------------------------------------------- CSV


def load_csv_labeled(path, label_column, num_classes=None, test_fraction=0.2, seed=0,
                     name=None):
    """Numeric CSV with a header row.

    ``label_column`` (name or index) holds integer class labels; ``None``
    loads every column as a feature with placeholder labels, to be replaced
    by :func:`binarize_by_median`.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty CSV file")
    header, body = rows[0], [r for r in rows[1:] if r]
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise CsvParseError(path, i + 2, j + 1, cell) from None
            if not math.isfinite(values[i, j]):
                raise CsvParseError(path, i + 2, j + 1, cell)
    is_train = random_split(len(body), test_fraction, seed)
    name = name or Path(path).stem
    if label_column is None:
        return Dataset(name, values, np.zeros(len(body), dtype=np.intp), is_train, 1,
                       feature_names=header)
    j = header.index(label_column) if isinstance(label_column, str) else int(label_column)
    raw = values[:, j]
    if np.any(raw != np.round(raw)):
        raise DataError(f"{path}: label column {header[j]!r} is not integer-valued")
    labels = raw.astype(np.intp)
    feats = np.delete(values, j, axis=1)
    names = header[:j] + header[j + 1 :]
    num_classes = num_classes or (int(labels.max()) + 1 if labels.size else 1)
    return Dataset(name, feats, labels, is_train, num_classes, feature_names=names)


def write_csv_labeled(path, dataset, label_column="label"):
    names = list(dataset.feature_names) or [f"x{j}" for j in range(dataset.n_features)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def binarize_by_median(dataset, column):
    """Replace the labels by ``column > median(column over train rows)``.

    The column is removed from the features. Ties with the median map to 0.
    """
    names = list(dataset.feature_names)
    j = names.index(column) if isinstance(column, str) else int(column)
    target = dataset.features[:, j]
    median = float(np.median(target[dataset.is_train]))
    labels = (target > median).astype(np.intp)
    feats = np.delete(dataset.features, j, axis=1)
    num_classes = 2 if labels[dataset.is_train].any() else 1
    return Dataset(
        dataset.name, feats, labels, dataset.is_train, num_classes,
        feature_names=tuple(names[:j] + names[j + 1 :]) if names else (),
        metadata={**dataset.metadata, "median": median, "binarized_column": column},
    )


def standardize(dataset):
    """Per-column z-score using training-split mean and standard deviation."""
    train = dataset.features[dataset.is_train]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std[std == 0] = 1.0
    return replace(dataset, features=(dataset.features - mean) / std,
                   metadata={**dataset.metadata, "mean": mean, "std": std})


# ---------------------------------------------------------------- synthetic


def _blob_centers(num_classes, n_dim, separation):
    centers = np.zeros((num_classes, n_dim))
    if n_dim == 1 or num_classes == 1:
        centers[:, 0] = separation * np.arange(num_classes)
    else:
        # neighbouring centres on a circle are exactly `separation` apart
        radius = separation / (2.0 * math.sin(math.pi / num_classes)) if num_classes > 2 else separation / 2
        angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
        centers[:, 0] = radius * np.cos(angles)
        centers[:, 1] = radius * np.sin(angles)
    return centers


def synth_blobs(num_classes, n_dim, per_class, separation, seed, label_noise=0.0,
                test_fraction=0.2):
    """Isotropic unit-variance Gaussian blobs around well-separated centres.

    With ``label_noise > 0`` each label is, with that probability, replaced
    by a uniformly chosen different class.
    """
    rng = as_rng(seed)
    centers = _blob_centers(num_classes, n_dim, separation)
    labels = np.repeat(np.arange(num_classes), per_class)
    feats = centers[labels] + rng.normal((labels.size, n_dim))
    if label_noise > 0 and num_classes > 1:
        flip = rng.uniform(labels.size) <= label_noise
        shift = 1 + np.floor(rng.uniform(labels.size) * (num_classes - 1)).astype(np.intp)
        shift = np.minimum(shift, num_classes - 1)
        labels = np.where(flip, (labels + shift) % num_classes, labels)
    order = rng.permutation(labels.size)
    feats, labels = feats[order], labels[order]
    is_train = random_split(labels.size, test_fraction, rng.seed ^ 0x5EED)
    return Dataset("blobs", feats, labels, is_train, num_classes,
                   metadata={"centers": centers, "separation": separation,
                             "label_noise": label_noise})


def planted_lowrank_matrix(rank, n_dim, num_classes, rng):
    """``num_classes x n_dim`` matrix of rank ``rank``.

    For ``num_classes == rank + 1`` it is the centring matrix times ``Q``
    with orthonormal rows, so argmax classes are exactly balanced for
    isotropic inputs.
    """
    if num_classes == rank + 1 and num_classes <= n_dim:
        q, _ = np.linalg.qr(rng.normal((n_dim, num_classes)))
        centring = np.eye(num_classes) - 1.0 / num_classes
        return centring @ q.T
    left = rng.normal((num_classes, rank))
    right = rng.normal((rank, n_dim)) / math.sqrt(n_dim)
    return left @ right


def synth_lowrank(rank, n_dim, samples, noise, seed, num_classes=None, test_fraction=0.2):
    """Labels are ``argmax(P x + noise * e)`` for a planted rank-``rank`` map ``P``."""
    rng = as_rng(seed)
    num_classes = num_classes or rank + 1
    planted = planted_lowrank_matrix(rank, n_dim, num_classes, rng)
    feats = rng.normal((samples, n_dim))
    logits = feats @ planted.T + noise * rng.normal((samples, num_classes))
    labels = np.argmax(logits, axis=1)
    is_train = random_split(samples, test_fraction, rng.seed ^ 0x5EED)
    return Dataset("lowrank", feats, labels, is_train, num_classes,
                   metadata={"planted": planted, "rank": rank, "noise": noise})
