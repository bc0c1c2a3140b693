"""Dataset model, file-based loading, GZSL splitting, and synthetic generators.

Directory layout for a dataset (UTF-8, LF line endings):

* ``features.csv``   -- n rows, one sample per row, comma-separated floats
* ``labels.csv``     -- n rows, one 0-based integer class id per row
* ``attributes.csv`` -- C rows, one class-attribute vector per row
* ``classes.txt``    -- optional, C class names
* ``split.json``     -- optional, serialized :class:`SplitSpec`
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "DataError",
    "load_dataset",
    "save_dataset",
    "make_synthetic",
    "make_two_moons",
    "gzsl_split",
    "load_split",
    "save_split",
]


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    """Visual features, per-sample labels, and per-class attribute rows."""

    features: np.ndarray
    labels: np.ndarray
    attributes: np.ndarray
    class_names: list[str] = field(default_factory=list)
    ground_truth_map: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.attributes = np.asarray(self.attributes, dtype=np.float64)
        if self.features.ndim != 2 or self.attributes.ndim != 2:
            raise DataError("features and attributes must be matrices")
        if self.features.shape[0] == 0:
            raise DataError("dataset has no samples")
        if self.attributes.shape[0] < 2:
            raise DataError("dataset needs at least two classes")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must align one-to-one with feature rows")
        _reject_nan(self.features, "features")
        _reject_nan(self.attributes, "attributes")
        c = self.attributes.shape[0]
        if self.labels.min() < 0 or self.labels.max() >= c:
            bad = int(self.labels[(self.labels < 0) | (self.labels >= c)][0])
            raise DataError(f"label {bad} outside the {c} attribute rows")
        if not self.class_names:
            self.class_names = [f"class_{i}" for i in range(c)]
        if len(self.class_names) != c:
            raise DataError("class name count does not match attribute rows")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[0]

    @property
    def visual_dim(self) -> int:
        return self.features.shape[1]

    @property
    def sem_dim(self) -> int:
        return self.attributes.shape[1]


def _reject_nan(arr: np.ndarray, name: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataError(f"non-finite value in {name} at row {row + 1}, column {col + 1}")


@dataclass
class SplitSpec:
    """Seen/unseen class partition plus the per-sample GZSL partition."""

    seen_classes: np.ndarray
    unseen_classes: np.ndarray
    train_seen_idx: np.ndarray
    test_seen_idx: np.ndarray
    test_unseen_idx: np.ndarray

    def __post_init__(self):
        self.seen_classes = np.asarray(self.seen_classes, dtype=np.int64)
        self.unseen_classes = np.asarray(self.unseen_classes, dtype=np.int64)
        self.train_seen_idx = np.asarray(self.train_seen_idx, dtype=np.int64)
        self.test_seen_idx = np.asarray(self.test_seen_idx, dtype=np.int64)
        self.test_unseen_idx = np.asarray(self.test_unseen_idx, dtype=np.int64)
        if np.intersect1d(self.seen_classes, self.unseen_classes).size:
            raise DataError("seen and unseen class sets overlap")

    def to_dict(self) -> dict:
        return {
            "seen_classes": self.seen_classes.tolist(),
            "unseen_classes": self.unseen_classes.tolist(),
            "train_seen_idx": self.train_seen_idx.tolist(),
            "test_seen_idx": self.test_seen_idx.tolist(),
            "test_unseen_idx": self.test_unseen_idx.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(
            seen_classes=d["seen_classes"],
            unseen_classes=d["unseen_classes"],
            train_seen_idx=d["train_seen_idx"],
            test_seen_idx=d["test_seen_idx"],
            test_unseen_idx=d["test_unseen_idx"],
        )


def _load_matrix(path: Path, dtype) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing file {path}")
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)
    except ValueError as err:
        raise DataError(f"cannot parse {path.name}: {err}") from None
    return arr


def load_dataset(directory: str | Path) -> Dataset:
    """Load and cross-validate a dataset directory."""
    directory = Path(directory)
    features = _load_matrix(directory / "features.csv", np.float64)
    labels = _load_matrix(directory / "labels.csv", np.int64).reshape(-1)
    attributes = _load_matrix(directory / "attributes.csv", np.float64)
    names_path = directory / "classes.txt"
    names = (
        [line.strip() for line in names_path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if names_path.exists()
        else []
    )
    return Dataset(features=features, labels=labels, attributes=attributes, class_names=names)


def save_dataset(dataset: Dataset, directory: str | Path) -> None:
    """Write the directory format; %.17g keeps float64 round trips exact."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "features.csv", dataset.features, delimiter=",", fmt="%.17g", newline="\n")
    np.savetxt(directory / "labels.csv", dataset.labels[:, None], fmt="%d", newline="\n")
    np.savetxt(directory / "attributes.csv", dataset.attributes, delimiter=",", fmt="%.17g", newline="\n")
    (directory / "classes.txt").write_text("\n".join(dataset.class_names) + "\n", encoding="utf-8")


def make_synthetic(n_classes: int, n_per_class: int = 50, sem_dim: int = 16,
                   visual_dim: int = 64, noise_sigma: float = 0.1, seed: int = 0) -> Dataset:
    """Linear ground-truth manifold: class means are a fixed random map of attributes.

    Attributes are uniform on [0, 1]; features are the mapped class mean plus
    isotropic Gaussian noise. The map is kept on the dataset for oracle use.
    """
    if n_classes < 4 or sem_dim < 2:
        raise DataError("synthetic data needs at least 4 classes and 2 semantic dims")
    if n_per_class < 1 or visual_dim < 1 or noise_sigma < 0:
        raise DataError("invalid synthetic dataset sizes")
    rng = np.random.default_rng(seed)
    attributes = rng.uniform(0.0, 1.0, size=(n_classes, sem_dim))
    mapping = rng.normal(0.0, 1.0 / np.sqrt(sem_dim), size=(sem_dim, visual_dim))
    means = attributes @ mapping
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    noise = rng.normal(0.0, 1.0, size=(labels.size, visual_dim)) * noise_sigma
    features = means[labels] + noise
    return Dataset(features=features, labels=labels, attributes=attributes,
                   ground_truth_map=mapping)


def make_two_moons(n_samples: int, noise: float = 0.05, seed: int = 0) -> np.ndarray:
    """Two interleaved half circles in 2-D, a classic low-dimensional manifold."""
    rng = np.random.default_rng(seed)
    n_up = n_samples // 2
    n_down = n_samples - n_up
    t_up = rng.uniform(0.0, np.pi, size=n_up)
    t_down = rng.uniform(0.0, np.pi, size=n_down)
    upper = np.stack([np.cos(t_up), np.sin(t_up)], axis=1)
    lower = np.stack([1.0 - np.cos(t_down), 0.5 - np.sin(t_down)], axis=1)
    points = np.concatenate([upper, lower], axis=0)
    return points + rng.normal(0.0, noise, size=points.shape)


def gzsl_split(dataset: Dataset, unseen_fraction: float, seed: int) -> SplitSpec:
    """Partition classes into seen/unseen and hold out 20% of each seen class."""
    c = dataset.n_classes
    n_unseen = int(round(c * unseen_fraction))
    if n_unseen < 2 or c - n_unseen < 2:
        raise DataError(
            f"unseen fraction {unseen_fraction} leaves fewer than 2 classes on a side"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(c)
    unseen = np.sort(order[:n_unseen])
    seen = np.sort(order[n_unseen:])

    train_seen, test_seen, test_unseen = [], [], []
    unseen_set = set(unseen.tolist())
    for y in range(c):
        idx = np.flatnonzero(dataset.labels == y)
        if y in unseen_set:
            test_unseen.extend(idx.tolist())
            continue
        idx = idx[rng.permutation(idx.size)]
        n_test = max(1, int(np.floor(0.2 * idx.size))) if idx.size else 0
        test_seen.extend(idx[:n_test].tolist())
        train_seen.extend(idx[n_test:].tolist())

    return SplitSpec(
        seen_classes=seen,
        unseen_classes=unseen,
        train_seen_idx=np.sort(np.array(train_seen, dtype=np.int64)),
        test_seen_idx=np.sort(np.array(test_seen, dtype=np.int64)),
        test_unseen_idx=np.sort(np.array(test_unseen, dtype=np.int64)),
    )


def save_split(split: SplitSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(split.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_split(path: str | Path) -> SplitSpec:
    return SplitSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
