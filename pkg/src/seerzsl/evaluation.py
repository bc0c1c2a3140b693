"""GZSL metrics, manifold precision/recall, and protocol drivers.

Accuracies follow the per-class averaging convention of the generalized
zero-shot protocol; an ``overall`` variant is available behind a flag.
Precision/recall use the k-nearest-neighbor radius estimator: a generated
point is precise if it falls within some real point's distance to its k-th
nearest real neighbor, and recall swaps the roles.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

__all__ = [
    "per_class_accuracy",
    "overall_accuracy",
    "harmonic_mean",
    "precision_recall",
    "MetricsReport",
    "ridge_nearest_mean_oracle",
    "ablate_run",
    "sweep_run",
    "worker_count",
]


def per_class_accuracy(predictions, labels, class_set) -> float:
    """Mean over classes of within-class top-1 accuracy, as a percentage."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    class_set = np.asarray(class_set, dtype=np.int64)
    if class_set.size == 0:
        raise ValueError("empty class set")
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must align")
    accs = []
    for y in class_set:
        mask = labels == y
        if not mask.any():
            raise ValueError(f"class {int(y)} has no samples")
        accs.append(float(np.mean(predictions[mask] == y)))
    return 100.0 * float(np.mean(accs))


def overall_accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must align")
    return 100.0 * float(np.mean(predictions == labels))


def harmonic_mean(seen: float, unseen: float) -> float:
    """2SU/(S+U); zero when both accuracies are zero."""
    if seen < 0 or unseen < 0:
        raise ValueError("accuracies must be non-negative")
    if seen + unseen == 0:
        return 0.0
    return 2.0 * seen * unseen / (seen + unseen)


def _knn_radii(points: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point in the set."""
    d2 = np.maximum(
        (points**2).sum(axis=1)[:, None]
        + (points**2).sum(axis=1)[None, :]
        - 2.0 * points @ points.T,
        0.0,
    )
    np.fill_diagonal(d2, np.inf)
    part = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return np.sqrt(part)


def precision_recall(real_set: np.ndarray, generated_set: np.ndarray, k: int = 3) -> tuple[float, float]:
    """k-NN-radius precision/recall of a generated set against a real set."""
    real = np.atleast_2d(np.asarray(real_set, dtype=np.float64))
    gen = np.atleast_2d(np.asarray(generated_set, dtype=np.float64))
    if real.shape[1] != gen.shape[1]:
        raise ValueError("real and generated sets must share a dimension")
    if k < 1 or k >= real.shape[0] or k >= gen.shape[0]:
        raise ValueError(f"k={k} must be positive and below both set sizes")
    cross2 = np.maximum(
        (real**2).sum(axis=1)[:, None]
        + (gen**2).sum(axis=1)[None, :]
        - 2.0 * real @ gen.T,
        0.0,
    )
    cross = np.sqrt(cross2)  # real x generated
    real_radii = _knn_radii(real, k)
    gen_radii = _knn_radii(gen, k)
    precision = float((cross <= real_radii[:, None]).any(axis=0).mean())
    recall = float((cross <= gen_radii[None, :]).any(axis=1).mean())
    return precision, recall


@dataclass
class MetricsReport:
    """Everything a run reports; serializes losslessly to metrics.json."""

    seen_accuracy: float
    unseen_accuracy: float
    harmonic: float
    conventional_unseen: float
    per_class: dict[str, float]
    precision: float
    recall: float
    loss_curves: dict[str, list[float]]
    config: dict
    seed: int
    wall_clock_s: float
    stage_order: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name, value in (("seen", self.seen_accuracy), ("unseen", self.unseen_accuracy),
                            ("harmonic", self.harmonic)):
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} accuracy {value} outside [0, 100]")
        expected = harmonic_mean(self.seen_accuracy, self.unseen_accuracy)
        if abs(expected - self.harmonic) > 1e-9:
            raise ValueError("harmonic mean inconsistent with seen/unseen accuracies")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MetricsReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def ridge_nearest_mean_oracle(dataset, split, ridge: float = 1e-2) -> dict[str, float]:
    """Nearest-class-mean baseline with means regressed from attributes.

    Fits a ridge map from class attributes to the empirical feature means of
    the seen classes, predicts a mean for every class, and classifies test
    samples by nearest predicted mean. Serves as the quality yardstick for the
    generative pipeline on synthetic data.
    """
    feats, labels = dataset.features, dataset.labels
    seen = split.seen_classes
    a_seen = dataset.attributes[seen]
    means = np.stack([
        feats[split.train_seen_idx][labels[split.train_seen_idx] == y].mean(axis=0)
        for y in seen
    ])
    a1 = np.concatenate([a_seen, np.ones((len(seen), 1))], axis=1)
    w = np.linalg.solve(a1.T @ a1 + ridge * np.eye(a1.shape[1]), a1.T @ means)
    all_a1 = np.concatenate([dataset.attributes, np.ones((dataset.n_classes, 1))], axis=1)
    predicted_means = all_a1 @ w

    def nearest(x_rows):
        d = ((x_rows[:, None, :] - predicted_means[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1)

    s_pred = nearest(feats[split.test_seen_idx])
    u_pred = nearest(feats[split.test_unseen_idx])
    s_acc = per_class_accuracy(s_pred, labels[split.test_seen_idx], seen)
    u_acc = per_class_accuracy(u_pred, labels[split.test_unseen_idx], split.unseen_classes)
    return {"S": s_acc, "U": u_acc, "H": harmonic_mean(s_acc, u_acc)}


def worker_count(n_jobs: int) -> int:
    """Parallel width for independent runs, capped by SEER_THREADS."""
    cap = os.environ.get("SEER_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def _run_for_sweep(args):
    from .pipeline import train_full

    config, out_dir = args
    _, report = train_full(config, out_dir=out_dir)
    return report


def ablate_run(config, drop: str, seed: int, out_dir: str | Path | None = None) -> MetricsReport:
    """Full pipeline run with one stage's outputs replaced by isotropic noise.

    ``drop`` is one of ``vae``, ``wgan``, ``cvae``, or ``none`` (identical to
    the unablated pipeline). The substituted noise keeps downstream training
    active. Ambiguity note: single published ablation numbers do not say which
    accuracy they quote, so the report carries seen, unseen, harmonic, and
    conventional-unseen together.
    """
    from .pipeline import train_full

    if drop not in ("vae", "wgan", "cvae", "none"):
        raise ValueError(f"unknown stage {drop!r}; expected vae, wgan, cvae, or none")
    run_config = config.replace(ablate=None if drop == "none" else drop, seed=seed)
    _, report = train_full(run_config, out_dir=out_dir)
    return report


def sweep_run(config, grid: dict[str, list], seeds, out_dir: str | Path) -> list[MetricsReport]:
    """One full run per grid point and seed; writes runs.csv under out_dir.

    Grid keys are RunConfig field names (for example beta_vae, beta_cvae,
    lambda_guidance, z_dim). Independent runs execute in parallel processes,
    capped by the SEER_THREADS environment variable.
    """
    if not grid:
        raise ValueError("empty sweep grid")
    for key, values in grid.items():
        if not values:
            raise ValueError(f"no values for grid axis {key!r}")
        for v in values:
            probe = config.replace(**{key: v})
            probe.validate()

    axes = sorted(grid)
    points: list[dict] = [{}]
    for key in axes:
        points = [dict(p, **{key: v}) for p in points for v in grid[key]]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, point in enumerate(points):
        for seed in seeds:
            run_config = config.replace(seed=int(seed), **point)
            jobs.append((run_config, out_dir / f"run_{i:03d}_seed{seed}"))

    width = worker_count(len(jobs))
    if width > 1:
        with ProcessPoolExecutor(max_workers=width) as pool:
            reports = list(pool.map(_run_for_sweep, jobs))
    else:
        reports = [_run_for_sweep(job) for job in jobs]

    header = axes + ["seed", "S", "U", "H", "precision", "recall"]
    lines = [",".join(header)]
    for (run_config, _), report in zip(jobs, reports):
        cells = [repr(getattr(run_config, key)) for key in axes]
        cells += [str(run_config.seed)]
        cells += [f"{report.seen_accuracy:.6f}", f"{report.unseen_accuracy:.6f}",
                  f"{report.harmonic:.6f}", f"{report.precision:.6f}", f"{report.recall:.6f}"]
        lines.append(",".join(cells))
    (out_dir / "runs.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return reports
