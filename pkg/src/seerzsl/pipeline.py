"""End-to-end training orchestration and run-directory bookkeeping.

A run repeats, for a configured number of outer iterations, the stage
sequence semantic VAE -> guided feature WGAN -> aligning CVAE, each stage
resuming its own optimizer and learning-rate schedule. After the last
iteration it builds per-class anchors, scores the GZSL split, and writes the
config snapshot, model archive, anchors table, and metrics.json into the
output directory. A run that diverges leaves a FAILED marker instead of
metrics.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .align_cvae import AlignCvae, train_align_cvae
from .autodiff import NonFiniteError
from .bundle import ModelBundle
from .data import Dataset, SplitSpec, gzsl_split, load_dataset, load_split, make_synthetic, save_split
from .evaluation import (
    MetricsReport,
    harmonic_mean,
    overall_accuracy,
    per_class_accuracy,
    precision_recall,
)
from .feature_wgan import Critic, Generator, train_guidance_classifier, train_wgan
from .nn import Adam, TrainControls, schedule_step
from .prototypes import ClassAnchors, build_anchors, distance_matrix
from .semantic_vae import SemanticVae, train_semantic_vae

__all__ = ["RunConfig", "ConfigError", "PipelineError", "train_full", "evaluate_bundle"]


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Hyperparameters and data source of one training run."""

    data_dir: str | None = None
    synthetic: dict | None = None
    unseen_fraction: float = 0.25
    split_seed: int | None = None
    z_dim: int = 48
    beta_vae: float = 1.0
    beta_cvae: float = 1.0
    lambda_guidance: float = 1.0
    penalty_alpha: float = 10.0
    n_critic: int = 5
    generator_widths: tuple[int, ...] = (215, 516, 1024)
    vae_hidden: int = 256
    cvae_hidden: int = 512
    dropout: float = 0.1
    vae_epochs: int = 50
    wgan_epochs: int = 12
    cvae_epochs: int = 40
    guidance_epochs: int = 150
    outer_iterations: int = 3
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_decay: float = 0.97
    patience: int = 20
    outer_patience: int | None = None
    grad_clip: float | None = None
    retrain_guidance: bool = False
    mix_generated: float = 0.5
    anchor_samples: int = 100
    pr_neighbors: int = 3
    accuracy: str = "per-class"
    classify_mode: str = "nearest"
    export_embeddings: bool = False
    ablate: str | None = None
    seed: int = 0
    out_dir: str | None = None

    def validate(self) -> None:
        if (self.data_dir is None) == (self.synthetic is None):
            raise ConfigError("exactly one of data_dir or synthetic must be set")
        if self.z_dim < 2:
            raise ConfigError("z_dim must be at least 2")
        for name in ("beta_vae", "beta_cvae", "lambda_guidance", "penalty_alpha"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.outer_iterations < 1:
            raise ConfigError("outer_iterations must be at least 1")
        for name in ("vae_epochs", "wgan_epochs", "cvae_epochs", "guidance_epochs",
                     "batch_size", "n_critic", "anchor_samples", "pr_neighbors"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("lr_decay must lie in (0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if not 0.0 <= self.mix_generated <= 1.0:
            raise ConfigError("mix_generated must lie in [0, 1]")
        if not 0.0 < self.unseen_fraction < 1.0:
            raise ConfigError("unseen_fraction must lie in (0, 1)")
        if self.accuracy not in ("per-class", "overall"):
            raise ConfigError("accuracy must be 'per-class' or 'overall'")
        if self.classify_mode not in ("nearest", "farthest"):
            raise ConfigError("classify_mode must be 'nearest' or 'farthest'")
        if self.ablate not in (None, "vae", "wgan", "cvae"):
            raise ConfigError("ablate must be one of vae, wgan, cvae, or null")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["generator_widths"] = list(self.generator_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "generator_widths" in d:
            d["generator_widths"] = tuple(d["generator_widths"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n",
                              encoding="utf-8")


def _load_run_data(config: RunConfig) -> tuple[Dataset, SplitSpec]:
    split_seed = config.seed if config.split_seed is None else config.split_seed
    if config.synthetic is not None:
        spec = dict(config.synthetic)
        dataset = make_synthetic(
            n_classes=int(spec.get("classes", 20)),
            n_per_class=int(spec.get("per_class", 50)),
            sem_dim=int(spec.get("sem_dim", 16)),
            visual_dim=int(spec.get("visual_dim", 64)),
            noise_sigma=float(spec.get("noise_sigma", 0.1)),
            seed=int(spec.get("seed", 0)),
        )
        split = gzsl_split(dataset, config.unseen_fraction, split_seed)
        return dataset, split
    directory = Path(config.data_dir)
    dataset = load_dataset(directory)
    split_path = directory / "split.json"
    if split_path.exists():
        split = load_split(split_path)
    else:
        split = gzsl_split(dataset, config.unseen_fraction, split_seed)
    return dataset, split


def _fit_bundle(features: np.ndarray, labels: np.ndarray, attributes: np.ndarray,
                seen_classes: np.ndarray, config: RunConfig,
                seed_seq: np.random.SeedSequence) -> tuple[ModelBundle, dict, list[str]]:
    """Train the three stages in sequence; returns bundle, curves, stage log."""
    streams = seed_seq.spawn(7)
    init_rng = np.random.default_rng(streams[0])
    vae_rng = np.random.default_rng(streams[1])
    guide_rng = np.random.default_rng(streams[2])
    wgan_rng = np.random.default_rng(streams[3])
    cvae_rng = np.random.default_rng(streams[4])
    synth_rng = np.random.default_rng(streams[5])
    val_rng = np.random.default_rng(streams[6])

    if config.outer_patience is not None:
        # hold out 10% of the training samples to validate each outer iteration
        order = val_rng.permutation(len(labels))
        n_val = max(1, len(labels) // 10)
        val_idx, fit_idx = order[:n_val], order[n_val:]
        val_features, val_labels = features[val_idx], labels[val_idx]
        features, labels = features[fit_idx], labels[fit_idx]

    visual_dim = features.shape[1]
    sem_dim = attributes.shape[1]
    attr_seen = attributes[seen_classes]
    attr_mean = attr_seen.mean(axis=0)
    attr_std = attr_seen.std(axis=0)
    attr_std = np.where(attr_std < 1e-12, 1.0, attr_std)

    bundle = ModelBundle(
        vae=SemanticVae(sem_dim, config.z_dim, config.vae_hidden, config.dropout, rng=init_rng),
        generator=Generator(config.z_dim, visual_dim, config.generator_widths, rng=init_rng),
        critic=Critic(visual_dim, tuple(reversed(config.generator_widths)), rng=init_rng),
        cvae=AlignCvae(visual_dim, sem_dim, config.cvae_hidden, config.dropout, rng=init_rng),
        attributes=np.array(attributes),
        attr_mean=attr_mean,
        attr_std=attr_std,
        ablate=config.ablate,
    )
    controls = {
        name: TrainControls(base_lr=config.learning_rate, decay=config.lr_decay,
                            patience=config.patience)
        for name in ("vae", "generator", "critic", "cvae")
    }
    outer_controls = TrainControls(base_lr=config.learning_rate, decay=1.0,
                                   patience=config.outer_patience or 1)

    sem_rows = bundle.semantics_of(labels)
    curves: dict[str, list[float]] = {}
    stage_log: list[str] = []

    def extend(name: str, curve: dict[str, list[float]]):
        for key, values in curve.items():
            curves.setdefault(f"{name}_{key}", []).extend(values)

    for iteration in range(config.outer_iterations):
        if config.ablate != "vae":
            curve = train_semantic_vae(
                bundle.vae, sem_rows, beta=config.beta_vae, epochs=config.vae_epochs,
                batch_size=config.batch_size, controls=controls["vae"],
                adam=bundle.optimizers["vae"], rng=vae_rng,
                epoch_offset=bundle.epoch_offsets["vae"], clip=config.grad_clip,
            )
            bundle.epoch_offsets["vae"] += config.vae_epochs
            extend("vae", curve)
        stage_log.append("vae")

        if config.ablate != "wgan":
            needs_guidance = config.lambda_guidance > 0
            if needs_guidance and (bundle.guidance is None or config.retrain_guidance):
                bundle.guidance = train_guidance_classifier(
                    features, labels, rng=guide_rng, epochs=config.guidance_epochs,
                    batch_size=config.batch_size, patience=config.patience,
                )
                stage_log.append("guidance")
            result = train_wgan(
                bundle.generator, bundle.critic, bundle.guidance, features, labels,
                bundle.draw_latents, epochs=config.wgan_epochs,
                batch_size=config.batch_size, n_critic=config.n_critic,
                alpha=config.penalty_alpha, lam=config.lambda_guidance,
                controls=controls["critic"], gen_adam=bundle.optimizers["generator"],
                critic_adam=bundle.optimizers["critic"], rng=wgan_rng,
                epoch_offset=bundle.epoch_offsets["generator"], clip=config.grad_clip,
            )
            bundle.epoch_offsets["generator"] += config.wgan_epochs
            counters = result["counters"]
            if counters["critic_steps"] != config.n_critic * counters["generator_steps"]:
                raise PipelineError("critic/generator step ratio drifted from n_critic")
            extend("wgan", result["curve"])
        stage_log.append("wgan")

        if config.ablate != "cvae":
            gen_x = bundle.synthesize(labels, synth_rng)
            curve = train_align_cvae(
                bundle.cvae, features, sem_rows, gen_x, sem_rows,
                beta=config.beta_cvae, mix_generated=config.mix_generated,
                epochs=config.cvae_epochs, batch_size=config.batch_size,
                controls=controls["cvae"], adam=bundle.optimizers["cvae"],
                rng=cvae_rng, epoch_offset=bundle.epoch_offsets["cvae"],
                clip=config.grad_clip,
            )
            bundle.epoch_offsets["cvae"] += config.cvae_epochs
            extend("cvae", curve)
        stage_log.append("cvae")

        if config.outer_patience is not None and iteration < config.outer_iterations - 1:
            metric = _validation_accuracy(bundle, val_features, val_labels,
                                          seen_classes, config)
            curves.setdefault("outer_validation", []).append(metric)
            _, stop = schedule_step(outer_controls, iteration, metric)
            if stop:
                break

    return bundle, curves, stage_log


def _validation_accuracy(bundle: ModelBundle, features: np.ndarray, labels: np.ndarray,
                         seen_classes: np.ndarray, config: RunConfig) -> float:
    """Seen-class accuracy on held-out samples, the outer-loop stop metric."""
    anchors = build_anchors(bundle, seen_classes,
                            per_class_samples=min(25, config.anchor_samples),
                            seed=config.seed)
    _, dists = distance_matrix(bundle, features, seen_classes, anchors,
                               rng=np.random.default_rng(config.seed))
    pick = np.argmin if config.classify_mode == "nearest" else np.argmax
    pred = np.sort(np.asarray(seen_classes))[pick(dists, axis=1)]
    present = np.unique(labels)
    return per_class_accuracy(pred, labels, present)


def evaluate_bundle(bundle: ModelBundle, dataset: Dataset, split: SplitSpec,
                    config: RunConfig, eval_rng: np.random.Generator,
                    anchors: ClassAnchors | None = None) -> tuple[dict, ClassAnchors]:
    """GZSL accuracies, conventional unseen accuracy, and manifold coverage."""
    if anchors is None:
        anchors = build_anchors(bundle, np.arange(dataset.n_classes),
                                per_class_samples=config.anchor_samples, seed=config.seed)
    feats, labels = dataset.features, dataset.labels
    all_classes = np.arange(dataset.n_classes)

    cand_s, dist_s = distance_matrix(bundle, feats[split.test_seen_idx], all_classes,
                                     anchors, rng=eval_rng)
    cand_u, dist_u = distance_matrix(bundle, feats[split.test_unseen_idx], all_classes,
                                     anchors, rng=eval_rng)
    pick = np.argmin if config.classify_mode == "nearest" else np.argmax
    pred_seen = cand_s[pick(dist_s, axis=1)]
    pred_unseen = cand_u[pick(dist_u, axis=1)]
    unseen_cols = np.flatnonzero(np.isin(cand_u, split.unseen_classes))
    pred_conv = cand_u[unseen_cols[pick(dist_u[:, unseen_cols], axis=1)]]

    if config.accuracy == "per-class":
        s_acc = per_class_accuracy(pred_seen, labels[split.test_seen_idx], split.seen_classes)
        u_acc = per_class_accuracy(pred_unseen, labels[split.test_unseen_idx], split.unseen_classes)
        conv = per_class_accuracy(pred_conv, labels[split.test_unseen_idx], split.unseen_classes)
    else:
        s_acc = overall_accuracy(pred_seen, labels[split.test_seen_idx])
        u_acc = overall_accuracy(pred_unseen, labels[split.test_unseen_idx])
        conv = overall_accuracy(pred_conv, labels[split.test_unseen_idx])
    if conv < u_acc - 1e-9:
        raise PipelineError(
            "candidate restriction decreased unseen accuracy; argmin superset property violated"
        )

    per_class: dict[str, float] = {}
    seen_set = set(split.seen_classes.tolist())
    for y in all_classes:
        if y in seen_set:
            mask = labels[split.test_seen_idx] == y
            preds = pred_seen[mask]
        else:
            mask = labels[split.test_unseen_idx] == y
            preds = pred_unseen[mask]
        if mask.any():
            per_class[str(int(y))] = float(np.mean(preds == y)) * 100.0

    train_feats = feats[split.train_seen_idx]
    gen_feats = bundle.synthesize(labels[split.train_seen_idx], eval_rng)
    prec, rec = precision_recall(train_feats, gen_feats, k=config.pr_neighbors)

    metrics = {
        "seen_accuracy": s_acc,
        "unseen_accuracy": u_acc,
        "harmonic": harmonic_mean(s_acc, u_acc),
        "conventional_unseen": conv,
        "per_class": per_class,
        "precision": prec,
        "recall": rec,
    }
    return metrics, anchors


def _export_embeddings(bundle: ModelBundle, dataset: Dataset, split: SplitSpec,
                       path: Path, rng: np.random.Generator) -> None:
    tags = np.empty(dataset.n_samples, dtype=object)
    tags[split.train_seen_idx] = "train_seen"
    tags[split.test_seen_idx] = "test_seen"
    tags[split.test_unseen_idx] = "test_unseen"
    lines = []
    header = ["sample_id", "split", "class"] + [f"z{i}" for i in range(bundle.cvae.z_dim)]
    lines.append(",".join(header))
    for y in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == y)
        emb = bundle.embed(dataset.features[idx], y, rng=rng)
        for i, row in zip(idx, emb):
            cells = [str(int(i)), str(tags[i]), str(y)] + [f"{v:.17g}" for v in row]
            lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def train_full(config: RunConfig, out_dir: str | Path | None = None) -> tuple[ModelBundle, MetricsReport]:
    """Run the whole pipeline on the configured data; write run artifacts."""
    config.validate()
    start = time.perf_counter()
    target = Path(out_dir) if out_dir is not None else (
        Path(config.out_dir) if config.out_dir else None
    )
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
        config.save(target / "config.json")

    dataset, split = _load_run_data(config)
    seed_seq = np.random.SeedSequence(config.seed)
    fit_seq, eval_seq, export_seq = seed_seq.spawn(3)
    try:
        bundle, curves, stage_log = _fit_bundle(
            dataset.features[split.train_seen_idx],
            dataset.labels[split.train_seen_idx],
            dataset.attributes, split.seen_classes, config, fit_seq,
        )
        eval_rng = np.random.default_rng(eval_seq)
        metrics, anchors = evaluate_bundle(bundle, dataset, split, config, eval_rng)
    except (NonFiniteError, FloatingPointError) as err:
        if target is not None:
            (target / "FAILED").write_text(f"{type(err).__name__}: {err}\n", encoding="utf-8")
        raise PipelineError(f"training diverged: {err}") from err

    report = MetricsReport(
        **metrics,
        loss_curves=curves,
        config=config.to_dict(),
        seed=config.seed,
        wall_clock_s=time.perf_counter() - start,
        stage_order=stage_log,
    )
    if target is not None:
        bundle.save(target)
        anchors.save_csv(target / "anchors.csv")
        save_split(split, target / "split.json")
        report.save(target / "metrics.json")
        if config.export_embeddings:
            _export_embeddings(bundle, dataset, split, target / "embeddings.csv",
                               np.random.default_rng(export_seq))
    return bundle, report
