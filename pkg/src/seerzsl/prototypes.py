"""Per-class anchors in the aligned latent space and cosine classification.

Each candidate class gets an anchor: the mean posterior-mean embedding of
generated features for that class. A test sample is embedded once per
candidate class (paired with that class's semantics) and assigned to the
class whose anchor is nearest in cosine distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["cosine_distance", "ClassAnchors", "build_anchors", "classify", "distance_matrix"]


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v), in [0, 2]. Zero vectors have no direction and error."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance is undefined for zero vectors")
    return float(1.0 - (u @ v) / (nu * nv))


def _cosine_distance_rows(rows: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    na = np.linalg.norm(anchor)
    if na == 0.0 or (norms == 0.0).any():
        raise ValueError("cosine distance is undefined for zero vectors")
    return 1.0 - (rows @ anchor) / (norms * na)


@dataclass
class ClassAnchors:
    class_ids: np.ndarray
    vectors: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("anchors must be finite")
        if len(np.unique(self.class_ids)) != len(self.class_ids):
            raise ValueError("duplicate class id among anchors")

    def vector_for(self, class_id: int) -> np.ndarray:
        pos = np.flatnonzero(self.class_ids == class_id)
        if not pos.size:
            raise KeyError(f"no anchor for class {class_id}")
        return self.vectors[pos[0]]

    def save_csv(self, path: str | Path) -> None:
        table = np.concatenate([self.class_ids[:, None].astype(np.float64), self.vectors], axis=1)
        fmt = ["%d"] + ["%.17g"] * self.vectors.shape[1]
        np.savetxt(path, table, delimiter=",", fmt=fmt, newline="\n")

    @classmethod
    def load_csv(cls, path: str | Path, counts: np.ndarray | None = None) -> "ClassAnchors":
        table = np.loadtxt(path, delimiter=",", ndmin=2)
        ids = table[:, 0].astype(np.int64)
        vecs = table[:, 1:]
        if counts is None:
            counts = np.zeros(len(ids), dtype=np.int64)
        return cls(class_ids=ids, vectors=vecs, counts=counts)


def build_anchors(bundle, class_ids, per_class_samples: int = 100, seed: int = 0) -> ClassAnchors:
    """Mean latent embedding of generated features, one anchor per class.

    Every class consumes an identical epsilon stream (a fresh generator from
    the same seed), so classes with identical semantics get identical anchors
    and growing ``per_class_samples`` only extends the stream.
    """
    class_ids = np.sort(np.asarray(class_ids, dtype=np.int64))
    if per_class_samples < 1:
        raise ValueError("per_class_samples must be at least 1")
    vectors = []
    for y in class_ids:
        if y < 0 or y >= bundle.n_classes:
            raise KeyError(f"class {int(y)} has no semantics")
        rng = np.random.default_rng(seed)
        embeddings = bundle.embed_generated(int(y), per_class_samples, rng)
        vectors.append(embeddings.mean(axis=0))
    return ClassAnchors(
        class_ids=class_ids,
        vectors=np.stack(vectors),
        counts=np.full(len(class_ids), per_class_samples, dtype=np.int64),
    )


def distance_matrix(bundle, features: np.ndarray, candidate_classes, anchors: ClassAnchors,
                    rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Cosine distance of every sample's per-candidate embedding to that
    candidate's anchor; returns (sorted candidates, n x C matrix)."""
    candidates = np.sort(np.asarray(candidate_classes, dtype=np.int64))
    if candidates.size == 0:
        raise ValueError("empty candidate set")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    dists = np.empty((features.shape[0], candidates.size))
    for j, y in enumerate(candidates):
        emb = bundle.embed(features, int(y), rng=rng)
        dists[:, j] = _cosine_distance_rows(emb, anchors.vector_for(int(y)))
    return candidates, dists


def classify(bundle, features: np.ndarray, candidate_classes, anchors: ClassAnchors,
             mode: str = "nearest", rng: np.random.Generator | None = None) -> np.ndarray:
    """Assign each feature row to the candidate whose anchor is cosine-nearest.

    ``mode='nearest'`` minimizes cosine distance (maximum similarity);
    ``mode='farthest'`` keeps the literal least-similar reading for debugging.
    Ties resolve to the lowest class id.
    """
    if mode not in ("nearest", "farthest"):
        raise ValueError(f"unknown classification mode {mode!r}")
    candidates, dists = distance_matrix(bundle, features, candidate_classes, anchors, rng=rng)
    pick = np.argmin(dists, axis=1) if mode == "nearest" else np.argmax(dists, axis=1)
    return candidates[pick]
