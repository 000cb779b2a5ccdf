"""Shared domain types, index conventions, deterministic RNG, and configuration.

Batch-local indices (0..B-1) are the common currency between the sampler,
the loss, and the trainer; dataset-level indices appear only in
``BatchView.sample_indices``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import similarity

ANCHOR_STRATEGIES = ("das", "ras", "bas")
IMAGE_STRATEGIES = ("rhdis", "ris", "bis")
COMBINATIONS = ("cartesian", "paired")
LABEL_SIMILARITY_KINDS = ("cosine", "jaccard")
DAS_REDUCTIONS = ("max", "min")


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream backed by the PCG64 bit generator.

    Identical seeds give identical streams across runs and across platforms
    (for a fixed numpy version); seed 0 is a valid, ordinary seed.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_label_vector(bits) -> np.ndarray:
    """Validate and normalize a multi-label annotation to a uint8 0/1 vector.

    Rejects non-binary entries and all-zero vectors (every sample must carry
    at least one class label).
    """
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"label vector must be one-dimensional, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("label vector entries must be 0 or 1")
    arr = arr.astype(np.uint8)
    if int(arr.sum()) == 0:
        raise ValueError("label vector must have at least one set bit")
    return arr


@dataclass(frozen=True)
class Sample:
    """One dataset item: opaque id, feature vector, and multi-label vector."""

    id: str
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ValueError(f"features must be one-dimensional, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise ValueError(f"sample {self.id!r} has non-finite feature values")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", as_label_vector(self.labels))


@dataclass(frozen=True)
class BatchView:
    """One mini-batch frozen for mining: embeddings, labels, and distances.

    ``dist_norm`` is ``dist_raw`` rescaled to [0, 1] by the batch min-max rule
    (off-diagonal statistics, zero diagonal).
    """

    sample_indices: np.ndarray
    embeddings: np.ndarray
    labels: np.ndarray
    dist_raw: np.ndarray
    dist_norm: np.ndarray

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @classmethod
    def from_embeddings(cls, sample_indices, embeddings, labels) -> "BatchView":
        emb = np.asarray(embeddings, dtype=np.float64)
        raw = similarity.pairwise_euclidean(emb)
        return cls(
            sample_indices=np.asarray(sample_indices, dtype=np.int64),
            embeddings=emb,
            labels=np.asarray(labels, dtype=np.uint8),
            dist_raw=raw,
            dist_norm=similarity.minmax_normalize(raw),
        )

    def distance(self, i: int, j: int) -> similarity.DistancePair:
        return similarity.DistancePair(raw=float(self.dist_raw[i, j]), norm=float(self.dist_norm[i, j]))


@dataclass(frozen=True)
class SamplerConfig:
    """Triplet-selection configuration.

    ``anchor_fraction`` determines the anchor count H = ceil(fraction * B);
    ``beta`` weights relevancy vs hardness in the informativeness scores and
    ``gamma`` weights informativeness vs diversity during iterative picks.
    ``das_reduce`` selects the reduction over already-chosen anchors:
    "max" is the default scoring rule, "min" is the classic farthest-point
    variant kept for comparison only.
    """

    anchor_strategy: str = "das"
    image_strategy: str = "rhdis"
    anchor_fraction: float = 0.1
    positives_per_anchor: int = 3
    negatives_per_anchor: int = 3
    beta: float = 0.5
    gamma: float = 0.1
    combination: str = "cartesian"
    label_similarity: str = "cosine"
    das_reduce: str = "max"
    seed: int = 0

    def num_anchors(self, batch_size: int) -> int:
        # round() guards against float fuzz like 0.1 * 100 = 10.000000000000002
        return int(math.ceil(round(self.anchor_fraction * batch_size, 9)))


def validate_config(cfg: SamplerConfig, batch_size: int) -> SamplerConfig:
    """Check a SamplerConfig against a batch size; returns it unchanged if valid."""
    if cfg.anchor_strategy not in ANCHOR_STRATEGIES:
        raise ValueError(f"unknown anchor strategy {cfg.anchor_strategy!r}")
    if cfg.image_strategy not in IMAGE_STRATEGIES:
        raise ValueError(f"unknown image strategy {cfg.image_strategy!r}")
    if cfg.combination not in COMBINATIONS:
        raise ValueError(f"unknown combination {cfg.combination!r}")
    if cfg.label_similarity not in LABEL_SIMILARITY_KINDS:
        raise ValueError(f"unknown label similarity {cfg.label_similarity!r}")
    if cfg.das_reduce not in DAS_REDUCTIONS:
        raise ValueError(f"unknown das reduction {cfg.das_reduce!r}")
    if not 0.0 < cfg.anchor_fraction <= 1.0:
        raise ValueError(f"anchor_fraction must be in (0, 1], got {cfg.anchor_fraction}")
    if not 0.0 <= cfg.beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {cfg.beta}")
    if not 0.0 <= cfg.gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {cfg.gamma}")
    c_pos, c_neg = cfg.positives_per_anchor, cfg.negatives_per_anchor
    if c_pos < 1 or c_neg < 1:
        raise ValueError("positives/negatives per anchor must be >= 1")
    if c_pos > batch_size - 1 or c_neg > batch_size - 1:
        raise ValueError(
            f"per-anchor counts ({c_pos}, {c_neg}) must not exceed batch size - 1 = {batch_size - 1}"
        )
    h = cfg.num_anchors(batch_size)
    if h > batch_size:
        raise ValueError(f"anchor count {h} exceeds batch size {batch_size}")
    if cfg.image_strategy in ("rhdis", "ris") and c_pos + c_neg > batch_size - 1:
        # rhdis keeps positives and negatives disjoint; ris draws them jointly
        raise ValueError(
            f"{cfg.image_strategy} needs positives + negatives <= batch size - 1 "
            f"({c_pos} + {c_neg} > {batch_size - 1})"
        )
    return cfg


@dataclass(frozen=True)
class TripletSet:
    """Selected (anchor, positive, negative) batch-local index triples.

    ``triplets`` is a (T, 3) int64 array ordered anchor-major; ``per_anchor``
    maps each anchor to its ordered positive and negative index tuples.
    """

    triplets: np.ndarray
    per_anchor: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.triplets.shape[0])

    @property
    def anchors(self) -> list:
        return list(self.per_anchor.keys())
