"""Triplet-selection strategies.

Two families are implemented:

* diversity-driven selection: ``select_anchors_das`` picks anchors that are
  mutually far apart in embedding space, ``select_positives_rhdis`` /
  ``select_negatives_rhdis`` pick per-anchor images that are relevant, hard,
  and diverse, scored from label similarity S and normalized distance D;
* baselines: random anchors (ras), all-batch anchors (bas), random images
  (ris), all-batch images (bis).

All argmax scans break ties toward the lowest batch index, so every
selection is deterministic given the RNG seed. Mining is strictly within
the mini-batch; there is no cross-batch memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import similarity
from .core import BatchView, SamplerConfig, TripletSet


@dataclass(frozen=True)
class InformativenessRow:
    """Per-candidate positive/negative scores for one anchor.

    ``i_pos[b] = beta * S(a, b) + (1 - beta) * D(a, b)`` and ``i_neg`` uses the
    complements of S and D, so ``i_neg = 1 - i_pos`` holds algebraically.
    The entry at the anchor's own index is never a valid candidate.
    """

    anchor: int
    i_pos: np.ndarray
    i_neg: np.ndarray


def informativeness(anchor: int, dist_norm: np.ndarray, label_sim_row: np.ndarray, beta: float) -> InformativenessRow:
    """Score every batch item as a candidate positive and negative for ``anchor``."""
    s = np.asarray(label_sim_row, dtype=np.float64)
    d = np.asarray(dist_norm, dtype=np.float64)[anchor]
    i_pos = beta * s + (1.0 - beta) * d
    i_neg = beta * (1.0 - s) + (1.0 - beta) * (1.0 - d)
    return InformativenessRow(anchor=int(anchor), i_pos=i_pos, i_neg=i_neg)


def select_anchors_das(dist_norm: np.ndarray, h: int, rng: np.random.Generator,
                       first_anchor: int | None = None, reduce: str = "max") -> list[int]:
    """Iteratively select ``h`` mutually distant anchors.

    The first anchor is drawn uniformly at random (or forced via
    ``first_anchor``); each subsequent anchor is the unselected candidate
    whose reduced distance to the already-selected set is largest. The
    default reduction is "max" (score = farthest already-selected anchor);
    "min" gives the classic farthest-point rule and is kept for comparison.
    """
    d = np.asarray(dist_norm, dtype=np.float64)
    b = d.shape[0]
    if h > b:
        raise ValueError(f"cannot select {h} anchors from a batch of {b}")
    if h < 1:
        raise ValueError("anchor count must be >= 1")
    first = int(rng.integers(b)) if first_anchor is None else int(first_anchor)
    selected = [first]
    taken = np.zeros(b, dtype=bool)
    taken[first] = True
    combine = np.maximum if reduce == "max" else np.minimum
    if reduce not in ("max", "min"):
        raise ValueError(f"unknown das reduction {reduce!r}")
    score = d[:, first].copy()
    while len(selected) < h:
        masked = np.where(taken, -np.inf, score)
        nxt = int(np.argmax(masked))  # argmax takes the first maximum: lowest index wins ties
        selected.append(nxt)
        taken[nxt] = True
        score = combine(score, d[:, nxt])
    return selected


def select_anchors_ras(batch_size: int, h: int, rng: np.random.Generator) -> list[int]:
    """``h`` distinct anchors drawn uniformly without replacement."""
    if h > batch_size:
        raise ValueError(f"cannot select {h} anchors from a batch of {batch_size}")
    return [int(i) for i in rng.choice(batch_size, size=h, replace=False)]


def select_anchors_bas(batch_size: int) -> list[int]:
    """Every batch item as an anchor, once, in index order."""
    if batch_size < 1:
        raise ValueError("batch must be nonempty")
    return list(range(batch_size))


def _iterative_pick(scores: np.ndarray, dist_norm: np.ndarray, count: int,
                    gamma: float, blocked: np.ndarray) -> list[int]:
    """Shared iterative argmax: first pick by score alone, then score blended
    with the farthest-from-already-chosen diversity term."""
    b = scores.shape[0]
    available = int(b - blocked.sum())
    if count > available:
        raise ValueError(f"cannot select {count} images from {available} candidates")
    blocked = blocked.copy()
    chosen: list[int] = []
    first = int(np.argmax(np.where(blocked, -np.inf, scores)))
    chosen.append(first)
    blocked[first] = True
    spread = dist_norm[:, first].copy()
    while len(chosen) < count:
        blended = gamma * scores + (1.0 - gamma) * spread
        nxt = int(np.argmax(np.where(blocked, -np.inf, blended)))
        chosen.append(nxt)
        blocked[nxt] = True
        spread = np.maximum(spread, dist_norm[:, nxt])
    return chosen


def select_positives_rhdis(anchor: int, row: InformativenessRow, dist_norm: np.ndarray,
                           c: int, gamma: float) -> list[int]:
    """Ordered positives for one anchor: highest ``i_pos`` first, then iterative
    argmax of ``gamma * i_pos + (1 - gamma) * max-distance-to-chosen``."""
    b = row.i_pos.shape[0]
    blocked = np.zeros(b, dtype=bool)
    blocked[anchor] = True
    return _iterative_pick(row.i_pos, np.asarray(dist_norm, dtype=np.float64), c, gamma, blocked)


def select_negatives_rhdis(anchor: int, row: InformativenessRow, dist_norm: np.ndarray,
                           c: int, gamma: float, exclude=()) -> list[int]:
    """Mirror of the positive selection with ``i_neg`` scores.

    ``exclude`` removes indices already chosen as positives for the same
    anchor, keeping the two sets disjoint.
    """
    b = row.i_neg.shape[0]
    blocked = np.zeros(b, dtype=bool)
    blocked[anchor] = True
    for i in exclude:
        blocked[int(i)] = True
    return _iterative_pick(row.i_neg, np.asarray(dist_norm, dtype=np.float64), c, gamma, blocked)


def select_images_ris(anchor: int, batch_size: int, c_pos: int, c_neg: int,
                      rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """Random positives and negatives: distinct uniform draws, never the anchor."""
    if c_pos + c_neg > batch_size - 1:
        raise ValueError(
            f"cannot draw {c_pos} + {c_neg} distinct images from {batch_size - 1} candidates"
        )
    pool = np.delete(np.arange(batch_size), anchor)
    picks = rng.choice(pool, size=c_pos + c_neg, replace=False)
    return [int(i) for i in picks[:c_pos]], [int(i) for i in picks[c_pos:]]


def select_images_bis(anchor: int, batch_size: int) -> tuple[list[int], list[int]]:
    """Every non-anchor image as both a positive and a negative."""
    if batch_size < 2:
        raise ValueError("bis needs a batch of at least 2")
    others = [i for i in range(batch_size) if i != anchor]
    return others, list(others)


def build_triplets(anchors, per_anchor: dict, combination: str = "cartesian") -> TripletSet:
    """Combine per-anchor positive/negative sets into (a, p, n) triples.

    "cartesian" pairs every positive with every negative; "paired" matches
    them by rank. Degenerate triples with p == n are dropped in both modes
    (bis inherently generates them).
    """
    if combination not in ("cartesian", "paired"):
        raise ValueError(f"unknown combination {combination!r}")
    rows = []
    for a in anchors:
        pos, neg = per_anchor[a]
        p = np.asarray(pos, dtype=np.int64)
        n = np.asarray(neg, dtype=np.int64)
        if combination == "cartesian":
            pp, nn = np.meshgrid(p, n, indexing="ij")
            pp, nn = pp.ravel(), nn.ravel()
        else:
            t = min(len(p), len(n))
            pp, nn = p[:t], n[:t]
        keep = pp != nn
        pp, nn = pp[keep], nn[keep]
        rows.append(np.column_stack([np.full(pp.shape, a, dtype=np.int64), pp, nn]))
    triplets = np.concatenate(rows, axis=0) if rows else np.empty((0, 3), dtype=np.int64)
    per = {int(a): (tuple(int(i) for i in per_anchor[a][0]), tuple(int(i) for i in per_anchor[a][1]))
           for a in anchors}
    return TripletSet(triplets=triplets, per_anchor=per)


def _select_anchors(batch: BatchView, cfg: SamplerConfig, rng: np.random.Generator) -> list[int]:
    h = cfg.num_anchors(batch.size)
    if cfg.anchor_strategy == "das":
        return select_anchors_das(batch.dist_norm, h, rng, reduce=cfg.das_reduce)
    if cfg.anchor_strategy == "ras":
        return select_anchors_ras(batch.size, h, rng)
    return select_anchors_bas(batch.size)


def _select_pair(anchor: int, batch: BatchView, cfg: SamplerConfig, s_matrix, rng):
    if cfg.image_strategy == "rhdis":
        row = informativeness(anchor, batch.dist_norm, s_matrix[anchor], cfg.beta)
        pos = select_positives_rhdis(anchor, row, batch.dist_norm, cfg.positives_per_anchor, cfg.gamma)
        neg = select_negatives_rhdis(anchor, row, batch.dist_norm, cfg.negatives_per_anchor,
                                     cfg.gamma, exclude=pos)
        return pos, neg
    if cfg.image_strategy == "ris":
        return select_images_ris(anchor, batch.size, cfg.positives_per_anchor,
                                 cfg.negatives_per_anchor, rng)
    return select_images_bis(anchor, batch.size)


def mine_batch(batch: BatchView, cfg: SamplerConfig, rng: np.random.Generator) -> TripletSet:
    """Run the configured anchor and image strategies over one batch."""
    anchors = _select_anchors(batch, cfg, rng)
    s_matrix = None
    if cfg.image_strategy == "rhdis":
        s_matrix = similarity.label_similarity_matrix(batch.labels, cfg.label_similarity)
    per_anchor = {a: _select_pair(a, batch, cfg, s_matrix, rng) for a in anchors}
    return build_triplets(anchors, per_anchor, cfg.combination)


def mine_debug_lines(batch_index: int, batch: BatchView, cfg: SamplerConfig,
                     rng: np.random.Generator) -> list[str]:
    """Mining dump for the ``mine-debug`` CLI hook: one JSON line per batch
    header, then one per anchor with its informativeness row, score extremes,
    and chosen positives/negatives."""
    anchors = _select_anchors(batch, cfg, rng)
    s_matrix = similarity.label_similarity_matrix(batch.labels, cfg.label_similarity)
    per_anchor = {}
    rows = {}
    for a in anchors:
        rows[a] = informativeness(a, batch.dist_norm, s_matrix[a], cfg.beta)
        per_anchor[a] = _select_pair(a, batch, cfg, s_matrix, rng)
    tset = build_triplets(anchors, per_anchor, cfg.combination)
    lines = [json.dumps({"batch": batch_index, "anchors": anchors, "triplet_count": len(tset)})]
    candidates = np.ones(batch.size, dtype=bool)
    for a in anchors:
        candidates[:] = True
        candidates[a] = False
        row = rows[a]
        pos, neg = per_anchor[a]
        lines.append(json.dumps({
            "batch": batch_index,
            "anchor": a,
            "i_pos_min": float(row.i_pos[candidates].min()),
            "i_pos_max": float(row.i_pos[candidates].max()),
            "i_neg_min": float(row.i_neg[candidates].min()),
            "i_neg_max": float(row.i_neg[candidates].max()),
            "i_pos": [float(v) for v in row.i_pos],
            "i_neg": [float(v) for v in row.i_neg],
            "positives": list(pos),
            "negatives": list(neg),
        }))
    return lines
