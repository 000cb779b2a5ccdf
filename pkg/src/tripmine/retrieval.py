"""Exact k-nn retrieval over archive embeddings and multi-label metrics.

Retrieval is brute force (archives here are at most tens of thousands of
rows); metric averaging is macro: per-pair metrics are averaged over the k
retrieved items of a query, then over queries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import embedder as emb_mod

_CHUNK = 4096


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked neighbors of one query: archive ids with non-decreasing distances."""

    query_id: str
    ids: tuple
    distances: tuple


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float


def knn_retrieve(query_embedding, archive, k: int, exclude_index: int | None = None):
    """Indices and distances of the k nearest archive rows, exact Euclidean.

    Ties break toward the lowest archive index; ``exclude_index`` removes the
    query's own archive row when the query is part of the archive.
    """
    q = np.asarray(query_embedding, dtype=np.float64).reshape(-1)
    a = np.asarray(archive, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != q.shape[0]:
        raise ValueError(f"archive shape {a.shape} does not match query dim {q.shape[0]}")
    m = a.shape[0]
    usable = m - (1 if exclude_index is not None else 0)
    if k < 1 or k > usable:
        raise ValueError(f"k={k} must be between 1 and {usable}")
    dist = np.empty(m, dtype=np.float64)
    for start in range(0, m, _CHUNK):
        block = a[start : start + _CHUNK] - q
        dist[start : start + _CHUNK] = np.sqrt(np.einsum("ij,ij->i", block, block))
    if exclude_index is not None:
        dist[exclude_index] = np.inf
    order = np.argsort(dist, kind="stable")[:k]
    return order, dist[order]


def pair_metrics(query_labels, retrieved_labels) -> tuple:
    """(accuracy, precision, recall, f1) for one query/retrieved label pair.

    With I the label intersection size: accuracy = I / |union|,
    precision = I / |retrieved|, recall = I / |query|, and f1 the harmonic
    mean with the 0/0 -> 0 rule.
    """
    q = np.asarray(query_labels, dtype=np.uint8)
    r = np.asarray(retrieved_labels, dtype=np.uint8)
    if q.shape != r.shape:
        raise ValueError(f"label length mismatch: {q.shape} vs {r.shape}")
    nq, nr = int(q.sum()), int(r.sum())
    if nq == 0 or nr == 0:
        raise ValueError("label vectors must have at least one set bit")
    inter = int((q & r).sum())
    union = nq + nr - inter
    acc = inter / union
    prec = inter / nr
    rec = inter / nq
    f1 = 0.0 if prec + rec == 0 else 2.0 * prec * rec / (prec + rec)
    return acc, prec, rec, f1


def default_k(archive_size: int) -> int:
    """30 for large archives (>= 10000 items), 10 otherwise."""
    return 30 if archive_size >= 10_000 else 10


def evaluate(net, queries, archive, k: int) -> MetricReport:
    """Embed both splits, retrieve top-k per query, macro-average the metrics.

    A query that is also present in the archive (matched by id) never
    retrieves itself.
    """
    if not queries or not archive:
        raise ValueError("queries and archive must be nonempty")
    q_feats = np.stack([s.features for s in queries])
    a_feats = np.stack([s.features for s in archive])
    q_emb = emb_mod.forward(net, q_feats)
    a_emb = emb_mod.forward(net, a_feats)
    archive_pos = {s.id: i for i, s in enumerate(archive)}
    totals = np.zeros(4, dtype=np.float64)
    for qi, q in enumerate(queries):
        exclude = archive_pos.get(q.id)
        idxs, _ = knn_retrieve(q_emb[qi], a_emb, k, exclude_index=exclude)
        per_query = np.zeros(4, dtype=np.float64)
        for j in idxs:
            per_query += pair_metrics(q.labels, archive[int(j)].labels)
        totals += per_query / k
    acc, prec, rec, f1 = (totals / len(queries)).tolist()
    return MetricReport(accuracy=acc, precision=prec, recall=rec, f1=f1)


def retrieve_for_query(query_id: str, query_embedding, archive_ids, archive_embeddings,
                       k: int) -> RetrievalResult:
    """knn_retrieve wrapped with id bookkeeping and self-exclusion by id."""
    ids = list(archive_ids)
    exclude = ids.index(query_id) if query_id in ids else None
    idxs, dists = knn_retrieve(query_embedding, archive_embeddings, k, exclude_index=exclude)
    return RetrievalResult(
        query_id=query_id,
        ids=tuple(ids[int(i)] for i in idxs),
        distances=tuple(float(d) for d in dists),
    )


def write_metrics_csv(rows, path) -> None:
    """``rows`` is a list of (method_name, MetricReport); values are raw fractions."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "accuracy", "precision", "recall", "f1"])
        for name, rep in rows:
            writer.writerow([name] + [repr(float(v)) for v in (rep.accuracy, rep.precision, rep.recall, rep.f1)])


def format_metric_table(rows) -> str:
    """Aligned plain-text table, metrics in percent with one decimal."""
    header = ("Method", "Accuracy", "Precision", "Recall", "F1")
    body = [
        (name,) + tuple(f"{100.0 * v:.1f}" for v in (rep.accuracy, rep.precision, rep.recall, rep.f1))
        for name, rep in rows
    ]
    widths = [max(len(col), *(len(r[i]) for r in body)) for i, col in enumerate(header)]
    def fmt(row):
        cells = [row[0].ljust(widths[0])] + [row[i].rjust(widths[i]) for i in range(1, len(row))]
        return "  ".join(cells)
    return "\n".join([fmt(header)] + [fmt(r) for r in body])
