"""Feature/label file ingestion, splitting, and synthetic dataset generation.

CSV is the normative interchange format. Features: one row per sample,
first column the id, then F real-valued columns (a header row is accepted
and skipped when its second field is not numeric). Labels: a header row
("id" followed by the class names), then one row per sample with N strictly
binary columns. Rows are joined on id; the features file fixes the sample
order.

A binary feature format exists for bulk data: 8 magic bytes "TMFEAT01",
uint32-LE row count M, uint32-LE feature count F, then M*F row-major
float32-LE values. It carries no ids, so its rows pair positionally with
the labels CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Sample, seeded_rng

FEATURES_MAGIC = b"TMFEAT01"
_REDRAW_ATTEMPTS = 16


@dataclass
class Dataset:
    samples: list
    class_names: list
    train_idx: list = field(default_factory=list)
    val_idx: list = field(default_factory=list)
    test_idx: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return int(self.samples[0].features.shape[0]) if self.samples else 0

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def features_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    def labels_matrix(self) -> np.ndarray:
        return np.stack([s.labels for s in self.samples])

    def subset(self, indices) -> list:
        return [self.samples[int(i)] for i in indices]


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale generator: samples are noisy mixtures of shared prototypes,
    so label similarity and feature distance are genuinely correlated."""

    n_samples: int = 200
    n_classes: int = 8
    feature_dim: int = 16
    n_prototypes: int = 4
    label_noise_rate: float = 0.05
    feature_noise_sigma: float = 0.1
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if self.n_prototypes < 2:
            raise ValueError("n_prototypes must be >= 2")
        if self.n_samples < 1 or self.n_classes < 1 or self.feature_dim < 1:
            raise ValueError("n_samples, n_classes, and feature_dim must be >= 1")
        if not 0.0 <= self.label_noise_rate <= 1.0:
            raise ValueError("label_noise_rate must be in [0, 1]")
        if self.feature_noise_sigma < 0:
            raise ValueError("feature_noise_sigma must be >= 0")
        return self


def _looks_like_header(row) -> bool:
    if len(row) < 2:
        return False
    try:
        float(row[1])
        return False
    except ValueError:
        return True


def _read_features_csv(path):
    ids, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader):
            if not row:
                continue
            if line_no == 0 and _looks_like_header(row):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {line_no + 1} has no feature columns")
            if rows and len(row) != len(rows[-1]) + 1:
                raise ValueError(f"{path}: ragged row {line_no + 1} (id {row[0]!r})")
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}: non-numeric feature in row {line_no + 1}: {exc}") from None
            ids.append(row[0])
            rows.append(values)
    if not ids:
        raise ValueError(f"{path}: no feature rows")
    return ids, np.asarray(rows, dtype=np.float64)


def read_features_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(FEATURES_MAGIC))
        if magic != FEATURES_MAGIC:
            raise ValueError(f"{path}: not a binary feature file (bad magic)")
        header = fh.read(8)
        m = int.from_bytes(header[:4], "little")
        f = int.from_bytes(header[4:], "little")
        payload = fh.read()
    expected = 4 * m * f
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(m, f)


def write_features_binary(path, features) -> None:
    x = np.asarray(features, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(int(x.shape[0]).to_bytes(4, "little"))
        fh.write(int(x.shape[1]).to_bytes(4, "little"))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def _read_labels_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header row and at least one label row")
    header = rows[0]
    class_names = header[1:]
    if not class_names:
        raise ValueError(f"{path}: header names no classes")
    ids, labels = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: ragged row {line_no} (id {row[0]!r})")
        bits = []
        for v in row[1:]:
            v = v.strip()
            if v not in ("0", "1"):
                raise ValueError(f"{path}: non-binary label entry {v!r} in row {line_no}")
            bits.append(int(v))
        if sum(bits) == 0:
            raise ValueError(f"{path}: sample {row[0]!r} has no class labels")
        ids.append(row[0])
        labels.append(bits)
    return class_names, ids, np.asarray(labels, dtype=np.uint8)


def _is_binary_features(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(FEATURES_MAGIC)) == FEATURES_MAGIC


def load_dataset(features_path, labels_path) -> Dataset:
    """Load and join a feature file (CSV or binary) with a labels CSV."""
    class_names, label_ids, labels = _read_labels_csv(labels_path)
    if _is_binary_features(features_path):
        feats = read_features_binary(features_path)
        if feats.shape[0] != len(label_ids):
            raise ValueError(
                f"{features_path}: {feats.shape[0]} binary feature rows vs "
                f"{len(label_ids)} label rows (binary features pair by position)"
            )
        ids = label_ids
    else:
        ids, feats = _read_features_csv(features_path)
        if len(set(ids)) != len(ids):
            raise ValueError(f"{features_path}: duplicate ids")
        by_id = {i: k for k, i in enumerate(label_ids)}
        if len(by_id) != len(label_ids):
            raise ValueError(f"{labels_path}: duplicate ids")
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValueError(f"id {missing[0]!r} present in features but not labels")
        extra = set(label_ids) - set(ids)
        if extra:
            raise ValueError(f"id {sorted(extra)[0]!r} present in labels but not features")
        labels = labels[[by_id[i] for i in ids]]
    samples = [Sample(id=i, features=feats[k], labels=labels[k]) for k, i in enumerate(ids)]
    return Dataset(samples=samples, class_names=list(class_names))


def write_dataset(ds: Dataset, features_path, labels_path) -> None:
    """Write the two CSVs; float formatting round-trips float64 exactly."""
    with open(features_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"f{j}" for j in range(ds.n_features)])
        for s in ds.samples:
            writer.writerow([s.id] + [repr(float(v)) for v in s.features])
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + list(ds.class_names))
        for s in ds.samples:
            writer.writerow([s.id] + [str(int(b)) for b in s.labels])


def split_dataset(ds: Dataset, fractions, rng: np.random.Generator) -> Dataset:
    """Random disjoint train/val/test splits.

    Train and val sizes are floor(fraction * M); everything left over goes
    to test.
    """
    f_train, f_val, f_test = fractions
    if min(f_train, f_val, f_test) <= 0 or f_train + f_val + f_test > 1.0 + 1e-9:
        raise ValueError(f"fractions must be positive and sum to at most 1, got {fractions}")
    m = len(ds.samples)
    n_train = int(round(f_train * m, 9) // 1)
    n_val = int(round(f_val * m, 9) // 1)
    if n_train + n_val > m:
        raise ValueError("train and val fractions leave no room in the dataset")
    perm = rng.permutation(m)
    return replace(
        ds,
        train_idx=sorted(int(i) for i in perm[:n_train]),
        val_idx=sorted(int(i) for i in perm[n_train : n_train + n_val]),
        test_idx=sorted(int(i) for i in perm[n_train + n_val :]),
    )


def synthetic_prototypes(spec: SyntheticSpec):
    """The prototype centroids and label sets a spec would generate.

    Prototypes are drawn first from the seed stream, so this replays exactly
    what ``generate_synthetic`` uses internally.
    """
    return _draw_prototypes(spec.validate(), seeded_rng(spec.seed))


def _draw_prototypes(spec: SyntheticSpec, rng: np.random.Generator):
    # radius 0.5 keeps centroid separation comparable to the default feature
    # noise, so a learned projection has headroom over the raw features
    centroids = rng.normal(size=(spec.n_prototypes, spec.feature_dim))
    centroids *= 0.5 / np.linalg.norm(centroids, axis=1, keepdims=True)
    proto_labels = np.zeros((spec.n_prototypes, spec.n_classes), dtype=np.uint8)
    max_labels = min(3, spec.n_classes)
    for p in range(spec.n_prototypes):
        count = int(rng.integers(1, max_labels + 1))
        chosen = rng.choice(spec.n_classes, size=count, replace=False)
        proto_labels[p, chosen] = 1
    return centroids, proto_labels


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Build a dataset of noisy prototype mixtures.

    Each sample mixes one or two prototype centroids (plus Gaussian feature
    noise); its label vector is the union of the source prototypes' labels
    with each bit independently flipped at ``label_noise_rate``. An all-zero
    result is re-drawn; if the re-draws keep producing all-zero vectors
    (e.g. noise rate 1 with a single class, where flipping is deterministic),
    one uniformly random bit is forced on instead.
    """
    spec.validate()
    rng = seeded_rng(spec.seed)
    centroids, proto_labels = _draw_prototypes(spec, rng)
    width = len(str(max(spec.n_samples - 1, 1)))
    samples = []
    for i in range(spec.n_samples):
        n_src = 1 if rng.random() < 0.7 else 2
        srcs = rng.choice(spec.n_prototypes, size=n_src, replace=False)
        w = rng.random(n_src)
        w /= w.sum()
        feats = w @ centroids[srcs] + spec.feature_noise_sigma * rng.normal(size=spec.feature_dim)
        clean = proto_labels[srcs].max(axis=0)
        bits = clean.copy()
        for _ in range(_REDRAW_ATTEMPTS):
            flips = rng.random(spec.n_classes) < spec.label_noise_rate
            bits = np.where(flips, 1 - clean, clean).astype(np.uint8)
            if bits.sum() > 0:
                break
        if bits.sum() == 0:
            bits[int(rng.integers(spec.n_classes))] = 1
        samples.append(Sample(id=f"s{i:0{width}d}", features=feats, labels=bits))
    class_names = [f"c{j}" for j in range(spec.n_classes)]
    return Dataset(samples=samples, class_names=class_names)
