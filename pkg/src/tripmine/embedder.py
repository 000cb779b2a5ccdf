"""Small fully connected embedding network with hand-derived gradients.

The architecture is fixed: ReLU on hidden layers, identity on the output
layer, optional row-wise L2 normalization of the output (off by default).
Gradients of the margin loss are derived analytically for exactly this
architecture; there is no general autodiff.

The margin loss operates on RAW Euclidean distances between embedding rows.
The batch min-max normalization is used only by the selection scores, never
inside the loss, so batch extremes do not couple into the gradient.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import TripletSet, seeded_rng

CHECKPOINT_MAGIC = b"TMEMB001"


@dataclass
class Embedder:
    """Layer dimensions [F, h1, ..., d] with per-layer weight matrix and bias."""

    layer_dims: tuple
    weights: list
    biases: list
    l2_normalize: bool = False

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator, l2_normalize: bool = False) -> "Embedder":
        """Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases."""
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"layer dims must list at least input and output sizes, got {dims}")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out, dtype=np.float64))
        return cls(layer_dims=dims, weights=weights, biases=biases, l2_normalize=l2_normalize)

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class GradientBundle:
    """Per-parameter gradients matching the Embedder's shapes, plus the loss value."""

    weight_grads: list
    bias_grads: list
    loss_value: float


def parameters(net: Embedder) -> list:
    """Flat parameter list in the fixed order [W0, b0, W1, b1, ...]."""
    out = []
    for w, b in zip(net.weights, net.biases):
        out.extend((w, b))
    return out


def gradient_list(bundle: GradientBundle) -> list:
    """Gradients in the same order as ``parameters``."""
    out = []
    for gw, gb in zip(bundle.weight_grads, bundle.bias_grads):
        out.extend((gw, gb))
    return out


def _forward_cached(net: Embedder, features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"feature matrix of shape {x.shape} does not match input dim {net.layer_dims[0]}"
        )
    acts = [x]
    preacts = []
    a = x
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        preacts.append(z)
        a = np.maximum(z, 0.0) if l < last else z
        acts.append(a)
    if net.l2_normalize:
        norms = np.sqrt(np.einsum("ij,ij->i", a, a))
        safe = np.where(norms > 0.0, norms, 1.0)
        emb = a / safe[:, None]
    else:
        norms = None
        emb = a
    return acts, preacts, norms, emb


def forward(net: Embedder, features) -> np.ndarray:
    """Embed a (B, F) feature matrix into (B, d)."""
    return _forward_cached(net, features)[3]


def _triplet_columns(triplets) -> np.ndarray:
    t = triplets.triplets if isinstance(triplets, TripletSet) else np.asarray(triplets, dtype=np.int64)
    if t.size == 0:
        return np.empty((0, 3), dtype=np.int64)
    if t.ndim != 2 or t.shape[1] != 3:
        raise ValueError(f"triplets must be a (T, 3) index array, got shape {t.shape}")
    return t


def hinge_terms(d_ap, d_an, alpha: float) -> np.ndarray:
    """Per-triplet margin terms max(d(a,p) - d(a,n) + alpha, 0)."""
    return np.maximum(np.asarray(d_ap, dtype=np.float64) - np.asarray(d_an, dtype=np.float64) + alpha, 0.0)


def triplet_loss(embeddings, triplets, alpha: float) -> float:
    """Sum of hinge terms over all triplets, on raw Euclidean distances.

    Zero exactly when every triplet satisfies d(a,n) >= d(a,p) + alpha.
    """
    if alpha < 0:
        raise ValueError("margin alpha must be >= 0")
    t = _triplet_columns(triplets)
    if t.shape[0] == 0:
        return 0.0
    e = np.asarray(embeddings, dtype=np.float64)
    d_ap = np.linalg.norm(e[t[:, 0]] - e[t[:, 1]], axis=1)
    d_an = np.linalg.norm(e[t[:, 0]] - e[t[:, 2]], axis=1)
    return float(hinge_terms(d_ap, d_an, alpha).sum())


def _unit_rows(diff: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # subgradient choice at coincident points: zero direction
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.where((norms > 0.0)[:, None], diff / safe[:, None], 0.0)


def backward(net: Embedder, features, triplets, alpha: float) -> GradientBundle:
    """Analytic gradient of the margin loss through the network.

    The hinge subgradient at a pre-hinge value of exactly 0 is 0 (the triplet
    is treated as inactive), and likewise ReLU'(0) = 0.
    """
    acts, preacts, out_norms, emb = _forward_cached(net, features)
    t = _triplet_columns(triplets)
    zero_w = [np.zeros_like(w) for w in net.weights]
    zero_b = [np.zeros_like(b) for b in net.biases]
    if t.shape[0] == 0:
        return GradientBundle(zero_w, zero_b, 0.0)

    a_idx, p_idx, n_idx = t[:, 0], t[:, 1], t[:, 2]
    diff_ap = emb[a_idx] - emb[p_idx]
    diff_an = emb[a_idx] - emb[n_idx]
    d_ap = np.linalg.norm(diff_ap, axis=1)
    d_an = np.linalg.norm(diff_an, axis=1)
    pre = d_ap - d_an + alpha
    active = pre > 0.0
    loss = float(pre[active].sum())
    if not active.any():
        return GradientBundle(zero_w, zero_b, loss)

    u_ap = _unit_rows(diff_ap[active], d_ap[active])
    u_an = _unit_rows(diff_an[active], d_an[active])
    d_emb = np.zeros_like(emb)
    np.add.at(d_emb, a_idx[active], u_ap - u_an)
    np.add.at(d_emb, p_idx[active], -u_ap)
    np.add.at(d_emb, n_idx[active], u_an)

    if net.l2_normalize:
        # y = z / |z|  =>  dz = (dy - y (y . dy)) / |z|, zero rows pass through as zero
        safe = np.where(out_norms > 0.0, out_norms, 1.0)
        proj = np.einsum("ij,ij->i", emb, d_emb)
        g = np.where((out_norms > 0.0)[:, None], (d_emb - emb * proj[:, None]) / safe[:, None], 0.0)
    else:
        g = d_emb

    weight_grads = [None] * net.n_layers
    bias_grads = [None] * net.n_layers
    for l in range(net.n_layers - 1, -1, -1):
        weight_grads[l] = acts[l].T @ g
        bias_grads[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ net.weights[l].T) * (preacts[l - 1] > 0.0)
    return GradientBundle(weight_grads, bias_grads, loss)


def _loss_and_kink_signature(net: Embedder, features, t: np.ndarray, alpha: float):
    acts, preacts, out_norms, emb = _forward_cached(net, features)
    sig = [b"".join((z > 0.0).tobytes() for z in preacts[:-1])]
    if t.shape[0]:
        d_ap = np.linalg.norm(emb[t[:, 0]] - emb[t[:, 1]], axis=1)
        d_an = np.linalg.norm(emb[t[:, 0]] - emb[t[:, 2]], axis=1)
        pre = d_ap - d_an + alpha
        loss = float(pre[pre > 0.0].sum())
        sig.append((pre > 0.0).tobytes())
        sig.append((d_ap > 0.0).tobytes())
        sig.append((d_an > 0.0).tobytes())
    else:
        loss = 0.0
    return loss, b"".join(sig)


@dataclass(frozen=True)
class FiniteDifferenceReport:
    max_rel_error: float
    n_checked: int
    n_skipped: int


def finite_difference_check(net: Embedder, features, triplets, alpha: float,
                            step: float = 1e-5) -> FiniteDifferenceReport:
    """Compare the analytic gradient against central finite differences.

    Each parameter is perturbed by +/- step in place (and restored). A
    parameter whose perturbation crosses a kink (a triplet hinge flipping
    on/off, or a ReLU unit changing sign) is skipped and counted instead of
    polluting the error estimate. The per-parameter relative error is
    |analytic - fd| / max(|analytic|, |fd|, 1% of the largest analytic
    gradient magnitude); an all-zero comparison reports 0.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(features, dtype=np.float64)
    t = _triplet_columns(triplets)
    bundle = backward(net, x, t, alpha)
    grads = gradient_list(bundle)
    g_scale = max((float(np.abs(g).max()) for g in grads if g.size), default=0.0)
    floor = max(0.01 * g_scale, 1e-12)
    worst = 0.0
    checked = skipped = 0
    for tensor, grad in zip(parameters(net), grads):
        flat_t = tensor.reshape(-1)
        flat_g = grad.reshape(-1)
        for i in range(flat_t.shape[0]):
            orig = flat_t[i]
            flat_t[i] = orig + step
            lp, sig_p = _loss_and_kink_signature(net, x, t, alpha)
            flat_t[i] = orig - step
            lm, sig_m = _loss_and_kink_signature(net, x, t, alpha)
            flat_t[i] = orig
            if sig_p != sig_m:
                skipped += 1
                continue
            fd = (lp - lm) / (2.0 * step)
            ga = float(flat_g[i])
            err = abs(ga - fd) / max(abs(ga), abs(fd), floor)
            worst = max(worst, err)
            checked += 1
    return FiniteDifferenceReport(max_rel_error=worst, n_checked=checked, n_skipped=skipped)


def save_checkpoint(net: Embedder, path) -> None:
    """Write the versioned binary checkpoint.

    Layout: 8 magic bytes "TMEMB001", uint32-LE count of layer dims, each
    layer dim as uint32-LE, then per layer the weight matrix (row-major
    float64-LE, shape dims[l] x dims[l+1]) followed by the bias vector
    (float64-LE, length dims[l+1]).
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(net.layer_dims)))
        fh.write(struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path, l2_normalize: bool = False) -> Embedder:
    """Read a checkpoint written by ``save_checkpoint``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an embedder checkpoint (bad magic)")
        (n_dims,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
        trailing = fh.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return Embedder(layer_dims=tuple(dims), weights=weights, biases=biases, l2_normalize=l2_normalize)


def init_embedder(feature_dim: int, hidden_dims, embedding_dim: int, seed: int,
                  l2_normalize: bool = False) -> Embedder:
    """Convenience constructor from a seed rather than an RNG instance."""
    dims = [int(feature_dim), *(int(h) for h in hidden_dims), int(embedding_dim)]
    return Embedder.init(dims, seeded_rng(seed), l2_normalize=l2_normalize)
