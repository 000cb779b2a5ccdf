"""Mini-batch training loop: shuffle, embed, mine, step Adam, log.

Mining always runs on the current network's embeddings (online mining).
Trailing partial batches are dropped so per-batch triplet counts stay
comparable across epochs. One Adam step per batch, a single logical
training thread, sequential accumulation everywhere: two runs with the
same config produce bit-identical weights and log rows (wall-clock
seconds excepted).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import embedder as emb_mod
from . import sampler
from .core import BatchView, SamplerConfig, seeded_rng, validate_config


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 100
    lr0: float = 0.001
    decay_every_epochs: int = 5
    decay_factor: float = 0.95
    alpha: float = 0.2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_dims: tuple = (64,)
    embedding_dim: int = 1024
    l2_normalize: bool = False
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.epochs < 0 or self.batch_size < 1 or self.lr0 <= 0:
            raise ValueError("epochs must be >= 0, batch_size >= 1, lr0 > 0")
        if self.decay_every_epochs < 1 or not 0.0 < self.decay_factor <= 1.0:
            raise ValueError("decay_every_epochs must be >= 1 and decay_factor in (0, 1]")
        if self.alpha < 0:
            raise ValueError("margin alpha must be >= 0")
        if self.embedding_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("layer sizes must be >= 1")
        return self


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    mean_loss: float
    cum_triplets: int
    lr: float
    seconds: float


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


TRAIN_LOG_COLUMNS = ("epoch", "mean_loss", "cum_triplets", "lr", "seconds")


def write_train_log(log: TrainLog, path) -> None:
    """Emit the log as CSV. All columns except ``seconds`` are deterministic
    for a fixed seed; ``seconds`` is measured wall time."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_LOG_COLUMNS)
        for r in log.rows:
            writer.writerow([r.epoch, repr(r.mean_loss), r.cum_triplets, repr(r.lr), f"{r.seconds:.3f}"])


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Step-exponential decay: lr0 * factor ** floor(epoch / every)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_every_epochs)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def init_adam(params) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Standard bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must have matching lengths")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def train(dataset, cfg: TrainConfig, epoch_callback=None) -> tuple:
    """Train an embedder on the dataset's train split.

    Each epoch shuffles the split with the seeded RNG, partitions it into
    full batches (remainder dropped), mines triplets per the configured
    strategy on the current embeddings, and takes one Adam step per batch.
    ``epoch_callback(epoch, net, row)``, when given, runs after each epoch.

    Returns (Embedder, TrainLog).
    """
    cfg.validate()
    train_idx = np.asarray(dataset.train_idx, dtype=np.int64)
    if len(dataset.samples) == 0 or train_idx.size == 0:
        raise ValueError("dataset has no training samples")
    if cfg.batch_size > train_idx.size:
        raise ValueError(
            f"batch size {cfg.batch_size} exceeds train split size {train_idx.size}"
        )
    validate_config(cfg.sampler, cfg.batch_size)

    features = dataset.features_matrix()
    labels = dataset.labels_matrix()
    rng = seeded_rng(cfg.seed)
    net = emb_mod.Embedder.init(
        [features.shape[1], *cfg.hidden_dims, cfg.embedding_dim], rng,
        l2_normalize=cfg.l2_normalize,
    )
    params = emb_mod.parameters(net)
    state = init_adam(params)

    log = TrainLog()
    cum_triplets = 0
    n_batches = train_idx.size // cfg.batch_size
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        lr = lr_schedule(epoch, cfg)
        perm = rng.permutation(train_idx)
        losses = []
        for b in range(n_batches):
            idx = perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            x = features[idx]
            batch = BatchView.from_embeddings(idx, emb_mod.forward(net, x), labels[idx])
            tset = sampler.mine_batch(batch, cfg.sampler, rng)
            cum_triplets += len(tset)
            if len(tset):
                bundle = emb_mod.backward(net, x, tset, cfg.alpha)
                adam_step(params, emb_mod.gradient_list(bundle), state, lr,
                          cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
                losses.append(bundle.loss_value)
            else:
                losses.append(0.0)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        if not np.isfinite(mean_loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        row = TrainLogRow(epoch=epoch, mean_loss=mean_loss, cum_triplets=cum_triplets,
                          lr=lr, seconds=time.perf_counter() - started)
        log.rows.append(row)
        if epoch_callback is not None:
            epoch_callback(epoch, net, row)
    return net, log
