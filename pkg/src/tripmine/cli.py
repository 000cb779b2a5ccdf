"""Command-line entry point: train, evaluate, ablate, mine-debug.

Flag names mirror the sampler/trainer parameters one-to-one. Every run
writes a ``manifest.txt`` of fully resolved key=value options into --out;
feeding that file back through ``--config`` re-runs the experiment
identically (explicit flags still override it). Each command overwrites
``manifest.txt`` in its --out, so use a fresh directory per command when
the training manifest must survive an evaluation.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from dataclasses import dataclass

from . import __version__
from .core import SamplerConfig, seeded_rng
from .data import SyntheticSpec, generate_synthetic, load_dataset, split_dataset
from .embedder import load_checkpoint, save_checkpoint
from .retrieval import default_k, evaluate, format_metric_table, write_metrics_csv
from .sampler import mine_debug_lines
from .trainer import TrainConfig, train, write_train_log
from .core import BatchView
from . import embedder as emb_mod

ANCHOR_CHOICES = ("das", "ras", "bas")
IMAGE_CHOICES = ("rhdis", "ris", "bis")
SAMPLER_CHOICES = tuple(f"{a}-{i}" for a in ANCHOR_CHOICES for i in IMAGE_CHOICES)

# the split permutation draws from seed + 1 so it is a stream independent
# of both generation (seed) and training (seed)
_SPLIT_SEED_OFFSET = 1


class UserError(Exception):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    type: type = str
    default: object = None
    help: str = ""
    flag: bool = False
    choices: tuple = None


DATA_OPTS = (
    Opt("features", str, None, "features CSV (or binary) path"),
    Opt("labels", str, None, "labels CSV path"),
    Opt("synthetic", flag=True, default=False, help="use the synthetic generator instead of files"),
    Opt("n_samples", int, 200, "synthetic: number of samples"),
    Opt("n_classes", int, 8, "synthetic: number of classes"),
    Opt("feature_dim", int, 16, "synthetic: feature dimension"),
    Opt("prototypes", int, 4, "synthetic: number of prototypes"),
    Opt("label_noise", float, 0.05, "synthetic: per-bit label flip rate"),
    Opt("feature_noise", float, 0.1, "synthetic: feature noise sigma"),
    Opt("split", str, "0.6,0.2,0.2", "train,val,test fractions"),
)

SAMPLER_OPTS = (
    Opt("sampler", str, "das-rhdis", "anchor-image strategy pair", choices=SAMPLER_CHOICES),
    Opt("anchors_fraction", float, 0.1, "anchor count H = ceil(fraction * batch)"),
    Opt("positives", int, 3, "positives per anchor"),
    Opt("negatives", int, 3, "negatives per anchor"),
    Opt("beta", float, 0.5, "relevancy vs hardness weight"),
    Opt("gamma", float, 0.1, "informativeness vs diversity weight"),
    Opt("combination", str, "cartesian", "triplet combination mode", choices=("cartesian", "paired")),
    Opt("label_sim", str, "cosine", "label similarity kind", choices=("cosine", "jaccard")),
    Opt("das_reduce", str, "max", "reduction over selected anchors", choices=("max", "min")),
)

TRAIN_OPTS = (
    Opt("epochs", int, 100, "training epochs"),
    Opt("batch_size", int, 100, "mini-batch size (trailing remainder dropped)"),
    Opt("lr", float, 0.001, "initial learning rate"),
    Opt("decay_every", int, 5, "decay the learning rate every this many epochs"),
    Opt("decay_factor", float, 0.95, "multiplicative learning-rate decay"),
    Opt("alpha", float, 0.2, "triplet margin"),
    Opt("embedding", int, 1024, "embedding dimension"),
    Opt("hidden", str, "64", "comma-separated hidden layer sizes"),
    Opt("l2_normalize", flag=True, default=False, help="L2-normalize embeddings"),
    Opt("checkpoint_every", int, 0, "also write model_epoch{N}.ckpt every N epochs (0: final only)"),
)

COMMON_OPTS = (
    Opt("seed", int, 0, "master seed"),
    Opt("out", str, "out", "output directory"),
    Opt("preset", str, "full", "option preset", choices=("full", "ci")),
    Opt("config", str, None, "key=value file; explicit flags override it"),
)

EVAL_OPTS = (
    Opt("checkpoint", str, None, "model checkpoint (default: <out>/model.ckpt)"),
    Opt("k", int, None, "retrieved neighbors per query (default: 10, or 30 for archives >= 10000)"),
    Opt("method", str, "model", "method label used in reports"),
)

MINE_DEBUG_OPTS = (
    Opt("checkpoint", str, None, "model checkpoint (default: <out>/model.ckpt)"),
    Opt("batches", int, 1, "number of batches to dump"),
)

PRESETS = {
    "full": {},
    "ci": {"epochs": 10, "batch_size": 32, "embedding": 16, "hidden": "32", "lr": 0.01},
}

COMMAND_OPTS = {
    "train": COMMON_OPTS + DATA_OPTS + SAMPLER_OPTS + TRAIN_OPTS,
    "evaluate": COMMON_OPTS + DATA_OPTS + EVAL_OPTS + (
        Opt("l2_normalize", flag=True, default=False, help="L2-normalize embeddings"),),
    "ablate": COMMON_OPTS + DATA_OPTS + SAMPLER_OPTS + TRAIN_OPTS + (
        Opt("k", int, None, "retrieved neighbors per query"),),
    "mine-debug": COMMON_OPTS + DATA_OPTS + SAMPLER_OPTS + MINE_DEBUG_OPTS + (
        Opt("batch_size", int, 100, "mini-batch size"),
        Opt("l2_normalize", flag=True, default=False, help="L2-normalize embeddings"),),
}


def _add_opts(parser, opts):
    for o in opts:
        flag = "--" + o.name.replace("_", "-")
        if o.flag:
            parser.add_argument(flag, action="store_true", default=argparse.SUPPRESS, help=o.help)
        else:
            parser.add_argument(flag, type=o.type, default=argparse.SUPPRESS,
                                choices=o.choices, help=o.help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripmine")
    parser.add_argument("--version", action="version", version=f"tripmine {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in COMMAND_OPTS.items():
        p = sub.add_parser(cmd)
        _add_opts(p, opts)
    return parser


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise UserError(f"cannot parse boolean value {text!r}")


def _known_option_names():
    return {o.name for opts in COMMAND_OPTS.values() for o in opts}


def _read_config_file(path, opts_by_name):
    if not os.path.exists(path):
        raise UserError(f"config file not found: {path}")
    values = {}
    known_elsewhere = _known_option_names()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UserError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key = key.strip().replace("-", "_")
            if key not in opts_by_name:
                # a manifest from another subcommand stays loadable: skip its
                # keys, but still reject names no subcommand knows
                if key in known_elsewhere:
                    continue
                raise UserError(f"{path}:{line_no}: unknown option {key!r}")
            o = opts_by_name[key]
            raw = value.strip()
            if o.flag:
                values[key] = _parse_bool(raw)
            elif raw in ("", "None"):
                values[key] = None
            else:
                values[key] = o.type(raw)
                if o.choices and values[key] not in o.choices:
                    raise UserError(f"{path}:{line_no}: {key} must be one of {o.choices}")
    return values


def resolve_options(command: str, explicit: dict) -> dict:
    """defaults < preset < config file < explicit flags."""
    opts = COMMAND_OPTS[command]
    by_name = {o.name: o for o in opts}
    merged = {o.name: o.default for o in opts}
    cfgfile = {}
    if explicit.get("config"):
        cfgfile = _read_config_file(explicit["config"], by_name)
    preset = explicit.get("preset") or cfgfile.get("preset") or merged["preset"]
    merged.update({k: v for k, v in PRESETS[preset].items() if k in by_name})
    merged["preset"] = preset
    merged.update(cfgfile)
    merged.update(explicit)
    return merged


def write_manifest(path, command: str, resolved: dict) -> None:
    with open(path, "w") as fh:
        fh.write(f"# tripmine {__version__}\n")
        fh.write(f"# command: {command}\n")
        for key in sorted(resolved):
            if key == "config":
                continue
            value = resolved[key]
            if value is None:
                value = ""
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            fh.write(f"{key}={value}\n")


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UserError(f"cannot parse integer list {text!r}") from None


def _parse_fractions(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise UserError(f"--split needs three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(v) for v in parts)
    except ValueError:
        raise UserError(f"cannot parse fractions {text!r}") from None


def _load_data(o: dict):
    if o["synthetic"]:
        spec = SyntheticSpec(
            n_samples=o["n_samples"], n_classes=o["n_classes"], feature_dim=o["feature_dim"],
            n_prototypes=o["prototypes"], label_noise_rate=o["label_noise"],
            feature_noise_sigma=o["feature_noise"], seed=o["seed"],
        )
        ds = generate_synthetic(spec)
    else:
        if not o["features"] or not o["labels"]:
            raise UserError("either --synthetic or both --features and --labels are required")
        for key in ("features", "labels"):
            if not os.path.exists(o[key]):
                raise UserError(f"{key} file not found: {o[key]}")
        ds = load_dataset(o["features"], o["labels"])
    fractions = _parse_fractions(o["split"])
    return split_dataset(ds, fractions, seeded_rng(o["seed"] + _SPLIT_SEED_OFFSET))


def _sampler_config(o: dict) -> SamplerConfig:
    anchor, image = o["sampler"].split("-")
    return SamplerConfig(
        anchor_strategy=anchor, image_strategy=image,
        anchor_fraction=o["anchors_fraction"],
        positives_per_anchor=o["positives"], negatives_per_anchor=o["negatives"],
        beta=o["beta"], gamma=o["gamma"], combination=o["combination"],
        label_similarity=o["label_sim"], das_reduce=o["das_reduce"], seed=o["seed"],
    )


def _train_config(o: dict, sampler_cfg: SamplerConfig) -> TrainConfig:
    return TrainConfig(
        epochs=o["epochs"], batch_size=o["batch_size"], lr0=o["lr"],
        decay_every_epochs=o["decay_every"], decay_factor=o["decay_factor"],
        alpha=o["alpha"], hidden_dims=_parse_int_list(o["hidden"]),
        embedding_dim=o["embedding"], l2_normalize=o["l2_normalize"],
        sampler=sampler_cfg, seed=o["seed"],
    )


def _out_dir(o: dict) -> str:
    os.makedirs(o["out"], exist_ok=True)
    return o["out"]


def cmd_train(o: dict) -> int:
    ds = _load_data(o)
    cfg = _train_config(o, _sampler_config(o))
    out = _out_dir(o)
    every = o["checkpoint_every"]

    def checkpoint_hook(epoch, net, row):
        if every > 0 and (epoch + 1) % every == 0:
            save_checkpoint(net, os.path.join(out, f"model_epoch{epoch + 1}.ckpt"))

    net, log = train(ds, cfg, epoch_callback=checkpoint_hook)
    save_checkpoint(net, os.path.join(out, "model.ckpt"))
    write_train_log(log, os.path.join(out, "train_log.csv"))
    write_manifest(os.path.join(out, "manifest.txt"), "train", o)
    final = log.rows[-1].mean_loss if log.rows else 0.0
    cum = log.rows[-1].cum_triplets if log.rows else 0
    print(f"trained {cfg.epochs} epochs, final mean loss {final:.6g}, {cum} cumulative triplets")
    print(f"artifacts written to {out}")
    return 0


def _resolve_k(o: dict, archive_size: int) -> int:
    return o["k"] if o.get("k") else default_k(archive_size)


def cmd_evaluate(o: dict) -> int:
    ds = _load_data(o)
    ckpt = o["checkpoint"] or os.path.join(o["out"], "model.ckpt")
    if not os.path.exists(ckpt):
        raise UserError(f"checkpoint not found: {ckpt}")
    net = load_checkpoint(ckpt, l2_normalize=o["l2_normalize"])
    if net.layer_dims[0] != ds.n_features:
        raise UserError(
            f"checkpoint expects {net.layer_dims[0]} features but dataset has {ds.n_features}"
        )
    queries = ds.subset(ds.val_idx)
    archive = ds.subset(ds.test_idx)
    report = evaluate(net, queries, archive, _resolve_k(o, len(archive)))
    out = _out_dir(o)
    rows = [(o["method"], report)]
    write_metrics_csv(rows, os.path.join(out, "metrics.csv"))
    write_manifest(os.path.join(out, "manifest.txt"), "evaluate", o)
    print(format_metric_table(rows))
    return 0


def cmd_ablate(o: dict) -> int:
    ds = _load_data(o)
    out = _out_dir(o)
    rows = []
    counts = {}
    for anchor, image in itertools.product(ANCHOR_CHOICES, IMAGE_CHOICES):
        cell = dict(o)
        cell["sampler"] = f"{anchor}-{image}"
        cfg = _train_config(cell, _sampler_config(cell))
        net, log = train(ds, cfg)
        queries = ds.subset(ds.val_idx)
        archive = ds.subset(ds.test_idx)
        report = evaluate(net, queries, archive, _resolve_k(o, len(archive)))
        name = f"{anchor}-{image}"
        rows.append((name, report))
        counts[name] = log.rows[-1].cum_triplets if log.rows else 0
    grid_path = os.path.join(out, "grid.csv")
    with open(grid_path, "w", newline="") as fh:
        fh.write("anchor_strategy,image_strategy,accuracy,precision,recall,f1,cum_triplets\n")
        for name, rep in rows:
            anchor, image = name.split("-")
            fh.write(",".join([anchor, image] +
                              [repr(float(v)) for v in (rep.accuracy, rep.precision, rep.recall, rep.f1)] +
                              [str(counts[name])]) + "\n")
    write_manifest(os.path.join(out, "manifest.txt"), "ablate", o)
    table = format_metric_table(rows).splitlines()
    width = max(len(str(c)) for c in counts.values())
    width = max(width, len("Triplets"))
    print(table[0] + "  " + "Triplets".rjust(width))
    for line, (name, _) in zip(table[1:], rows):
        print(line + "  " + str(counts[name]).rjust(width))
    print(f"grid written to {grid_path}")
    return 0


def cmd_mine_debug(o: dict) -> int:
    ds = _load_data(o)
    ckpt = o["checkpoint"] or os.path.join(o["out"], "model.ckpt")
    if not os.path.exists(ckpt):
        raise UserError(f"checkpoint not found: {ckpt}")
    net = load_checkpoint(ckpt, l2_normalize=o["l2_normalize"])
    if net.layer_dims[0] != ds.n_features:
        raise UserError(
            f"checkpoint expects {net.layer_dims[0]} features but dataset has {ds.n_features}"
        )
    scfg = _sampler_config(o)
    batch_size = o["batch_size"]
    if batch_size > len(ds.train_idx):
        raise UserError(f"batch size {batch_size} exceeds train split size {len(ds.train_idx)}")
    features = ds.features_matrix()
    labels = ds.labels_matrix()
    rng = seeded_rng(o["seed"])
    perm = rng.permutation(ds.train_idx)
    available = len(ds.train_idx) // batch_size
    for b in range(min(o["batches"], available)):
        idx = perm[b * batch_size : (b + 1) * batch_size]
        x = features[idx]
        batch = BatchView.from_embeddings(idx, emb_mod.forward(net, x), labels[idx])
        for line in mine_debug_lines(b, batch, scfg, rng):
            print(line)
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "mine-debug": cmd_mine_debug,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    explicit = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        resolved = resolve_options(command, explicit)
        return COMMANDS[command](resolved)
    except (UserError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
