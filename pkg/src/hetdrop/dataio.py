"""File formats: plain-text dataset ingestion, checkpoints, reports, configs.

Dataset files (all UTF-8 text):
  edges.txt      one "u v" pair per line, whitespace separated
  features.csv   one CSV row of feature values per node
  labels.txt     one integer per line, -1 for unlabeled
  masks*.txt     one character per line: t(rain) / v(al) / s(test) / u(nassigned)

Reports serialize to canonical JSON (sorted keys), with wall-clock timing
kept out of the canonical form so identical seeded runs produce identical
bytes.
"""

from __future__ import annotations

import io
import json
import os

import numpy as np

from .analysis import DeletionStats
from .graph import Graph, build_graph
from .pipeline import RunReport, TrainConfig

MASK_CHARS = {"t": 0, "v": 1, "s": 2, "u": 3}
CHECKPOINT_FORMAT = "hetdrop-checkpoint-v1"
REPORT_FORMAT = "hetdrop-report-v1"


# ---------------------------------------------------------------- datasets

def save_edges(path, edges):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in np.asarray(edges).reshape(-1, 2):
            fh.write(f"{int(u)} {int(v)}\n")


def load_edges(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected 'u v', got {line!r}")
            out.append((int(parts[0]), int(parts[1])))
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def save_features(path, features):
    np.savetxt(path, np.asarray(features, dtype=np.float64), delimiter=",", fmt="%.17g")


def load_features(path):
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def save_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for y in np.asarray(labels, dtype=np.int64):
            fh.write(f"{int(y)}\n")


def load_labels(path):
    with open(path, encoding="utf-8") as fh:
        return np.asarray([int(line) for line in fh if line.strip()], dtype=np.int64)


def save_masks(path, train, val, test):
    chars = np.full(len(train), "u")
    chars[np.asarray(train, dtype=bool)] = "t"
    chars[np.asarray(val, dtype=bool)] = "v"
    chars[np.asarray(test, dtype=bool)] = "s"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chars) + "\n")


def load_masks(path):
    codes = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            ch = line.strip()
            if not ch:
                continue
            if ch not in MASK_CHARS:
                raise ValueError(f"{path}:{ln}: mask char must be one of t/v/s/u, got {ch!r}")
            codes.append(MASK_CHARS[ch])
    codes = np.asarray(codes)
    return codes == 0, codes == 1, codes == 2


def save_dataset(out_dir, graph: Graph, extra_masks=None):
    """Write the four dataset files; extra_masks is an optional list of
    (train, val, test) triples written as masks_00.txt, masks_01.txt, ..."""
    os.makedirs(out_dir, exist_ok=True)
    save_edges(os.path.join(out_dir, "edges.txt"), graph.edges)
    save_features(os.path.join(out_dir, "features.csv"), graph.features)
    save_labels(os.path.join(out_dir, "labels.txt"), graph.labels)
    if extra_masks is None:
        save_masks(os.path.join(out_dir, "masks.txt"),
                   graph.train_mask, graph.val_mask, graph.test_mask)
    else:
        for i, (tr, va, te) in enumerate(extra_masks):
            save_masks(os.path.join(out_dir, f"masks_{i:02d}.txt"), tr, va, te)


def dataset_mask_files(data_dir):
    """Per-split mask files in order, falling back to a single masks.txt."""
    names = sorted(f for f in os.listdir(data_dir)
                   if f.startswith("masks") and f.endswith(".txt"))
    if not names:
        raise FileNotFoundError(f"no mask files in {data_dir}")
    return [os.path.join(data_dir, f) for f in names]


def load_dataset(data_dir, mask_file=None) -> Graph:
    edges = load_edges(os.path.join(data_dir, "edges.txt"))
    features = load_features(os.path.join(data_dir, "features.csv"))
    labels = load_labels(os.path.join(data_dir, "labels.txt"))
    if mask_file is None:
        mask_file = dataset_mask_files(data_dir)[0]
    train, val, test = load_masks(mask_file)
    return build_graph(edges, features, labels, (train, val, test))


# -------------------------------------------------------------- checkpoints

def save_checkpoint(path, arrays: dict, header: dict):
    """Named tensors plus a JSON header in one npz container (bit-exact)."""
    payload = {f"tensor_{k}": np.asarray(v) for k, v in arrays.items()}
    payload["__header__"] = np.frombuffer(
        json.dumps({"format": CHECKPOINT_FORMAT, **header}, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path):
    with np.load(path) as z:
        header = json.loads(bytes(z["__header__"]).decode())
        if header.pop("format", None) != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        arrays = {k[len("tensor_"):]: z[k] for k in z.files if k.startswith("tensor_")}
    return arrays, header


def save_model(path, model):
    save_checkpoint(path, {k: p.value for k, p in model.params.items()}, model.header())


def load_model(path):
    from .models import EdgeClassifier, NodeModel

    arrays, header = load_checkpoint(path)
    kind = header.pop("kind")
    if kind == "node_model":
        model = NodeModel(header["variant"], header["in_dim"], header["n_classes"],
                          hidden=header["hidden"], k=header["k"], dropout=header["dropout"])
    elif kind == "edge_classifier":
        model = EdgeClassifier(header["in_dim"], proj_dim=header["proj_dim"],
                               gamma=header["gamma"])
    else:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    for name, p in model.params.items():
        p.value[...] = arrays[name]
    return model


# ------------------------------------------------------------------ reports

def _mask_to_bits(mask):
    return "".join("1" if b else "0" for b in mask)


def bits_to_mask(bits: str):
    return np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1")


def report_to_dict(report: RunReport, include_timing=False) -> dict:
    out = {
        "format": REPORT_FORMAT,
        "config": report.config,
        "model": report.model_variant,
        "mode": report.mode,
        "seed": report.seed,
        "split": report.split,
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
        "curves": {
            "train_loss": report.train_loss,
            "train_acc": report.train_acc,
            "val_loss": report.val_loss,
            "val_acc": report.val_acc,
            "structure_changes": report.structure_changes,
        },
        "test_accuracy": report.test_accuracy,
        "final_train_loss": report.final_train_loss,
        "final_val_accuracy": report.final_val_accuracy,
        "keep_mask": None if report.keep_mask is None else _mask_to_bits(report.keep_mask),
        "deletion": None if report.deletion is None else report.deletion.to_dict(),
        "pretrain": report.pretrain,
        "notes": report.notes,
    }
    if include_timing:
        out["wall_clock_s"] = report.wall_clock_s
    return out


def report_to_json(report: RunReport, include_timing=False) -> str:
    return json.dumps(report_to_dict(report, include_timing), sort_keys=True, indent=1)


def save_report(path, report: RunReport):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a {REPORT_FORMAT} file")
    return d


# ------------------------------------------------------------------ configs

def parse_kv(text: str) -> dict:
    """Flat key = value document; # starts a comment, blank lines ignored."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_kv(d: dict) -> str:
    buf = io.StringIO()
    for k in sorted(d):
        buf.write(f"{k} = {d[k]}\n")
    return buf.getvalue()


def _coerce(value: str, like):
    if isinstance(like, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if like is None or isinstance(like, float):
        return None if value.lower() == "none" else float(value)
    if isinstance(like, int):
        return int(value)
    return value


def train_config_from_kv(kv: dict) -> TrainConfig:
    config = TrainConfig()
    for key, value in kv.items():
        if not hasattr(config, key):
            raise ValueError(f"unknown training key {key!r}")
        setattr(config, key, _coerce(value, getattr(config, key)))
    config.validate()
    return config
