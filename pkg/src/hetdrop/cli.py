"""Command-line interface.

Subcommands:
  generate   synthesize a dataset from an SBM spec file
  train      run one experiment config across its splits, write reports
  analyze    deletion / distance / spectrum reports for finished runs
  eigen      spectrum of a dataset's normalized adjacency
  info       dataset statistics including the homophily ratio

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import dataio
from .analysis import (deletion_stats, distance_stats, recommend_gamma,
                       spectrum_report, symmetric_eigenvalues)
from .graph import (UNLABELED, apply_deletion, build_graph, homophily_ratio,
                    stratified_split_masks, sym_normalize)
from .pipeline import DivergenceError, TrainConfig, run_experiment
from .synth import SbmSpec, feature_regime, generate_sbm

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class ExperimentConfig:
    """Everything a `train` invocation needs, read from a flat key=value file."""

    data_dir: str | None = None
    synth_spec: str | None = None
    model: str = "sgc2"
    splits: int = 10
    out_dir: str = "runs"
    workers: int = 1
    split_seed: int = 0
    gamma_auto: bool = False
    train: TrainConfig = None

    def validate(self):
        if (self.data_dir is None) == (self.synth_spec is None):
            raise ValueError("config needs exactly one data source (data_dir or synth_spec)")
        if self.splits < 1 or self.workers < 1:
            raise ValueError("splits and workers must be >= 1")
        self.train.validate()


_EXP_KEYS = ("data_dir", "synth_spec", "model", "splits", "out_dir", "workers", "split_seed")


def experiment_config_from_kv(kv: dict) -> ExperimentConfig:
    exp = ExperimentConfig(train=TrainConfig())
    train_kv = {}
    for key, value in kv.items():
        if key in _EXP_KEYS:
            default = getattr(exp, key)
            if key in ("splits", "workers", "split_seed"):
                setattr(exp, key, int(value))
            else:
                setattr(exp, key, value)
        elif key == "gamma" and value.strip().lower() == "auto":
            exp.gamma_auto = True
        else:
            train_kv[key] = value
    exp.train = dataio.train_config_from_kv(train_kv)
    exp.validate()
    return exp


def experiment_config_to_kv(exp: ExperimentConfig) -> dict:
    kv = {k: getattr(exp, k) for k in _EXP_KEYS if getattr(exp, k) is not None}
    for key, value in asdict(exp.train).items():
        kv[key] = value
    if exp.gamma_auto:
        kv["gamma"] = "auto"
    return {k: str(v) for k, v in kv.items()}


def sbm_spec_from_kv(kv: dict) -> SbmSpec:
    spec = SbmSpec()
    regime = None
    for key, value in kv.items():
        if key == "regime":
            regime = value
            continue
        if not hasattr(spec, key):
            raise ValueError(f"unknown SBM spec key {key!r}")
        current = getattr(spec, key)
        if isinstance(current, int):
            spec = replace(spec, **{key: int(value)})
        elif isinstance(current, float):
            spec = replace(spec, **{key: float(value)})
        else:
            raise ValueError(f"key {key!r} is not settable from a spec file")
    if regime is not None:
        spec = feature_regime(spec, regime)
    spec.validate()
    return spec


# ------------------------------------------------------------------ generate

def cmd_generate(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        spec = sbm_spec_from_kv(dataio.parse_kv(fh.read()))
    graph = generate_sbm(spec)
    masks = []
    for i in range(args.splits):
        rng = np.random.default_rng([spec.seed, 1000 + i])
        masks.append(stratified_split_masks(graph.labels, rng))
    dataio.save_dataset(args.out_dir, graph, extra_masks=masks)
    with open(os.path.join(args.out_dir, "spec_echo.txt"), "w", encoding="utf-8") as fh:
        fh.write(dataio.format_kv({k: str(v) for k, v in asdict(spec).items()
                                   if v is not None}))
    h = homophily_ratio(graph)
    print(f"generated {args.out_dir}: n={graph.n} m={graph.m} f={graph.n_features} "
          f"c={graph.n_classes} h={h:.4f} splits={args.splits}")
    return EXIT_OK


# -------------------------------------------------------------------- train

def _split_masks(graph, data_dir, exp, split):
    if data_dir is not None:
        files = dataio.dataset_mask_files(data_dir)
        if len(files) > split:
            return dataio.load_masks(files[split]), f"mask file {os.path.basename(files[split])}"
    rng = np.random.default_rng([exp.split_seed, split])
    return stratified_split_masks(graph.labels, rng), "stratified split (48/32/20 per class)"


def _run_split_worker(payload):
    graph = build_graph(payload["edges"], payload["features"], payload["labels"],
                        payload["masks"], payload["n_classes"])
    config = TrainConfig(**payload["train"])
    report = run_experiment(graph, payload["model"], config, split=payload["split"])
    return report


def _resolve_gamma(exp: ExperimentConfig, graph) -> int:
    stats = distance_stats(graph)
    gamma = recommend_gamma(stats)
    if gamma is None:
        raise ValueError("gamma=auto needs both in-class and between-class edges")
    return gamma


def cmd_train(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        exp = experiment_config_from_kv(dataio.parse_kv(fh.read()))
    if exp.synth_spec is not None:
        with open(exp.synth_spec, encoding="utf-8") as fh:
            base_graph = generate_sbm(sbm_spec_from_kv(dataio.parse_kv(fh.read())))
        data_dir = None
    else:
        base_graph = dataio.load_dataset(exp.data_dir)
        data_dir = exp.data_dir
    if exp.gamma_auto:
        exp.train.gamma = _resolve_gamma(exp, base_graph)

    os.makedirs(exp.out_dir, exist_ok=True)
    with open(os.path.join(exp.out_dir, "config_echo.txt"), "w", encoding="utf-8") as fh:
        fh.write(dataio.format_kv(experiment_config_to_kv(exp)))

    payloads = []
    split_notes = []
    for split in range(exp.splits):
        (tr, va, te), note = _split_masks(base_graph, data_dir, exp, split)
        split_notes.append(note)
        cfg = replace(exp.train, seed=exp.train.seed + split)
        payloads.append({
            "edges": np.asarray(base_graph.edges),
            "features": np.asarray(base_graph.features),
            "labels": np.asarray(base_graph.labels),
            "masks": (tr, va, te),
            "n_classes": base_graph.n_classes,
            "model": exp.model,
            "train": asdict(cfg),
            "split": split,
        })

    if exp.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=exp.workers) as pool:
            reports = list(pool.map(_run_split_worker, payloads))
    else:
        reports = [_run_split_worker(p) for p in payloads]

    accs, timings = [], []
    for report, note in zip(reports, split_notes):
        report.notes.append(f"splits: {note}")
        dataio.save_report(os.path.join(exp.out_dir, f"report_{report.split:02d}.json"), report)
        accs.append(report.test_accuracy)
        timings.append(report.wall_clock_s)
    accs = np.asarray(accs)
    summary = {
        "model": exp.model,
        "mode": exp.train.mode,
        "splits": exp.splits,
        "test_accuracies": [float(a) for a in accs],
        "mean_test_accuracy": float(accs.mean()),
        "std_test_accuracy": float(accs.std(ddof=1)) if exp.splits > 1 else 0.0,
        "wall_clock_s": timings,
    }
    with open(os.path.join(exp.out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"{exp.model} {exp.train.mode}: test accuracy "
          f"{100 * summary['mean_test_accuracy']:.2f} +- {100 * summary['std_test_accuracy']:.2f} "
          f"over {exp.splits} splits -> {exp.out_dir}")
    return EXIT_OK


# ------------------------------------------------------------------ analyze

def cmd_analyze(args) -> int:
    graph = dataio.load_dataset(args.data_dir)
    out_dir = os.path.join(args.run_dir, "analysis")
    os.makedirs(out_dir, exist_ok=True)

    stats = distance_stats(graph)
    with open(os.path.join(out_dir, "distance_stats.csv"), "w", encoding="utf-8") as fh:
        fh.write("class_a,class_b,mean,variance,edges\n")
        for row in stats.to_rows():
            fh.write(f"{row['class_a']},{row['class_b']},{row['mean']:.17g},"
                     f"{row['variance']:.17g},{row['edges']}\n")
    gamma = recommend_gamma(stats)
    with open(os.path.join(out_dir, "gamma.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "in_class": stats.in_class,
            "between_class": stats.between_class,
            "recommended_gamma": gamma,
        }, fh, sort_keys=True, indent=1)
        fh.write("\n")

    report_files = sorted(f for f in os.listdir(args.run_dir)
                          if f.startswith("report_") and f.endswith(".json"))
    if not report_files:
        raise FileNotFoundError(f"no report_*.json files in {args.run_dir}")
    full_labels = bool((graph.labels != UNLABELED).all())
    deletions = []
    for name in report_files:
        rep = dataio.load_report(os.path.join(args.run_dir, name))
        split = rep["split"]
        if rep["keep_mask"] is None:
            raise ValueError(f"{name}: report has no keep mask")
        keep = dataio.bits_to_mask(rep["keep_mask"])
        after = apply_deletion(graph, keep)
        if full_labels:
            deletions.append({"split": split, **deletion_stats(graph, keep).to_dict()})
        spect = spectrum_report(graph, after, bins=args.bins)
        with open(os.path.join(out_dir, f"spectrum_{split:02d}.csv"), "w", encoding="utf-8") as fh:
            fh.write("index,before,after\n")
            for i, (b, a) in enumerate(zip(spect.eigenvalues_before, spect.eigenvalues_after)):
                fh.write(f"{i},{b:.17g},{a:.17g}\n")
    with open(os.path.join(out_dir, "deletion.json"), "w", encoding="utf-8") as fh:
        json.dump(deletions, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"analysis written to {out_dir} "
          f"({len(report_files)} run(s), gamma recommendation: {gamma})")
    return EXIT_OK


# -------------------------------------------------------------------- eigen

def cmd_eigen(args) -> int:
    graph = dataio.load_dataset(args.data_dir)
    prop = sym_normalize(graph)
    ev = symmetric_eigenvalues(prop, dense_limit=args.dense_limit)
    out = args.out or os.path.join(args.data_dir, "eigenvalues.csv")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("eigenvalue\n")
        for x in ev:
            fh.write(f"{x:.17g}\n")
    ones = int((np.abs(ev - 1.0) <= 1e-6).sum())
    print(f"{ev.shape[0]} eigenvalues in [{ev.min():.6f}, {ev.max():.6f}], "
          f"{ones} equal to 1 (+-1e-6), trace residual "
          f"{abs(ev.sum() - prop.trace()):.2e} -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------- info

def cmd_info(args) -> int:
    graph = dataio.load_dataset(args.data_dir, mask_file=args.masks)
    print(f"nodes      {graph.n}")
    print(f"edges      {graph.m}")
    print(f"features   {graph.n_features}")
    print(f"classes    {graph.n_classes}")
    if graph.m:
        print(f"homophily  {homophily_ratio(graph):.4f}")
        try:
            print(f"homophily(train-train) {homophily_ratio(graph, 'train'):.4f}")
        except ValueError:
            print("homophily(train-train) n/a (no such edges)")
    print(f"split      train={int(graph.train_mask.sum())} "
          f"val={int(graph.val_mask.sum())} test={int(graph.test_mask.sum())}")
    return EXIT_OK


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetdrop",
                     description="Learned heterophilious-edge dropping for GNNs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a dataset from an SBM spec")
    p.add_argument("spec", help="flat key=value SBM spec file")
    p.add_argument("out_dir")
    p.add_argument("--splits", type=int, default=10, help="mask files to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="run an experiment config across its splits")
    p.add_argument("config", help="flat key=value experiment config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="deletion/distance/spectrum reports for runs")
    p.add_argument("data_dir")
    p.add_argument("run_dir")
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eigen", help="spectrum of the dataset's normalized adjacency")
    p.add_argument("data_dir")
    p.add_argument("--out", default=None)
    p.add_argument("--dense-limit", type=int, default=4000)
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("info", help="dataset statistics")
    p.add_argument("data_dir")
    p.add_argument("--masks", default=None, help="specific mask file")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
