"""Multi-seed experiments, the ablation lattice and the histogram benchmark."""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .data import (
    Dataset,
    SplitSpec,
    make_inductive_split,
    make_transductive_split,
    training_view,
)
from .histograms import (
    HistogramConfig,
    approx_histograms,
    compute_histograms,
    concat_features,
    exact_histograms,
)
from .labels import LabelSet
from .model import Model, forward
from .trainer import TrainConfig, accuracy, run

REPORT_VERSION = 1
COMPONENTS = ("consistency", "histograms", "iterations")


def split_for_seed(ds: Dataset, mode: str, seed: int, unseen_fraction=0.2) -> SplitSpec:
    """The dataset's own split when it ships one, else a fresh seeded split."""
    if ds.split is not None:
        base = SplitSpec("transductive", ds.split.train, ds.split.val, ds.split.test)
        if mode == "transductive":
            return base
        if ds.split.unseen is not None:
            return ds.split
        return make_inductive_split(ds, base, unseen_fraction, seed)
    base = make_transductive_split(ds, seed=seed)
    if mode == "inductive":
        return make_inductive_split(ds, base, unseen_fraction, seed)
    return base


def inference_features(ds: Dataset, split: SplitSpec, result_x_aug, kept, cfg: TrainConfig):
    """Features for every node of ``ds`` as seen at test time.

    Visible nodes keep their training-time features. Unseen nodes get
    histograms recomputed on the full graph from ground-truth train labels.
    """
    x = np.asarray(ds.x, dtype=np.float64)
    if not cfg.use_histograms:
        return x
    out = np.zeros((ds.n, result_x_aug.shape[1]))
    out[kept] = result_x_aug
    if split.unseen is not None and len(split.unseen):
        labels = LabelSet.from_indices(ds.y, ds.n_classes, split.train, [], test=[])
        full = concat_features(x, compute_histograms(ds.graph, labels, cfg.histogram))
        out[split.unseen] = full[split.unseen]
    return out


def evaluate_model(model: Model, x_all, ds: Dataset, split: SplitSpec) -> dict:
    """Test accuracy from a single forward pass over the test rows, no smoothing."""
    test = split.test
    pred = np.zeros((ds.n, model.n_classes))
    pred[test] = forward(model, x_all[test])
    mask = np.zeros(ds.n, dtype=bool)
    mask[test] = True
    out = {"accuracy": accuracy(pred, ds.y, mask)}
    if split.unseen is not None:
        frac = split.unseen_fraction if split.unseen_fraction is not None else 0.2
        seen_mask = mask.copy()
        seen_mask[split.unseen] = False
        unseen_mask = np.zeros(ds.n, dtype=bool)
        unseen_mask[split.unseen] = True
        seen = accuracy(pred, ds.y, seen_mask)
        unseen = accuracy(pred, ds.y, unseen_mask)
        out.update(seen_acc=seen, unseen_acc=unseen, prod=prod_metric(seen, unseen, frac))
    return out


def prod_metric(seen, unseen, unseen_fraction=0.2) -> float:
    return (1.0 - unseen_fraction) * seen + unseen_fraction * unseen


def run_seed(ds: Dataset, cfg: TrainConfig, mode="transductive", unseen_fraction=0.2):
    """Train and evaluate one seed. Returns ``(record, model, x_all, split)``."""
    split = split_for_seed(ds, mode, cfg.seed, unseen_fraction)
    g, x, labels, kept = training_view(ds, split)
    if split.unseen is not None and np.isin(split.unseen, kept).any():
        raise RuntimeError("unseen nodes leaked into the training graph")

    result = run(g, x, labels, cfg)
    t0 = time.perf_counter()
    x_all = inference_features(ds, split, result.x_aug, kept, cfg)
    metrics = evaluate_model(result.model, x_all, ds, split)
    timings = {**result.timings, "inference": time.perf_counter() - t0}
    record = {
        "seed": cfg.seed,
        **metrics,
        "history": result.history,
        "timings": timings,
    }
    return record, result.model, x_all, split


def _seed_worker(args):
    ds, cfg, mode, frac = args
    return run_seed(ds, cfg, mode, frac)[0]


def run_seeds(ds: Dataset, cfg: TrainConfig, seeds, mode="transductive", unseen_fraction=0.2, jobs=1) -> dict:
    """Run ``cfg`` once per seed and assemble a report ordered by seed."""
    tasks = [(ds, replace(cfg, seed=s), mode, unseen_fraction) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_seed_worker, tasks))
    else:
        records = [_seed_worker(t) for t in tasks]
    return build_report(records, cfg, mode)


def summarize(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def build_report(records, cfg: TrainConfig, mode: str) -> dict:
    accs = [r["accuracy"] for r in records]
    mean, std = summarize(accs)
    report = {
        "report_version": REPORT_VERSION,
        "mode": mode,
        "config": cfg.to_dict(),
        "seeds": [r["seed"] for r in records],
        "accuracies": accs,
        "mean": mean,
        "std": std,
        "per_seed": [{k: v for k, v in r.items() if k != "timings"} for r in records],
        "timings": [r["timings"] for r in records],
    }
    if mode == "inductive":
        for key in ("seen_acc", "unseen_acc", "prod"):
            report[key], report[key + "_std"] = summarize([r[key] for r in records])
    return report


def lattice_cells(requested=None) -> list[tuple[str, dict]]:
    """The 8 on/off combinations of the three components, full method first.

    Each cell is ``(name, flags)`` where ``name`` is ``full``, ``base`` or the
    ``+``-joined enabled components.
    """
    cells = []
    for bits in itertools.product((True, False), repeat=len(COMPONENTS)):
        on = [c for c, b in zip(COMPONENTS, bits) if b]
        name = "full" if len(on) == len(COMPONENTS) else ("+".join(on) if on else "base")
        cells.append((name, dict(zip(COMPONENTS, bits))))
    if requested:
        by_name = dict(cells)
        unknown = [r for r in requested if r not in by_name]
        if unknown:
            raise ValueError(f"unknown ablation cells {unknown}; choose from {list(by_name)}")
        cells = [(r, by_name[r]) for r in requested]
    return cells


def cell_config(cfg: TrainConfig, flags: dict) -> TrainConfig:
    return replace(
        cfg,
        use_consistency=flags["consistency"],
        use_histograms=flags["histograms"],
        use_iterations=flags["iterations"],
    )


def run_ablation(ds: Dataset, cfg: TrainConfig, seeds, cells=None, mode="transductive", jobs=1) -> dict:
    rows = []
    for name, flags in lattice_cells(cells):
        rep = run_seeds(ds, cell_config(cfg, flags), seeds, mode, jobs=jobs)
        rows.append({"cell": name, **flags, "accuracies": rep["accuracies"], "mean": rep["mean"], "std": rep["std"]})
    return {"report_version": REPORT_VERSION, "mode": mode, "config": cfg.to_dict(), "seeds": list(seeds), "cells": rows}


def format_ablation(table: dict) -> str:
    header = f"{'cell':<32}{'cons':>6}{'hist':>6}{'iter':>6}{'mean':>9}{'std':>8}"
    lines = [header, "-" * len(header)]
    for r in table["cells"]:
        flags = ["x" if r[c] else "." for c in COMPONENTS]
        lines.append(
            f"{r['cell']:<32}{flags[0]:>6}{flags[1]:>6}{flags[2]:>6}"
            f"{100 * r['mean']:>9.2f}{100 * r['std']:>8.2f}"
        )
    return "\n".join(lines)


def time_featurization(g, labels, cfg: HistogramConfig, trials=5) -> float:
    """Median wall-clock seconds of one histogram computation."""
    fn = exact_histograms if cfg.mode == "exact" else approx_histograms
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn(g, labels, cfg)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_histograms(ds: Dataset, cfg: TrainConfig, ells, trials=5, seeds=(0,), alphas=None, with_accuracy=True) -> dict:
    """Featurization runtime and downstream accuracy of exact vs approximate histograms per hop limit."""
    alphas = alphas or {"exact": cfg.histogram.alpha, "approximate": 0.1}
    split = split_for_seed(ds, "transductive", seeds[0])
    labels = ds.labels(split)
    rows = []
    for ell in ells:
        row = {"ell": int(ell)}
        for mode in ("exact", "approximate"):
            hcfg = HistogramConfig(alpha=alphas[mode], ell=int(ell), mode=mode)
            row[f"{mode}_seconds"] = time_featurization(ds.graph, labels, hcfg, trials)
            if with_accuracy:
                rep = run_seeds(ds, replace(cfg, histogram=hcfg, use_histograms=True), seeds)
                row[f"{mode}_accuracy"] = rep["mean"]
        rows.append(row)
    return {
        "report_version": REPORT_VERSION,
        "trials": trials,
        "seeds": list(seeds),
        "alphas": alphas,
        "rows": rows,
        "exact_seconds": [r["exact_seconds"] for r in rows],
        "approximate_seconds": [r["approximate_seconds"] for r in rows],
    }


def json_safe(obj):
    """Replace NaN/inf floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    return obj
