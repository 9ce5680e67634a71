"""Command-line interface: ``cohop {train,ablate,bench-histograms,eval,generate-sbm}``.

Exit codes: 0 on success, 2 on a configuration error, 3 on a data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import (
    generate_sbm,
    load_dataset,
    make_transductive_split,
    save_dataset,
    training_view,
)
from .evaluate import (
    bench_histograms,
    build_report,
    cell_config,
    evaluate_model,
    format_ablation,
    inference_features,
    json_safe,
    lattice_cells,
    run_ablation,
    run_seed,
    run_seeds,
    split_for_seed,
)
from .exceptions import ConfigError, DataError
from .histograms import DEFAULT_ALPHA, HistogramConfig
from .model import forward, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, accuracy, augment_features

EXIT_CONFIG = 2
EXIT_DATA = 3

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, type=Path, help="dataset directory")
    p.add_argument("--mode", choices=("transductive", "inductive"), default="transductive")
    p.add_argument("--unseen-fraction", type=float, default=0.2)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--seed-base", type=int, default=0, help="first seed")
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--tau", type=float, default=0.9)
    p.add_argument("--lambda", dest="lam", type=float, default=0.7)
    p.add_argument("--alpha", type=float, default=None, help="default 0.9 exact, 0.1 approximate")
    p.add_argument("--ell", type=int, default=10)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--approx-histograms", action="store_true")
    p.add_argument("--no-histograms", action="store_true")
    p.add_argument("--no-consistency", action="store_true")
    p.add_argument("--no-iterations", action="store_true")
    p.add_argument("--no-smoothing", action="store_true")
    p.add_argument("--hard-pseudo-labels", action="store_true")
    p.add_argument("--detach-consistency-target", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    p.add_argument("--out", type=Path, default=None, help="write JSON report here")
    p.add_argument("--csv", action="store_true", help="print flattened means as CSV")


def config_from_args(args) -> TrainConfig:
    mode = "approximate" if args.approx_histograms else "exact"
    alpha = DEFAULT_ALPHA[mode] if args.alpha is None else args.alpha
    return TrainConfig(
        iterations=args.iterations,
        epochs=args.epochs,
        gamma=args.gamma,
        tau=args.tau,
        lam=args.lam,
        lr=args.lr,
        hidden=args.hidden,
        seed=args.seed_base,
        histogram=HistogramConfig(alpha=alpha, ell=args.ell, mode=mode),
        use_consistency=not args.no_consistency,
        use_histograms=not args.no_histograms,
        use_iterations=not args.no_iterations,
        use_smoothing=not args.no_smoothing,
        hard_pseudo_labels=args.hard_pseudo_labels,
        detach_consistency_target=args.detach_consistency_target,
    )


def _seeds(args):
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be at least 1, got {args.seeds}")
    return list(range(args.seed_base, args.seed_base + args.seeds))


def _emit(report: dict, out: Path | None) -> None:
    text = json.dumps(json_safe(report), indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n")


def _csv_row(fields: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    w.writerow(fields)
    return buf.getvalue().rstrip("\n")


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    if args.ablation is not None:
        try:
            (_, flags), = lattice_cells([args.ablation])
        except ValueError as e:
            raise ConfigError(str(e)) from None
        cfg = cell_config(cfg, flags)
    ds = load_dataset(args.dataset)
    seeds = _seeds(args)
    if args.save_models is None:
        report = run_seeds(ds, cfg, seeds, args.mode, args.unseen_fraction, jobs=args.jobs)
    else:
        args.save_models.mkdir(parents=True, exist_ok=True)
        records = []
        for s in seeds:
            record, model, _, _ = run_seed(ds, replace(cfg, seed=s), args.mode, args.unseen_fraction)
            save_checkpoint(model, args.save_models / f"model_seed{s}.cohm")
            records.append(record)
        report = build_report(records, cfg, args.mode)
    report["command"] = "train"
    if args.metrics is not None:
        with open(args.metrics, "w") as f:
            for rec in report["per_seed"]:
                for it in rec["history"]:
                    f.write(json.dumps(json_safe({"seed": rec["seed"], **it})) + "\n")
    _emit(report, args.out)
    if args.csv:
        keys = ["mean", "std"] + (["seen_acc", "unseen_acc", "prod"] if args.mode == "inductive" else [])
        print(_csv_row({k: report[k] for k in keys}))
    return 0


def cmd_ablate(args) -> int:
    cfg = config_from_args(args)
    cells = args.cells.split(",") if args.cells else None
    try:
        lattice_cells(cells)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    ds = load_dataset(args.dataset)
    table = run_ablation(ds, cfg, _seeds(args), cells, args.mode, jobs=args.jobs)
    table["command"] = "ablate"
    print(format_ablation(table))
    if args.out is not None:
        _emit(table, args.out)
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", "mean", "std"])
        for r in table["cells"]:
            w.writerow([r["cell"], r["mean"], r["std"]])
        print(buf.getvalue().rstrip("\n"))
    return 0


def cmd_bench(args) -> int:
    cfg = config_from_args(args)
    try:
        ells = [int(v) for v in args.ells.split(",")]
    except ValueError:
        raise ConfigError(f"--ells must be comma-separated integers, got {args.ells!r}") from None
    if any(e < 1 for e in ells):
        raise ConfigError("every hop limit in --ells must be at least 1")
    alphas = {
        "exact": args.alpha if args.alpha is not None else DEFAULT_ALPHA["exact"],
        "approximate": args.approx_alpha,
    }
    ds = load_dataset(args.dataset)
    report = bench_histograms(
        ds, cfg, ells, trials=args.trials, seeds=_seeds(args), alphas=alphas, with_accuracy=not args.no_accuracy
    )
    report["command"] = "bench-histograms"
    _emit(report, args.out)
    return 0


def cmd_eval(args) -> int:
    if args.config is not None:
        saved = json.loads(Path(args.config).read_text())
        cfg = TrainConfig.from_dict(saved["config"])
        mode = saved.get("mode", args.mode)
    else:
        cfg = config_from_args(args)
        mode = args.mode
    ds = load_dataset(args.dataset)
    model = load_checkpoint(args.checkpoint)
    split = split_for_seed(ds, mode, args.seed, args.unseen_fraction)
    g, x, labels, kept = training_view(ds, split)
    x_aug, _ = augment_features(g, x, labels, cfg)
    if x_aug.shape[1] != model.n_features:
        raise DataError(
            f"checkpoint expects {model.n_features} input features but the dataset gives {x_aug.shape[1]}",
            path=args.checkpoint,
        )
    x_all = inference_features(ds, split, x_aug, kept, cfg)
    report = {"command": "eval", "mode": mode, "seed": args.seed, **evaluate_model(model, x_all, ds, split)}
    report["val_accuracy"] = accuracy(forward(model, x_aug), labels.y, labels.val)
    _emit(report, args.out)
    return 0


def cmd_generate(args) -> int:
    ds = generate_sbm(
        args.n, args.classes, args.p_in, args.p_out, args.feature_dim, args.noise_sigma, args.seed
    )
    if args.with_split:
        ds = replace(ds, split=make_transductive_split(ds, seed=args.seed))
    save_dataset(ds, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and evaluate over several seeds")
    _add_config_flags(p)
    p.add_argument("--ablation", default=None, help="run one lattice cell, e.g. 'base' or 'histograms'")
    p.add_argument("--metrics", type=Path, default=None, help="per-iteration metrics as JSON lines")
    p.add_argument("--save-models", type=Path, default=None, help="directory for per-seed checkpoints")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="mean accuracy for every on/off combination of the components")
    _add_config_flags(p)
    p.add_argument("--cells", default=None, help="comma-separated subset of cells")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench-histograms", help="exact vs approximate histogram runtime and accuracy")
    _add_config_flags(p)
    p.add_argument("--ells", default="1,2,4,6,8,10")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--approx-alpha", type=float, default=DEFAULT_ALPHA["approximate"])
    p.add_argument("--no-accuracy", action="store_true", help="time featurization only")
    p.set_defaults(func=cmd_bench, seeds=1)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0, help="seed of the split the model was trained on")
    p.add_argument("--config", type=Path, default=None, help="train report whose config to reuse")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate-sbm", help="write a synthetic block-model dataset directory")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.05)
    p.add_argument("--p-out", type=float, default=0.005)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-split", action="store_true", help="also write split.json")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "approx_histograms", False) and getattr(args, "no_histograms", False):
        parser.error("--approx-histograms cannot be combined with --no-histograms")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"cohop: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"cohop: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
