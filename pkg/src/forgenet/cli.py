"""Command line entry point: ``forgenet <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .data import DataError, load_csv, load_features
from .experiment import ExperimentConfig, run
from .masked_net import NetConfig, TrainingDiverged
from .pipeline import ForgeNetModel, fit
from .synth import SynthSpec, simulate


def _forest_params(args) -> dict:
    params = {}
    if args.n_trees is not None:
        params["n_trees"] = args.n_trees
    if args.max_depth is not None:
        params["max_depth"] = args.max_depth
    if args.method == "GBM" and args.learning_rate is not None:
        params["learning_rate"] = args.learning_rate
    return params


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.seed is not None:
        cfg.master_seed = args.seed
    report = run(cfg)
    out = Path(cfg.output_dir)
    print(f"wrote {len(report.rows)} rows to {out / 'replicates.csv'}")
    for r in report.summary:
        if r["metric"] == "test_auc":
            print(f"{r['method']:>14s}  AUC {r['mean']:.4f} +/- {r['se']:.4f}")
    return 0


def cmd_simulate(args) -> int:
    spec = SynthSpec(p=args.p, n=args.n, n_cores=args.n_cores, p0=args.p0,
                     ba_m=args.ba_m, seed=args.seed)
    out = simulate(spec)
    out.write(args.out_dir)
    print(f"wrote {spec.n} x {spec.p} dataset to {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    d = load_csv(args.features, args.labels)
    cfg = NetConfig()
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    if args.hidden is not None:
        cfg = replace(cfg, hidden_dims=[int(h) for h in args.hidden.split(",") if h])
    model = fit(d, args.method, _forest_params(args), cfg, seed=args.seed,
                normalize=not args.no_normalize)
    model.save(args.model_dir)
    print(f"graph has {model.graph.size} of {d.p} features; model saved to {args.model_dir}")
    return 0


def cmd_predict(args) -> int:
    model = ForgeNetModel.load(args.model_dir)
    x, names = load_features(args.features)
    probs = model.predict(x, names)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["probability"])
        for p in probs:
            w.writerow([repr(float(p))])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_importance(args) -> int:
    model = ForgeNetModel.load(args.model_dir)
    report = model.feature_importance()
    out = args.out or str(Path(args.model_dir) / "importance.csv")
    report.to_csv(out, model.feature_names)
    for j in report.ranking[: args.top]:
        print(f"{model.feature_names[j]}\t{report.scores[j]:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forgenet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run the replicated simulation benchmark")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("simulate", help="write one synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--p", type=int, default=500)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--p0", type=int, default=15)
    p.add_argument("--n-cores", type=int, default=1)
    p.add_argument("--ba-m", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a forgeNet model on CSV data")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--method", choices=["RF", "GBM"], default="RF", type=str.upper)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--learning-rate", type=float, help="GBM shrinkage")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", help="comma separated hidden widths, e.g. 64,16")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="class-1 probabilities from a saved model")
    p.add_argument("--features", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("importance", help="GCW feature importance of a saved model")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_importance)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, TrainingDiverged, ValueError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"forgenet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
