"""Command-line front door: synth, train-dump, predict, evaluate.

Runs are driven by a TOML config plus flags (flags win).  All randomness
flows from a single seed, so identical commands produce identical output
bytes.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import synth
from .evaluation import METHODS, EvalConfig, predict_week, run_rolling_eval
from .network import IngestError, ValidationError, ingest_events
from .training import construct_train, write_training_csv


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _parse_weeks(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in spec.split(",") if tok]


def _parse_methods(spec: str) -> list[str]:
    methods = [tok.strip() for tok in spec.split(",") if tok.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    return methods


def _dataset_from_config(cfg: dict, directed_flag=None):
    data = cfg.get("data", {})
    for key in ("communications", "profiles", "adoption"):
        if key not in data:
            raise ValidationError(f"config is missing data.{key}")
    directed = data.get("directed", False) if directed_flag is None else directed_flag
    return ingest_events(
        data["communications"],
        data["profiles"],
        data["adoption"],
        schema_file=data.get("schema"),
        actions_file=data.get("actions"),
        directed=directed,
        horizon=data.get("horizon"),
    )


def _eval_config(cfg: dict, args) -> EvalConfig:
    run = cfg.get("run", {})
    lem = cfg.get("lemnb", {})
    knn = cfg.get("knn", {})
    clamp = lem.get("rate_clamp", [1e-8, 1e8])
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    threads = args.threads if args.threads is not None else run.get("threads", 0)
    if threads in (0, None):
        import os

        threads = os.cpu_count() or 1
    scheme = getattr(args, "distance_scheme", None) or run.get(
        "distance_scheme", "mixed_mean"
    )
    return EvalConfig(
        distance_scheme=scheme,
        n_bootstrap=int(lem.get("M", 5)),
        n_trials=int(lem.get("N", 20)),
        rate_floor=float(clamp[0]),
        rate_ceiling=float(clamp[1]),
        sigma=float(lem.get("sigma", 1e-4)),
        min_samples=int(lem.get("min_samples", 100)),
        max_samples=int(lem.get("max_samples", 100_000)),
        knn_grid=tuple(knn.get("grid", (1, 3, 5, 11, 21, 51))),
        knn_folds=int(knn.get("folds", 10)),
        seed=int(seed),
        threads=int(threads),
    )


def cmd_synth(args) -> int:
    cfg = _load_config(args.config).get("synth", {})
    if args.seed is not None:
        cfg["seed"] = args.seed
    weights = cfg.pop("weights", None)
    if weights is not None:
        keys = (
            "weight_influence",
            "weight_equivalence",
            "weight_similarity",
            "weight_confounder",
            "weight_connectedness",
        )
        for key, value in zip(keys, weights):
            cfg[key] = float(value)
    config = synth.SynthConfig(**cfg)
    files = synth.generate(config, args.out)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_train_dump(args) -> int:
    cfg = _load_config(args.config)
    dataset = _dataset_from_config(cfg)
    lem = cfg.get("lemnb", {})
    with_conn = args.with_connectedness or bool(lem.get("with_connectedness", False))
    scheme = args.distance_scheme or cfg.get("run", {}).get("distance_scheme", "mixed_mean")
    train = construct_train(dataset, args.at, with_connectedness=with_conn, scheme=scheme)
    write_training_csv(train, args.dump_train)
    print(f"wrote {train.n} records to {args.dump_train}")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args.config)
    dataset = _dataset_from_config(cfg)
    config = _eval_config(cfg, args)
    methods = _parse_methods(args.methods)
    requested = None
    if args.entities:
        ids = [int(tok) for tok in args.entities.split(",") if tok]
        missing = [e for e in ids if e not in dataset.index_of]
        if missing:
            raise ValidationError(f"unknown entities {missing}")
        requested = np.array([dataset.index_of[e] for e in ids], dtype=np.int64)
    preds = predict_week(dataset, args.at, methods, config, entities=requested)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "predictions.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "week", "method", "probability"])
        for m in methods:
            for ent, p in zip(preds.entity_ids, preds.probabilities[m]):
                writer.writerow([int(ent), args.at + 1, m, repr(float(p))])
    print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    dataset = _dataset_from_config(cfg)
    config = _eval_config(cfg, args)
    run = cfg.get("run", {})
    methods = _parse_methods(args.methods or ",".join(run.get("methods", [])))
    if not methods:
        raise ValidationError("no methods selected")
    weeks_spec = args.weeks or run.get("weeks")
    if not weeks_spec:
        raise ValidationError("no evaluation weeks selected")
    weeks = _parse_weeks(weeks_spec)
    report = run_rolling_eval(dataset, methods, weeks, config)
    report.write_csvs(args.out)
    print(f"wrote report.csv, summary.csv, wilcoxon.csv to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netadopt", description="Adoption-probability prediction toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="TOML config with a [synth] section")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-dump", help="dump the training records for a week")
    p.add_argument("--config", required=True)
    p.add_argument("--at", type=int, required=True, help="reference week T")
    p.add_argument("--dump-train", required=True, help="output CSV path")
    p.add_argument("--with-connectedness", action="store_true")
    p.add_argument("--distance-scheme", choices=("mixed_mean", "euclidean"))
    p.set_defaults(func=cmd_train_dump)

    p = sub.add_parser("predict", help="predict next-week adoption probabilities")
    p.add_argument("--config", required=True)
    p.add_argument("--at", type=int, required=True, help="reference week T")
    p.add_argument("--methods", required=True, help="comma-separated method names")
    p.add_argument("--entities", help="comma-separated entity ids (default: all nonadopters)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--distance-scheme", choices=("mixed_mean", "euclidean"))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="rolling AUC evaluation")
    p.add_argument("--config", required=True)
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--weeks", help="range like 2..29 or comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--distance-scheme", choices=("mixed_mean", "euclidean"))
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
