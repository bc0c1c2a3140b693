"""Command-line entry point.

Subcommands: gen-data, train, eval, sweep, ablate. Exit codes: 0 success,
1 validation/usage error, 2 runtime failure. SEER_THREADS caps how many
sweep or ablation runs execute concurrently.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import DataError, gzsl_split, load_dataset, load_split, make_synthetic, save_dataset, save_split
from .evaluation import MetricsReport, ablate_run, sweep_run
from .pipeline import ConfigError, PipelineError, RunConfig, evaluate_bundle, train_full


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seer-zsl",
                                     description="Generative zero-shot learning pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    gen.add_argument("--classes", type=int, default=20)
    gen.add_argument("--per-class", type=int, default=50)
    gen.add_argument("--sem-dim", type=int, default=16)
    gen.add_argument("--visual-dim", type=int, default=64)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--unseen-fraction", type=float, default=None,
                     help="also write split.json with this unseen class fraction")
    gen.add_argument("--out", required=True)

    train = sub.add_parser("train", help="run the full training pipeline")
    train.add_argument("--config", required=True, help="RunConfig JSON file")
    train.add_argument("--out", default=None, help="output directory (overrides config)")

    evl = sub.add_parser("eval", help="re-evaluate a trained run directory")
    evl.add_argument("--run", required=True, help="run directory holding model archives")
    evl.add_argument("--data", default=None, help="dataset directory (defaults to config)")
    evl.add_argument("--embeddings", action="store_true",
                     help="also export embeddings.csv for external projection")

    swp = sub.add_parser("sweep", help="grid of runs over hyperparameters")
    swp.add_argument("--config", required=True)
    swp.add_argument("--grid", required=True,
                     help='JSON object, e.g. {"beta_vae": [0.1, 1, 50]}')
    swp.add_argument("--seeds", type=int, nargs="+", default=[0])
    swp.add_argument("--out", required=True)

    abl = sub.add_parser("ablate", help="run with one stage replaced by noise")
    abl.add_argument("--config", required=True)
    abl.add_argument("--drop", required=True, choices=["vae", "wgan", "cvae", "none"])
    abl.add_argument("--seed", type=int, default=0)
    abl.add_argument("--out", default=None)
    return parser


def _cmd_gen_data(args) -> int:
    dataset = make_synthetic(args.classes, args.per_class, args.sem_dim,
                             args.visual_dim, args.noise, args.seed)
    out = Path(args.out)
    save_dataset(dataset, out)
    if args.unseen_fraction is not None:
        split = gzsl_split(dataset, args.unseen_fraction, args.seed)
        save_split(split, out / "split.json")
    print(f"wrote {dataset.n_samples} samples over {dataset.n_classes} classes to {out}")
    return 0


def _cmd_train(args) -> int:
    config = RunConfig.from_json(args.config)
    out = args.out if args.out is not None else config.out_dir
    if out is None:
        raise ConfigError("train needs an output directory (--out or config.out_dir)")
    _, report = train_full(config, out_dir=out)
    print(f"S={report.seen_accuracy:.2f} U={report.unseen_accuracy:.2f} "
          f"H={report.harmonic:.2f} -> {Path(out) / 'metrics.json'}")
    return 0


def _cmd_eval(args) -> int:
    from .bundle import ModelBundle

    run_dir = Path(args.run)
    config = RunConfig.from_json(run_dir / "config.json")
    bundle = ModelBundle.load(run_dir)
    if args.data is not None:
        dataset = load_dataset(args.data)
        split_path = Path(args.data) / "split.json"
        split = load_split(split_path if split_path.exists() else run_dir / "split.json")
    else:
        from .pipeline import _load_run_data

        if config.data_dir is not None and (run_dir / "split.json").exists():
            dataset = load_dataset(config.data_dir)
            split = load_split(run_dir / "split.json")
        else:
            dataset, split = _load_run_data(config)
    rng = np.random.default_rng(config.seed)
    metrics, _ = evaluate_bundle(bundle, dataset, split, config, rng)
    print(json.dumps({k: v for k, v in metrics.items() if k != "per_class"}, indent=1))
    if args.embeddings:
        from .pipeline import _export_embeddings

        _export_embeddings(bundle, dataset, split, run_dir / "embeddings.csv", rng)
        print(f"wrote {run_dir / 'embeddings.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    config = RunConfig.from_json(args.config)
    grid = json.loads(args.grid)
    if not isinstance(grid, dict):
        raise ConfigError("--grid must be a JSON object of field -> values")
    reports = sweep_run(config, grid, args.seeds, args.out)
    print(f"{len(reports)} runs -> {Path(args.out) / 'runs.csv'}")
    return 0


def _cmd_ablate(args) -> int:
    config = RunConfig.from_json(args.config)
    report = ablate_run(config, args.drop, args.seed, out_dir=args.out)
    print(f"drop={args.drop} S={report.seen_accuracy:.2f} U={report.unseen_accuracy:.2f} "
          f"H={report.harmonic:.2f} conv={report.conventional_unseen:.2f}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map to the validation exit code
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DataError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (PipelineError, RuntimeError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
