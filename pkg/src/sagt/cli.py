"""Command-line surface: metrics, preprocess, sample, train, eval.

Exit codes: 0 success, 1 validation error (bad usage, bad config, bad
dataset), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import data as dio
from .data import DatasetError
from .enrichment import enrich
from .graph import compatibility_matrix, dataset_metrics
from .pipeline import (ConfigError, RunConfig, _write_json, evaluate_run,
                       run_pipeline)
from .sampler import sample_subgraphs, sampling_matrix
from .trainer import make_splits, train_gcn_stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sagt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="print the five dataset metrics as JSON")
    p.add_argument("dataset")

    p = sub.add_parser("preprocess", help="enrich features and persist xfinal.txt")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--class-reps", choices=("train", "all"), dest="class_reps")
    p.add_argument("--deg-norm", action="store_true", default=None, dest="deg_norm")
    p.add_argument("--gcn-epochs", type=int, dest="gcn_epochs")

    p = sub.add_parser("sample", help="write PPR subgraph sequences")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--c", type=float)
    p.add_argument("--k1", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="run the full pipeline into a run directory")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds; loops the pipeline")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--emit-embeddings", action="store_true")

    p = sub.add_parser("eval", help="recompute test accuracy from a run directory")
    p.add_argument("run_dir")

    return parser


def _load_config(args, overrides) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    raw["dataset"] = args.dataset
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return RunConfig.from_dict(raw)


def cmd_metrics(args) -> int:
    g = dio.load_dataset(args.dataset)
    print(json.dumps(dataset_metrics(g).as_dict(), sort_keys=True))
    return 0


def cmd_preprocess(args) -> int:
    config = _load_config(args, {
        "seed": args.seed, "tau": args.tau, "class_reps": args.class_reps,
        "deg_norm": args.deg_norm,
    })
    if args.gcn_epochs is not None:
        gcn = asdict(config.gcn)
        gcn["epochs"] = args.gcn_epochs
        config = RunConfig.from_dict({**config.as_dict(), "gcn": gcn})
    g = dio.load_dataset(config.dataset)
    masks = make_splits(g, config.fractions, seed=config.seed)
    comp = compatibility_matrix(g, config.tau)
    gcn_result = train_gcn_stage(g, comp, masks, config.train_config())
    enriched = enrich(g, comp, gcn_result.params, masks.train,
                      class_reps_scope=config.class_reps,
                      deg_norm=config.deg_norm, P=gcn_result.P)
    os.makedirs(args.out, exist_ok=True)
    dio.write_matrix_txt(os.path.join(args.out, "xfinal.txt"), enriched.X_final)
    dio.write_matrix_txt(os.path.join(args.out, "class_reps.txt"),
                         enriched.class_reps)
    _write_json(os.path.join(args.out, "provenance.json"), {
        "tau": config.tau, "layers": gcn_result.params.layers,
        "seed": config.seed, "class_reps": config.class_reps,
        "deg_norm": config.deg_norm, "gcn": asdict(config.gcn),
    })
    print(f"wrote {os.path.join(args.out, 'xfinal.txt')}")
    return 0


def cmd_sample(args) -> int:
    config = _load_config(args, {
        "c": args.c, "k1": args.k1, "q": args.q, "seed": args.seed,
    })
    g = dio.load_dataset(config.dataset)
    S = sampling_matrix(g, config.c)
    seqs = sample_subgraphs(S, config.k1, config.q, config.seed)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "subgraphs.txt")
    dio.write_subgraphs(out_path, seqs)
    print(f"wrote {out_path}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args, {"seed": args.seed})
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        if not seeds:
            raise ConfigError("--seeds needs at least one integer")
        accs = []
        for s in seeds:
            cfg = RunConfig.from_dict({**config.as_dict(), "seed": s})
            result = run_pipeline(cfg, os.path.join(args.out, f"seed-{s}"),
                                  resume=args.resume,
                                  emit_embeddings=args.emit_embeddings)
            accs.append(result["test_accuracy"])
            print(f"seed {s}: test_accuracy {result['test_accuracy']:.4f}")
        _write_json(os.path.join(args.out, "summary.json"), {
            "seeds": seeds, "test_accuracies": accs,
            "mean": float(np.mean(accs)), "std": float(np.std(accs)),
        })
        return 0
    result = run_pipeline(config, args.out, resume=args.resume,
                          emit_embeddings=args.emit_embeddings)
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    out = evaluate_run(args.run_dir)
    print(json.dumps(out, sort_keys=True))
    return 0


_COMMANDS = {
    "metrics": cmd_metrics,
    "preprocess": cmd_preprocess,
    "sample": cmd_sample,
    "train": cmd_train,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, DatasetError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
