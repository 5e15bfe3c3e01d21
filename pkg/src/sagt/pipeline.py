"""End-to-end pipeline with content-hash provenance and stage resume."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import data as dio
from .enrichment import enrich
from .graph import compatibility_matrix, dataset_metrics
from .model import (ModelConfig, build_structural_encoding, load_checkpoint,
                    save_checkpoint, target_embeddings)
from .sampler import sample_subgraphs, sampling_matrix
from .trainer import (GcnTrainConfig, SplitMasks, TrainConfig,
                      TransformerTrainConfig, evaluate, make_splits,
                      train_gcn_stage, train_transformer_stage)

PROVENANCE_VERSION = 1
DATASET_FILES = ("edges.txt", "features.txt", "labels.txt", "meta.json")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    seed: int = 0
    tau: float = 0.5
    c: float = 0.15
    k1: int = 15
    q: int = 5
    M: int = 4
    class_reps: str = "train"
    deg_norm: bool = False
    fractions: tuple = (0.6, 0.2, 0.2)
    hidden: int = 128
    layers: int = 3
    heads: int = 4
    dropout: float = 0.3
    gcn: GcnTrainConfig = field(default_factory=GcnTrainConfig)
    transformer: TransformerTrainConfig = field(default_factory=TransformerTrainConfig)
    patience: int = 50

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ConfigError(f"c must lie in (0, 1], got {self.c}")
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [-1, 1], got {self.tau}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.k1 < 0 or self.q < 1 or self.M < 1:
            raise ConfigError("need k1 >= 0, q >= 1, M >= 1")
        if self.class_reps not in ("train", "all"):
            raise ConfigError(f"class_reps must be 'train' or 'all', got {self.class_reps!r}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"fractions must sum to 1, got {self.fractions}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    @classmethod
    def from_dict(cls, raw: dict, dataset=None) -> "RunConfig":
        raw = dict(raw)
        if dataset is not None:
            raw["dataset"] = dataset
        if "dataset" not in raw:
            raise ConfigError("config must name a dataset directory")
        model = raw.pop("model", {})
        for key in ("hidden", "layers", "heads", "dropout"):
            if key in model:
                raw[key] = model[key]
        if "gcn" in raw:
            raw["gcn"] = GcnTrainConfig(**raw["gcn"])
        if "transformer" in raw:
            raw["transformer"] = TransformerTrainConfig(**raw["transformer"])
        if "fractions" in raw:
            raw["fractions"] = tuple(raw["fractions"])
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as e:
            raise ConfigError(str(e))

    @classmethod
    def from_json(cls, path, dataset=None) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), dataset=dataset)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["fractions"] = list(self.fractions)
        return out

    def model_config(self) -> ModelConfig:
        return ModelConfig(hidden=self.hidden, layers=self.layers, heads=self.heads,
                           dropout=self.dropout, M=self.M, k1=self.k1, q=self.q)

    def train_config(self) -> TrainConfig:
        return TrainConfig(gcn=self.gcn, transformer=self.transformer,
                           seed=self.seed, patience=self.patience)


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(files, config_subset: dict) -> str:
    h = hashlib.sha256()
    for path in files:
        h.update(_sha256_file(path).encode())
    h.update(json.dumps(config_subset, sort_keys=True).encode())
    return h.hexdigest()


def _dataset_paths(dataset_dir):
    return [os.path.join(dataset_dir, f) for f in DATASET_FILES]


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


class PipelineRun:
    """Stage runner over an output directory with provenance-based resume."""

    def __init__(self, config: RunConfig, out_dir, resume: bool = False,
                 log=print):
        self.config = config
        self.out = out_dir
        self.resume = resume
        self.log = log
        os.makedirs(out_dir, exist_ok=True)
        self.provenance_path = os.path.join(out_dir, "provenance.json")
        if resume and os.path.exists(self.provenance_path):
            with open(self.provenance_path, encoding="utf-8") as fh:
                self.provenance = json.load(fh)
            if self.provenance.get("config") != config.as_dict():
                self.provenance["stages"] = {}
        else:
            self.provenance = {"version": PROVENANCE_VERSION,
                               "config": config.as_dict(), "stages": {}}

    def path(self, name) -> str:
        return os.path.join(self.out, name)

    def _stage_fresh(self, stage: str, inputs_hash: str, outputs) -> bool:
        if not self.resume:
            return False
        rec = self.provenance["stages"].get(stage)
        if rec is None or rec.get("inputs") != inputs_hash:
            return False
        return all(os.path.exists(self.path(f)) for f in outputs)

    def _record(self, stage: str, inputs_hash: str, outputs) -> None:
        self.provenance["stages"][stage] = {"inputs": inputs_hash,
                                            "outputs": list(outputs)}
        self.provenance["config"] = self.config.as_dict()
        _write_json(self.provenance_path, self.provenance)

    def run_stage(self, stage: str, input_files, config_subset: dict,
                  outputs, fn) -> bool:
        """Returns True when the stage executed, False when skipped."""
        inputs_hash = _hash_inputs(input_files, config_subset)
        if self._stage_fresh(stage, inputs_hash, outputs):
            self.log(f"[{stage}] up to date, skipping")
            return False
        self.log(f"[{stage}] running")
        try:
            fn()
        except Exception as e:
            raise RuntimeError(f"stage {stage!r} failed: {e}") from e
        self._record(stage, inputs_hash, outputs)
        return True


def run_pipeline(config: RunConfig, out_dir, resume: bool = False,
                 emit_embeddings: bool = False, log=print) -> dict:
    """metrics -> enrichment -> sampling -> training -> evaluation."""
    run = PipelineRun(config, out_dir, resume=resume, log=log)
    ds_files = _dataset_paths(config.dataset)
    g = dio.load_dataset(config.dataset)

    run.run_stage(
        "metrics", ds_files, {}, ["metrics.json"],
        lambda: _write_json(run.path("metrics.json"), dataset_metrics(g).as_dict()),
    )

    def do_splits():
        masks = make_splits(g, config.fractions, seed=config.seed)
        _write_json(run.path("splits.json"), {
            "seed": config.seed,
            "fractions": list(config.fractions),
            "train": masks.train.tolist(),
            "val": masks.val.tolist(),
            "test": masks.test.tolist(),
        })

    run.run_stage(
        "splits", ds_files,
        {"seed": config.seed, "fractions": list(config.fractions)},
        ["splits.json"], do_splits,
    )
    masks = _load_splits(run.path("splits.json"))

    def do_preprocess():
        comp = compatibility_matrix(g, config.tau)
        gcn_result = train_gcn_stage(g, comp, masks, config.train_config())
        enriched = enrich(g, comp, gcn_result.params, masks.train,
                          class_reps_scope=config.class_reps,
                          deg_norm=config.deg_norm, P=gcn_result.P)
        dio.write_matrix_txt(run.path("xfinal.txt"), enriched.X_final)
        dio.write_matrix_txt(run.path("class_reps.txt"), enriched.class_reps)

    run.run_stage(
        "preprocess", ds_files + [run.path("splits.json")],
        {"tau": config.tau, "seed": config.seed, "gcn": asdict(config.gcn),
         "class_reps": config.class_reps, "deg_norm": config.deg_norm},
        ["xfinal.txt", "class_reps.txt"], do_preprocess,
    )

    def do_sample():
        S = sampling_matrix(g, config.c)
        seqs = sample_subgraphs(S, config.k1, config.q, config.seed)
        dio.write_subgraphs(run.path("subgraphs.txt"), seqs)

    run.run_stage(
        "sample", ds_files,
        {"c": config.c, "k1": config.k1, "q": config.q, "seed": config.seed},
        ["subgraphs.txt"], do_sample,
    )

    model_cfg = config.model_config()

    def do_train():
        X_final = dio.read_matrix_txt(run.path("xfinal.txt"), expect_rows=g.n)
        sequences = dio.read_subgraphs(run.path("subgraphs.txt"), g.n, config.q)
        enc = build_structural_encoding(g, config.M)
        result = train_transformer_stage(g, enc, sequences, X_final, masks,
                                         model_cfg, config.train_config())
        save_checkpoint(run.path("checkpoint.json"), model_cfg, result.params,
                        d_in=X_final.shape[1], u=g.u)
        with open(run.path("history.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_acc"])
            for row in result.history:
                writer.writerow([row["epoch"], repr(row["train_loss"]),
                                 repr(row["train_acc"]), repr(row["val_acc"])])
        test_acc = evaluate(result.params, enc, sequences, X_final, masks.test,
                            model_cfg, g.y)
        _write_json(run.path("result.json"), {
            "config": config.as_dict(),
            "seed": config.seed,
            "test_accuracy": test_acc,
            "val_accuracy": result.best_val_acc,
            "best_epoch": result.best_epoch,
            "epochs_run": result.epochs_run,
        })
        if emit_embeddings:
            emb = np.zeros((g.n, model_cfg.hidden))
            for v in range(g.n):
                seq_arr = np.asarray([s.nodes for s in sequences[v]], dtype=np.int64)
                emb[v] = target_embeddings(seq_arr, X_final, result.params, enc,
                                           model_cfg).mean(axis=0)
            dio.write_matrix_txt(run.path("embeddings.txt"), emb)

    train_outputs = ["checkpoint.json", "history.csv", "result.json"]
    if emit_embeddings:
        train_outputs.append("embeddings.txt")
    run.run_stage(
        "train",
        ds_files + [run.path("xfinal.txt"), run.path("subgraphs.txt"),
                    run.path("splits.json")],
        {"model": model_cfg.as_dict(), "transformer": asdict(config.transformer),
         "patience": config.patience, "seed": config.seed, "M": config.M,
         "emit_embeddings": emit_embeddings},
        train_outputs, do_train,
    )

    with open(run.path("result.json"), encoding="utf-8") as fh:
        return json.load(fh)


def _load_splits(path) -> SplitMasks:
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    return SplitMasks(train=np.asarray(blob["train"], dtype=np.int64),
                      val=np.asarray(blob["val"], dtype=np.int64),
                      test=np.asarray(blob["test"], dtype=np.int64))


def evaluate_run(run_dir) -> dict:
    """Recompute test accuracy for a finished run directory."""
    result_path = os.path.join(run_dir, "result.json")
    with open(result_path, encoding="utf-8") as fh:
        result = json.load(fh)
    config = RunConfig.from_dict(result["config"])
    g = dio.load_dataset(config.dataset)
    masks = _load_splits(os.path.join(run_dir, "splits.json"))
    X_final = dio.read_matrix_txt(os.path.join(run_dir, "xfinal.txt"),
                                  expect_rows=g.n)
    sequences = dio.read_subgraphs(os.path.join(run_dir, "subgraphs.txt"),
                                   g.n, config.q)
    model_cfg, params, _, _ = load_checkpoint(os.path.join(run_dir, "checkpoint.json"))
    enc = build_structural_encoding(g, model_cfg.M)
    test_acc = evaluate(params, enc, sequences, X_final, masks.test, model_cfg, g.y)
    return {"test_accuracy": test_acc, "stored_test_accuracy": result["test_accuracy"]}
