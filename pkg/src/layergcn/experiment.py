"""Run directories, logged training, checkpoint evaluation and dropout comparisons."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, to_text, to_values
from .errors import ConfigError, DataError
from .evaluation import RankingResult, evaluate
from .graph import build_graph, normalize
from .ingest import SPLIT_NAMES, SplitBundle
from .model import (ModelConfig, forward, init_embeddings, layer_divergence,
                    mean_layer_similarity)
from .pruning import PruneConfig
from .training import TrainConfig, TrainResult, fit, make_streams

logger = logging.getLogger(__name__)

RUN_LAYOUT = {
    "manifest": "manifest.json",
    "config": "config.txt",
    "log": "train_log.csv",
    "timing": "timing.csv",
    "checkpoint": "checkpoint.bin",
    "similarity": "layer_similarity.csv",
    "divergence": "layer_divergence.csv",
}


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def dataset_checksums(data_dir) -> dict:
    names = [f"{name}.tsv" for name in SPLIT_NAMES] + ["id_map.tsv"]
    return {name: file_sha256(os.path.join(data_dir, name)) for name in names
            if os.path.exists(os.path.join(data_dir, name))}


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(to_text(cfg).encode("utf-8")).hexdigest()


def write_manifest(out_dir, cfg: RunConfig, command: str, layout: dict) -> None:
    manifest = {
        "command": command,
        "version": f"v{__version__}",
        "seed": cfg.seed,
        "config": to_values(cfg),
        "config_sha256": config_digest(cfg),
        "dataset_sha256": dataset_checksums(cfg.data) if cfg.data else {},
        "layout": layout,
    }
    with open(os.path.join(out_dir, RUN_LAYOUT["manifest"]), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


def _writer(path, header):
    fh = open(path, "w", encoding="utf-8", newline="")
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(header)
    return fh, out


def diagnostic_rows(epoch: int, trace) -> tuple[list, list]:
    """(similarity rows, divergence rows) as ``[epoch, layer, value]`` with 1-based layers."""
    sims = mean_layer_similarity(trace)
    div = layer_divergence(trace).mean(axis=1)
    return ([[epoch, l + 1, repr(float(v))] for l, v in enumerate(sims)],
            [[epoch, l + 1, repr(float(v))] for l, v in enumerate(div)])


def train_run(cfg: RunConfig, splits: SplitBundle, out_dir, diagnose: bool = False) -> TrainResult:
    """Train one model and write every artifact under ``out_dir``.

    The manifest and config snapshot are written before the first epoch. Wall
    clock times go to a separate file so the training log stays byte-stable.
    """
    tcfg = cfg.train
    if diagnose and tcfg.model.variant != "layergcn":
        raise ConfigError([f"diagnostics need variant layergcn, got {tcfg.model.variant}"])
    os.makedirs(out_dir, exist_ok=True)
    layout = {k: v for k, v in RUN_LAYOUT.items()
              if diagnose or k not in ("similarity", "divergence")}
    with open(os.path.join(out_dir, RUN_LAYOUT["config"]), "w", encoding="utf-8") as fh:
        fh.write(to_text(cfg))
    write_manifest(out_dir, cfg, "train", layout)

    dtype = np.dtype(tcfg.dtype)
    x0 = init_embeddings(splits.n_users, splits.n_items, tcfg.embedding_dim,
                         make_streams(tcfg)[0], dtype=dtype)
    full = normalize(build_graph(splits.train), dtype=dtype)
    path = lambda key: os.path.join(out_dir, RUN_LAYOUT[key])
    handles = []
    log_fh, log = _writer(path("log"), ["epoch", "mean_batch_loss", f"valid_recall@{tcfg.valid_k}",
                                        "best_epoch"])
    time_fh, timing = _writer(path("timing"), ["epoch", "elapsed_seconds"])
    handles += [log_fh, time_fh]
    if diagnose:
        sim_fh, sim_out = _writer(path("similarity"), ["epoch", "layer", "mean_similarity"])
        div_fh, div_out = _writer(path("divergence"), ["epoch", "layer", "mean_divergence"])
        handles += [sim_fh, div_fh]

        def record(epoch, params):
            sims, divs = diagnostic_rows(epoch, forward(full, params, tcfg.model))
            sim_out.writerows(sims)
            div_out.writerows(divs)
        record(0, x0)

    def on_epoch_end(epoch, params, rec):
        log.writerow([epoch, repr(rec.mean_batch_loss), repr(rec.valid_score), rec.best_epoch])
        timing.writerow([epoch, f"{rec.elapsed_seconds:.3f}"])
        if diagnose:
            record(epoch, params)
        for fh in handles:
            fh.flush()

    try:
        result = fit(splits, tcfg, x0=x0, on_epoch_end=on_epoch_end)
    finally:
        for fh in handles:
            fh.close()
    header = {
        "n_users": splits.n_users, "n_items": splits.n_items, "seed": tcfg.seed,
        "variant": tcfg.model.variant, "layers": tcfg.model.n_layers,
        "epsilon": tcfg.model.epsilon, "best_epoch": result.best_epoch,
        "config_sha256": config_digest(cfg),
    }
    save_checkpoint(path("checkpoint"), result.x0, header)
    return result


def model_from_header(header: dict) -> ModelConfig:
    cfg = ModelConfig(header.get("variant", "layergcn"), header.get("layers", 4),
                      header.get("epsilon", 1e-8))
    problems = cfg.validate()
    if problems:
        raise DataError("checkpoint header: " + "; ".join(problems))
    return cfg


def check_consistency(header: dict, splits: SplitBundle, dim: int | None = None) -> None:
    """Raise :class:`DataError` naming the first mismatched dimension."""
    expected = {"n_users": splits.n_users, "n_items": splits.n_items}
    if dim is not None:
        expected["dim"] = dim
    for name, have in expected.items():
        if header[name] != have:
            raise DataError(f"{name} mismatch: checkpoint has {header[name]}, expected {have}")


def checkpoint_embeddings(ckpt_path, splits: SplitBundle, dim: int | None = None):
    """Final (propagated) embeddings and the trace for a checkpoint on ``splits``."""
    x0, header = load_checkpoint(ckpt_path)
    check_consistency(header, splits, dim)
    model = model_from_header(header)
    adj = normalize(build_graph(splits.train), dtype=x0.dtype)
    return forward(adj, x0, model), header


def evaluate_checkpoint(ckpt_path, splits: SplitBundle, ks=(10, 20, 50), split: str = "test",
                        threads: int = 1, dim: int | None = None) -> RankingResult:
    trace, _ = checkpoint_embeddings(ckpt_path, splits, dim)
    target = getattr(splits, split)
    if len(target) == 0:
        raise DataError(f"{split} split is empty; nothing to evaluate")
    return evaluate(trace.final, splits.train, target, ks=ks, threads=threads)


def write_metrics(result: RankingResult, path, per_user_path=None) -> None:
    ks = sorted({int(name.split("@")[1]) for name in result.summary})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["K", "recall", "ndcg", "n_evaluated_users"])
        for k in ks:
            out.writerow([k, repr(result.summary[f"recall@{k}"]), repr(result.summary[f"ndcg@{k}"]),
                          result.n_users])
    if per_user_path:
        names = sorted(result.per_user, key=lambda n: (int(n.split("@")[1]), n))
        with open(per_user_path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["user"] + names)
            for row, u in enumerate(result.users):
                out.writerow([int(u)] + [repr(float(result.per_user[n][row])) for n in names])


def diagnose_checkpoint(ckpt_path, splits: SplitBundle, out_dir) -> tuple[list, list]:
    """Final-state layer similarity and divergence CSVs for a LayerGCN checkpoint."""
    trace, header = checkpoint_embeddings(ckpt_path, splits)
    if trace.variant != "layergcn":
        raise ConfigError([f"diagnostics need variant layergcn, checkpoint has {trace.variant}"])
    os.makedirs(out_dir, exist_ok=True)
    sims, divs = diagnostic_rows(header.get("best_epoch", 0), trace)
    for key, rows, name in (("similarity", sims, "mean_similarity"),
                            ("divergence", divs, "mean_divergence")):
        fh, out = _writer(os.path.join(out_dir, RUN_LAYOUT[key]), ["epoch", "layer", name])
        with fh:
            out.writerows(rows)
    return sims, divs


# --- dropout comparisons -------------------------------------------------

@dataclass
class ProbeRun:
    """A training run with test metrics probed at fixed epochs and at the best epoch."""

    label: dict
    result: TrainResult
    probes: dict = field(default_factory=dict)   # "20" / "50" / "best" -> (epoch, recall, ndcg)

    @property
    def best_epoch(self) -> int:
        return self.result.best_epoch


def probed_fit(splits: SplitBundle, cfg: TrainConfig, probe_epochs=(20, 50), k: int = 20,
               label: dict | None = None, threads: int = 1) -> ProbeRun:
    full = normalize(build_graph(splits.train), dtype=np.dtype(cfg.dtype))

    def test_metrics(params):
        if len(splits.test) == 0:
            return float("nan"), float("nan")
        res = evaluate(forward(full, params, cfg.model).final, splits.train, splits.test,
                       ks=(k,), threads=threads)
        return res.summary[f"recall@{k}"], res.summary[f"ndcg@{k}"]

    probes = {}

    def hook(epoch, params, rec):
        if epoch in probe_epochs:
            probes[str(epoch)] = (epoch, *test_metrics(params))

    result = fit(splits, cfg, on_epoch_end=hook)
    probes["best"] = (result.best_epoch, *test_metrics(result.x0))
    return ProbeRun(dict(label or {}), result, probes)


def with_prune(cfg: TrainConfig, strategy: str, ratio: float, seed: int) -> TrainConfig:
    return dataclasses.replace(cfg, seed=seed, prune=PruneConfig(strategy, ratio, cfg.prune.seed))


def compare_dropout(splits: SplitBundle, base: TrainConfig, ratios, strategies, seeds, out_dir,
                    k: int = 20, threads: int = 1) -> list:
    """Train every (strategy, ratio, seed) and write report, curve and summary CSVs."""
    os.makedirs(out_dir, exist_ok=True)
    runs = []
    for strategy in strategies:
        for ratio in ratios:
            for seed in seeds:
                cfg = with_prune(base, strategy, ratio, seed)
                logger.info("compare: strategy=%s ratio=%s seed=%s", strategy, ratio, seed)
                runs.append(probed_fit(splits, cfg, k=k, threads=threads,
                                       label={"strategy": strategy, "ratio": ratio, "seed": seed}))
    write_comparison(runs, out_dir, k)
    return runs


def write_comparison(runs, out_dir, k: int = 20) -> None:
    keys = ["strategy", "ratio", "seed"]
    fh, out = _writer(os.path.join(out_dir, "compare_report.csv"),
                      keys + ["best_epoch", "epoch_label", "epoch", f"recall@{k}", f"ndcg@{k}"])
    with fh:
        for run in runs:
            for name in ("20", "50", "best"):
                if name in run.probes:
                    epoch, recall, ndcg = run.probes[name]
                    out.writerow([run.label[c] for c in keys]
                                 + [run.best_epoch, name, epoch, repr(recall), repr(ndcg)])
    fh, out = _writer(os.path.join(out_dir, "compare_curves.csv"),
                      keys + ["epoch", "mean_batch_loss", "valid_score"])
    with fh:
        for run in runs:
            for rec in run.result.history:
                out.writerow([run.label[c] for c in keys]
                             + [rec.epoch, repr(rec.mean_batch_loss), repr(rec.valid_score)])
    groups = {}
    for run in runs:
        groups.setdefault((run.label["strategy"], run.label["ratio"]), []).append(run)
    fh, out = _writer(os.path.join(out_dir, "compare_summary.csv"),
                      ["strategy", "ratio", "n_seeds", "mean_best_epoch", "mean_best_valid",
                       f"mean_test_recall@{k}", f"mean_test_ndcg@{k}"])
    with fh:
        for (strategy, ratio), group in groups.items():
            out.writerow([strategy, ratio, len(group),
                          repr(float(np.mean([r.best_epoch for r in group]))),
                          repr(float(np.mean([r.result.best_score for r in group]))),
                          repr(float(np.mean([r.probes["best"][1] for r in group]))),
                          repr(float(np.mean([r.probes["best"][2] for r in group])))])
