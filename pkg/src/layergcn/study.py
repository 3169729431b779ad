"""Multi-seed directional comparisons on a prepared dataset.

Three claims are checked, each on seed-averaged test metrics:

* ``layergcn_vs_lightgcn``: LayerGCN with DegreeDrop at the base ratio scores
  at least as well on Recall@20 as LightGCN with its layer count picked on
  validation.
* ``dropout_helps``: the same LayerGCN is within 1% (relative) of, or better
  than, LayerGCN trained on the full graph every epoch.
* ``degree_converges_faster``: at high dropout ratios DegreeDrop reaches its
  best validation epoch no later, on average, than uniform DropEdge.

Outcomes are reported, never asserted: these are stochastic directional checks.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .experiment import ProbeRun, probed_fit, with_prune
from .ingest import SplitBundle
from .model import ModelConfig
from .pruning import PruneConfig
from .training import TrainConfig

logger = logging.getLogger(__name__)

RELATIVE_SLACK = 0.01


@dataclass
class ClaimResult:
    name: str
    passed: bool
    lhs: float
    rhs: float
    detail: str = ""


@dataclass
class StudyReport:
    runs: list = field(default_factory=list)
    claims: list = field(default_factory=list)
    seconds: float = 0.0

    def claim(self, name: str) -> ClaimResult:
        return next(c for c in self.claims if c.name == name)


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


def _test_recall(run: ProbeRun) -> float:
    return run.probes["best"][1]


def study_config(base: TrainConfig | None = None, max_epochs: int = 150) -> TrainConfig:
    """Desk-scale settings: 32-bit training and an epoch cap, other fields untouched."""
    base = base or TrainConfig()
    return dataclasses.replace(base, max_epochs=min(base.max_epochs, max_epochs), dtype="float32",
                               patience=min(base.patience, max_epochs))


def directional_study(splits: SplitBundle, seeds=(0, 1, 2), base: TrainConfig | None = None,
                      dropout_ratio: float = 0.1, light_layers=(1, 2, 3, 4),
                      convergence_ratios=(0.5, 0.7), out_dir=None) -> StudyReport:
    base = study_config(base)
    report = StudyReport()
    start = time.perf_counter()

    def run(kind, cfg, **label):
        logger.info("study: %s %s", kind, label)
        probe = probed_fit(splits, cfg, label=dict(kind=kind, **label))
        report.runs.append(probe)
        logger.info("study: %s best_epoch=%d test_recall@20=%.4f", kind, probe.best_epoch,
                    _test_recall(probe))
        return probe

    layer = dataclasses.replace(base, model=ModelConfig("layergcn", 4, base.model.epsilon))
    full, plain = {}, {}
    for seed in seeds:
        full[seed] = run("layergcn_degree", with_prune(layer, "degree", dropout_ratio, seed),
                         seed=seed, ratio=dropout_ratio)
        plain[seed] = run("layergcn_nodrop", dataclasses.replace(layer, seed=seed, prune=PruneConfig()),
                          seed=seed, ratio=0.0)
    light = {}
    for n_layers in light_layers:
        cfg = dataclasses.replace(base, model=ModelConfig("lightgcn", n_layers), prune=PruneConfig())
        for seed in seeds:
            light[n_layers, seed] = run(f"lightgcn_L{n_layers}", dataclasses.replace(cfg, seed=seed),
                                        seed=seed, ratio=0.0)
    converge = {}
    for ratio in convergence_ratios:
        for strategy in ("degree", "uniform"):
            for seed in seeds:
                converge[strategy, ratio, seed] = run(f"layergcn_{strategy}",
                                                      with_prune(layer, strategy, ratio, seed),
                                                      seed=seed, ratio=ratio)

    # claim a: LightGCN layer count chosen on mean validation recall
    best_l = max(light_layers, key=lambda n: _mean([light[n, s].result.best_score for s in seeds]))
    ours = _mean([_test_recall(full[s]) for s in seeds])
    theirs = _mean([_test_recall(light[best_l, s]) for s in seeds])
    per_seed = ", ".join(f"seed {s}: {_test_recall(full[s]):.4f} vs {_test_recall(light[best_l, s]):.4f}"
                         for s in seeds)
    report.claims.append(ClaimResult("layergcn_vs_lightgcn", ours >= theirs, ours, theirs,
                                     f"LightGCN L={best_l}; {per_seed}"))

    # claim b: dropout does not cost more than the relative slack
    ours_plain = _mean([_test_recall(plain[s]) for s in seeds])
    per_seed = ", ".join(f"seed {s}: {_test_recall(full[s]):.4f} vs {_test_recall(plain[s]):.4f}"
                         for s in seeds)
    report.claims.append(ClaimResult("dropout_helps", ours >= ours_plain * (1 - RELATIVE_SLACK),
                                     ours, ours_plain, per_seed))

    # claim c: mean best epoch across high ratios and seeds
    deg = _mean([converge["degree", r, s].best_epoch for r in convergence_ratios for s in seeds])
    uni = _mean([converge["uniform", r, s].best_epoch for r in convergence_ratios for s in seeds])
    per_ratio = "; ".join(
        f"ratio {r}: degree {[converge['degree', r, s].best_epoch for s in seeds]} "
        f"uniform {[converge['uniform', r, s].best_epoch for s in seeds]}"
        for r in convergence_ratios)
    report.claims.append(ClaimResult("degree_converges_faster", deg <= uni, deg, uni, per_ratio))

    report.seconds = time.perf_counter() - start
    if out_dir:
        write_study(report, out_dir)
    return report


def write_study(report: StudyReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "study_runs.csv"), "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["kind", "ratio", "seed", "best_epoch", "stopped_epoch", "best_valid",
                      "test_recall@20", "test_ndcg@20"])
        for run in report.runs:
            _, recall, ndcg = run.probes["best"]
            out.writerow([run.label["kind"], run.label["ratio"], run.label["seed"], run.best_epoch,
                          run.result.stopped_epoch, repr(run.result.best_score), repr(recall),
                          repr(ndcg)])
    with open(os.path.join(out_dir, "study_claims.csv"), "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["claim", "verdict", "lhs", "rhs", "detail"])
        for c in report.claims:
            out.writerow([c.name, "PASS" if c.passed else "FAIL", repr(c.lhs), repr(c.rhs), c.detail])
