"""Per-epoch edge pruning: degree-sensitive (DegreeDrop), uniform (DropEdge), or mixed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .graph import BipartiteGraph, normalize, symmetric_adjacency

STRATEGIES = ("none", "degree", "uniform", "mixed")


@dataclass(frozen=True)
class PruneConfig:
    strategy: str = "none"
    ratio: float = 0.0
    seed: int | None = None  # None: derive the pruning stream from the training seed

    def validate(self):
        problems = []
        if self.strategy not in STRATEGIES:
            problems.append(f"dropout strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.ratio < 1.0:
            problems.append(f"dropout ratio must be in [0, 1), got {self.ratio}")
        return problems


def n_dropped(n_edges: int, ratio: float) -> int:
    """m = round(ratio * M), halves rounded up."""
    return int(np.floor(ratio * n_edges + 0.5))


def edge_keep_weights(g: BipartiteGraph) -> np.ndarray:
    """1 / (sqrt(d_i) sqrt(d_j)) per edge, from full-graph degrees."""
    root = np.sqrt(g.degree.astype(np.float64))
    return 1.0 / (root[g.heads] * root[g.tails])


def weighted_sample_without_replacement(weights: np.ndarray, n_keep: int,
                                        rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of ``n_keep`` items drawn successively without replacement.

    Exponential race: item k gets key Exp(1) / w_k and the smallest keys win,
    which has the same law as repeated weight-proportional draws.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if n_keep >= len(weights):
        return np.arange(len(weights))
    keys = rng.standard_exponential(len(weights)) / weights
    chosen = np.argsort(keys, kind="stable")[:n_keep]
    return np.sort(chosen)


def degree_drop_sample(g: BipartiteGraph, ratio: float, rng: np.random.Generator) -> np.ndarray:
    m = n_dropped(g.n_edges, ratio)
    if m == 0:
        return np.arange(g.n_edges)
    return weighted_sample_without_replacement(edge_keep_weights(g), g.n_edges - m, rng)


def uniform_drop_sample(g: BipartiteGraph, ratio: float, rng: np.random.Generator) -> np.ndarray:
    m = n_dropped(g.n_edges, ratio)
    if m == 0:
        return np.arange(g.n_edges)
    return np.sort(rng.choice(g.n_edges, size=g.n_edges - m, replace=False))


def pruned_adjacency(g: BipartiteGraph, kept_edges: np.ndarray, dtype=np.float64) -> sp.csr_matrix:
    """Adjacency over the kept edges, renormalized with the pruned degrees."""
    kept_edges = np.asarray(kept_edges, dtype=np.int64)
    return symmetric_adjacency(g.n_nodes, g.heads[kept_edges], g.tails[kept_edges], dtype=dtype)


def sample_epoch_edges(g: BipartiteGraph, cfg: PruneConfig, epoch: int,
                       rng: np.random.Generator) -> np.ndarray | None:
    """Kept edge indices for a 0-based ``epoch``; ``None`` means the full graph.

    The mixed schedule uses degree-sensitive sampling on even epochs and
    uniform sampling on odd ones.
    """
    if cfg.strategy == "none" or n_dropped(g.n_edges, cfg.ratio) == 0:
        return None
    strategy = cfg.strategy
    if strategy == "mixed":
        strategy = "degree" if epoch % 2 == 0 else "uniform"
    if strategy == "degree":
        return degree_drop_sample(g, cfg.ratio, rng)
    if strategy == "uniform":
        return uniform_drop_sample(g, cfg.ratio, rng)
    raise ConfigError(f"unknown dropout strategy {cfg.strategy!r}")


def sample_epoch_adjacency(g: BipartiteGraph, cfg: PruneConfig, epoch: int,
                           rng: np.random.Generator, dtype=np.float64,
                           full: sp.csr_matrix | None = None) -> sp.csr_matrix:
    """Training adjacency for one epoch. ``full`` is reused when no pruning applies."""
    kept = sample_epoch_edges(g, cfg, epoch, rng)
    if kept is None:
        return full if full is not None else normalize(g, dtype=dtype)
    return pruned_adjacency(g, kept, dtype=dtype)
