"""Forward passes for LayerGCN, LightGCN and BPR-MF, plus layer diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .graph import spmm

VARIANTS = ("layergcn", "lightgcn", "bpr_mf")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "layergcn"
    n_layers: int = 4
    epsilon: float = 1e-8

    def validate(self):
        problems = []
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_layers < 1:
            problems.append(f"layers must be >= 1, got {self.n_layers}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        return problems


@dataclass(frozen=True)
class ForwardTrace:
    """Everything the backward pass and the diagnostics need.

    ``layers`` holds X^1..X^L (after refinement for LayerGCN). ``propagated``
    holds the raw products adj @ X^{l-1} and ``sims`` the cosine vectors;
    both are empty for BPR-MF, and ``sims`` is empty for LightGCN.
    """

    variant: str
    epsilon: float
    x0: np.ndarray
    layers: list = field(default_factory=list)
    propagated: list = field(default_factory=list)
    sims: list = field(default_factory=list)
    final: np.ndarray | None = None


def init_embeddings(n_users: int, n_items: int, dim: int, rng: np.random.Generator,
                    dtype=np.float64) -> np.ndarray:
    """Xavier-uniform init, applied to the user and item tables separately."""
    user_bound = np.sqrt(6.0 / (n_users + dim))
    item_bound = np.sqrt(6.0 / (n_items + dim))
    users = rng.uniform(-user_bound, user_bound, size=(n_users, dim))
    items = rng.uniform(-item_bound, item_bound, size=(n_items, dim))
    return np.vstack([users, items]).astype(dtype)


def cosine_rows(a: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise a_i . b_i / max(|a_i| |b_i|, eps)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    dots = np.einsum("ij,ij->i", a, b)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return dots / np.maximum(norms, eps)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in {what}")


def _check_shapes(adj, x0):
    if adj.shape != (x0.shape[0], x0.shape[0]):
        raise ValueError(f"adjacency {adj.shape} does not match embeddings {x0.shape}")


def forward_layergcn(adj: sp.csr_matrix, x0: np.ndarray, cfg: ModelConfig) -> ForwardTrace:
    _check_shapes(adj, x0)
    eps = cfg.epsilon
    layers, propagated, sims = [], [], []
    x = x0
    final = np.zeros_like(x0)
    for layer in range(1, cfg.n_layers + 1):
        h = spmm(adj, x)
        a = cosine_rows(h, x0, eps)
        x = (a + eps)[:, None] * h
        _check_finite(x, f"layer {layer}")
        propagated.append(h)
        sims.append(a)
        layers.append(x)
        final = final + x
    return ForwardTrace("layergcn", eps, x0, layers, propagated, sims, final)


def forward_lightgcn(adj: sp.csr_matrix, x0: np.ndarray, cfg: ModelConfig) -> ForwardTrace:
    _check_shapes(adj, x0)
    layers = []
    x = x0
    total = x0.copy()
    for layer in range(1, cfg.n_layers + 1):
        x = spmm(adj, x)
        _check_finite(x, f"layer {layer}")
        layers.append(x)
        total = total + x
    final = total / (cfg.n_layers + 1)
    return ForwardTrace("lightgcn", cfg.epsilon, x0, layers, list(layers), [], final)


def forward_bpr_mf(adj, x0: np.ndarray, cfg: ModelConfig) -> ForwardTrace:
    return ForwardTrace("bpr_mf", cfg.epsilon, x0, [], [], [], x0)


_FORWARDS = {
    "layergcn": forward_layergcn,
    "lightgcn": forward_lightgcn,
    "bpr_mf": forward_bpr_mf,
}


def forward(adj, x0: np.ndarray, cfg: ModelConfig) -> ForwardTrace:
    return _FORWARDS[cfg.variant](adj, x0, cfg)


def score_all(x: np.ndarray, user: int, n_users: int) -> np.ndarray:
    """Dot-product scores of ``user`` against every item."""
    if not 0 <= user < n_users:
        raise IndexError(f"user {user} out of range [0, {n_users})")
    return x[n_users:] @ x[user]


def layer_divergence(trace: ForwardTrace, x0: np.ndarray | None = None) -> np.ndarray:
    """L x N matrix of per-node distances |x^l_v - x^0_v|."""
    x0 = trace.x0 if x0 is None else x0
    return np.stack([np.linalg.norm(layer - x0, axis=1) for layer in trace.layers])


def mean_layer_similarity(trace: ForwardTrace) -> np.ndarray:
    """Mean raw cosine to the ego layer, per layer (LayerGCN only)."""
    if trace.variant != "layergcn":
        raise ValueError("layer similarities exist only for layergcn traces")
    return np.array([float(np.mean(a)) for a in trace.sims])
