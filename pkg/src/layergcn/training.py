"""BPR training with hand-written reverse-mode gradients and Adam."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ConfigError, DataError, NumericalError
from .evaluation import evaluate
from .graph import build_graph, normalize, spmm
from .ingest import InteractionLog, SplitBundle
from .model import ForwardTrace, ModelConfig, forward, init_embeddings
from .pruning import PruneConfig, sample_epoch_adjacency

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 2048
    lr: float = 1e-3
    reg: float = 1e-3          # L2 coefficient on the full ego embedding matrix
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0
    embedding_dim: int = 64
    valid_k: int = 20
    dtype: str = "float64"
    eval_threads: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)

    def validate(self):
        problems = []
        for name in ("batch_size", "max_epochs", "patience", "embedding_dim", "valid_k", "eval_threads"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.lr > 0:
            problems.append(f"lr must be > 0, got {self.lr}")
        if self.reg < 0:
            problems.append(f"lambda must be >= 0, got {self.reg}")
        if self.patience > self.max_epochs:
            problems.append(f"patience ({self.patience}) must not exceed max_epochs ({self.max_epochs})")
        if self.seed < 0:
            problems.append(f"seed must be >= 0, got {self.seed}")
        if self.dtype not in ("float64", "float32"):
            problems.append(f"dtype must be float64 or float32, got {self.dtype!r}")
        problems += self.model.validate() + self.prune.validate()
        if problems:
            raise ConfigError(problems)
        return self


@dataclass
class TripleBatch:
    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray

    def __len__(self):
        return len(self.users)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, x: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(x), np.zeros_like(x))


class NegativeSampler:
    """Uniform negatives over items a user has not interacted with in training."""

    def __init__(self, train: InteractionLog):
        self.n_items = train.n_items
        self.keys = np.sort(train.users * train.n_items + train.items)
        self.counts = np.bincount(train.users, minlength=train.n_users)

    def is_positive(self, users, items):
        keys = users * self.n_items + items
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == keys

    def sample(self, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        if len(users) and np.any(self.counts[users] >= self.n_items):
            bad = users[self.counts[users] >= self.n_items][0]
            raise DataError(f"user {bad} has interacted with every item; no negative exists")
        out = rng.integers(self.n_items, size=len(users))
        todo = np.flatnonzero(self.is_positive(users, out))
        while len(todo):
            out[todo] = rng.integers(self.n_items, size=len(todo))
            todo = todo[self.is_positive(users[todo], out[todo])]
        return out


def sample_negatives(train: InteractionLog, users, rng: np.random.Generator) -> np.ndarray:
    return NegativeSampler(train).sample(users, rng)


def bpr_loss(scores_pos, scores_neg) -> float:
    """Sum of -ln sigmoid(pos - neg), evaluated as softplus(neg - pos)."""
    diff = np.asarray(scores_pos, dtype=np.float64) - np.asarray(scores_neg, dtype=np.float64)
    return float(np.sum(np.logaddexp(0.0, -diff)))


def total_loss(bpr: float, x0: np.ndarray, reg: float) -> float:
    return float(bpr + reg * np.vdot(x0, x0))


def batch_scores(final: np.ndarray, batch: TripleBatch, n_users: int):
    xu = final[batch.users]
    pos = np.einsum("ij,ij->i", xu, final[n_users + batch.pos])
    neg = np.einsum("ij,ij->i", xu, final[n_users + batch.neg])
    return pos, neg


def batch_loss(trace: ForwardTrace, batch: TripleBatch, x0: np.ndarray, reg: float,
               n_users: int) -> float:
    pos, neg = batch_scores(trace.final, batch, n_users)
    return total_loss(bpr_loss(pos, neg), x0, reg)


def _readout_grad(final, batch, n_users):
    """d(BPR sum)/d(final embeddings)."""
    grad = np.zeros_like(final)
    if len(batch) == 0:
        return grad
    u = batch.users
    i = n_users + batch.pos
    j = n_users + batch.neg
    xu, xi, xj = final[u], final[i], final[j]
    diff = np.einsum("ij,ij->i", xu, xi - xj)
    # d softplus(-diff) / d diff = -sigmoid(-diff)
    coef = (-expit(-diff))[:, None]
    np.add.at(grad, u, coef * (xi - xj))
    np.add.at(grad, i, coef * xu)
    np.add.at(grad, j, -coef * xu)
    return grad


def _refine_backward(grad_out, h, a, x0, eps):
    """Backprop through x = (cos(h, x0) + eps) * h, row-wise.

    Returns (grad wrt h, grad wrt x0 via the cosine anchor). Where the norm
    product falls below eps the denominator is the constant eps.
    """
    g_h = (a + eps)[:, None] * grad_out
    g_a = np.einsum("ij,ij->i", grad_out, h)
    nh = np.linalg.norm(h, axis=1)
    n0 = np.linalg.norm(x0, axis=1)
    prod = nh * n0
    den = np.maximum(prod, eps)
    active = prod > eps
    inv_h2 = np.zeros_like(nh)
    inv_02 = np.zeros_like(n0)
    inv_h2[active] = 1.0 / (nh[active] ** 2)
    inv_02[active] = 1.0 / (n0[active] ** 2)
    da_dh = x0 / den[:, None] - (a * inv_h2)[:, None] * h
    da_dx0 = h / den[:, None] - (a * inv_02)[:, None] * x0
    g_h += g_a[:, None] * da_dh
    return g_h, g_a[:, None] * da_dx0


def backward(trace: ForwardTrace, batch: TripleBatch, adj: sp.csr_matrix,
             x0: np.ndarray, reg: float, n_users: int) -> np.ndarray:
    """Gradient of batch BPR loss + reg * |X^0|^2 with respect to X^0.

    ``adj`` must be the (symmetric) matrix the trace was computed with, so the
    transposed propagation reuses it directly.
    """
    grad_final = _readout_grad(trace.final, batch, n_users)
    grad = 2.0 * reg * x0
    n_layers = len(trace.layers)

    if trace.variant == "bpr_mf":
        grad = grad + grad_final
    elif trace.variant == "lightgcn":
        share = grad_final / (n_layers + 1)
        carry = np.zeros_like(x0)
        for _ in range(n_layers):
            carry = spmm(adj, share + carry)
        grad = grad + share + carry
    elif trace.variant == "layergcn":
        carry = np.zeros_like(x0)
        for k in range(n_layers - 1, -1, -1):
            g_layer = grad_final + carry
            g_h, g_anchor = _refine_backward(g_layer, trace.propagated[k], trace.sims[k],
                                             x0, trace.epsilon)
            grad = grad + g_anchor
            carry = spmm(adj, g_h)
        grad = grad + carry
    else:
        raise ValueError(f"unknown variant {trace.variant!r}")

    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    return grad


def loss_and_grad(adj, x0, batch, model_cfg: ModelConfig, reg: float, n_users: int):
    trace = forward(adj, x0, model_cfg)
    loss = batch_loss(trace, batch, x0, reg, n_users)
    return loss, backward(trace, batch, adj, x0, reg, n_users)


def adam_step(state: AdamState, x0: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update, in place. Returns ``(x0, state)``."""
    if grad.shape != x0.shape or state.m.shape != x0.shape:
        raise ValueError("shape mismatch between parameters, gradient and Adam state")
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    x0 -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return x0, state


@dataclass
class EpochRecord:
    epoch: int
    mean_batch_loss: float
    valid_score: float
    best_epoch: int
    elapsed_seconds: float


@dataclass
class TrainResult:
    x0: np.ndarray               # parameters from the best validation epoch
    best_epoch: int
    best_score: float
    history: list                # EpochRecord per epoch
    batch_losses: list           # per epoch, list of batch losses
    n_users: int
    n_items: int

    @property
    def stopped_epoch(self) -> int:
        return self.history[-1].epoch if self.history else 0


def make_streams(cfg: TrainConfig):
    """Independent RNG streams for init, sampling (shuffle + negatives) and pruning."""
    init_ss, sample_ss, prune_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    if cfg.prune.seed is not None:
        prune_ss = np.random.SeedSequence(cfg.prune.seed)
    return (np.random.default_rng(init_ss), np.random.default_rng(sample_ss),
            np.random.default_rng(prune_ss))


def fit(splits: SplitBundle, cfg: TrainConfig, x0: np.ndarray | None = None,
        on_epoch_end: Callable | None = None, score_fn: Callable | None = None) -> TrainResult:
    """Train with early stopping on validation Recall@``valid_k``.

    Epochs are numbered from 1. ``on_epoch_end(epoch, x0, record)`` runs after
    each epoch's validation. ``score_fn(x0)`` may replace the validation score.
    """
    cfg.validate()
    train = splits.train
    if len(train) == 0:
        raise DataError("train split is empty")
    dtype = np.dtype(cfg.dtype)
    n_users, n_items = train.n_users, train.n_items
    init_rng, sample_rng, prune_rng = make_streams(cfg)

    graph = build_graph(train)
    full_adj = normalize(graph, dtype=dtype)
    if x0 is None:
        x0 = init_embeddings(n_users, n_items, cfg.embedding_dim, init_rng, dtype=dtype)
    else:
        x0 = np.array(x0, dtype=dtype)
    if x0.shape != (n_users + n_items, cfg.embedding_dim):
        raise DataError(f"initial embeddings have shape {x0.shape}, "
                        f"expected {(n_users + n_items, cfg.embedding_dim)}")
    adam = AdamState.zeros_like(x0)
    sampler = NegativeSampler(train)
    has_valid = len(splits.valid) > 0

    if score_fn is None:
        def score_fn(params):
            if not has_valid:
                return float("nan")
            final = forward(full_adj, params, cfg.model).final
            result = evaluate(final, train, splits.valid, ks=(cfg.valid_k,), threads=cfg.eval_threads)
            return result.summary[f"recall@{cfg.valid_k}"]

    best_x0 = x0.copy()
    best_epoch, best_score = 0, -np.inf
    history, batch_losses = [], []
    start = time.perf_counter()

    for epoch in range(1, cfg.max_epochs + 1):
        adj = sample_epoch_adjacency(graph, cfg.prune, epoch - 1, prune_rng,
                                     dtype=dtype, full=full_adj)
        order = sample_rng.permutation(len(train))
        users = train.users[order]
        pos = train.items[order]
        neg = sampler.sample(users, sample_rng)

        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = TripleBatch(users[lo:lo + cfg.batch_size], pos[lo:lo + cfg.batch_size],
                                neg[lo:lo + cfg.batch_size])
            trace = forward(adj, x0, cfg.model)
            loss = batch_loss(trace, batch, x0, cfg.reg, n_users)
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged: non-finite loss at epoch {epoch}")
            grad = backward(trace, batch, adj, x0, cfg.reg, n_users)
            adam_step(adam, x0, grad.astype(dtype, copy=False), cfg.lr)
            losses.append(loss)

        score = score_fn(x0)
        if np.isfinite(score) and score > best_score:
            best_score, best_epoch = score, epoch
            best_x0 = x0.copy()
        record = EpochRecord(epoch, float(np.mean(losses)), float(score), best_epoch,
                             time.perf_counter() - start)
        history.append(record)
        batch_losses.append(losses)
        logger.info("epoch %d loss %.6f valid %.6f best %d", epoch, record.mean_batch_loss,
                    score, best_epoch)
        if on_epoch_end is not None:
            on_epoch_end(epoch, x0, record)
        if best_epoch and epoch - best_epoch >= cfg.patience:
            break

    if best_epoch == 0:  # no usable validation signal: keep the last parameters
        best_x0, best_epoch, best_score = x0.copy(), history[-1].epoch, float("nan")
    return TrainResult(best_x0, best_epoch, float(best_score), history, batch_losses,
                       n_users, n_items)
