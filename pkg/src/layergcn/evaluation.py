"""All-ranking top-K evaluation with Recall@K and NDCG@K."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .ingest import InteractionLog

DEFAULT_KS = (10, 20, 50)


@dataclass
class RankingResult:
    users: np.ndarray                  # evaluated user indices
    ranked: list                       # per user: top-max(K) item indices, best first
    per_user: dict = field(default_factory=dict)   # "recall@10" -> array over users
    summary: dict = field(default_factory=dict)    # "recall@10" -> macro average

    @property
    def n_users(self) -> int:
        return len(self.users)


def top_k(scores: np.ndarray, mask, k: int) -> np.ndarray:
    """Indices of the ``k`` best unmasked scores; ties go to the lower index.

    ``mask`` is a collection of item indices to exclude. When fewer than ``k``
    candidates remain, all of them are returned.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    excluded = np.zeros(len(scores), dtype=bool)
    excluded[np.asarray(list(mask), dtype=np.int64)] = True
    candidates = np.flatnonzero(~excluded)
    order = np.argsort(-scores[candidates], kind="stable")
    return candidates[order[:k]]


def recall_at_k(ranked, relevant, k: int) -> float:
    relevant = set(relevant)
    hits = sum(1 for item in list(ranked)[:k] if item in relevant)
    return hits / len(relevant)


def _ideal_dcg(n_hits: int) -> float:
    return sum(1.0 / math.log2(rank + 1) for rank in range(1, n_hits + 1))


def ndcg_at_k(ranked, relevant, k: int) -> float:
    """Binary-gain NDCG with base-2 discounts."""
    relevant = set(relevant)
    dcg = sum(1.0 / math.log2(pos + 2)
              for pos, item in enumerate(list(ranked)[:k]) if item in relevant)
    return dcg / _ideal_dcg(min(len(relevant), k))


def interaction_matrix(log: InteractionLog) -> sp.csr_matrix:
    data = np.ones(len(log), dtype=bool)
    mat = sp.csr_matrix((data, (log.users, log.items)), shape=(log.n_users, log.n_items))
    mat.sort_indices()
    return mat


def _rank_chunk(user_vecs, item_vecs, train_csr, users, max_k):
    scores = user_vecs @ item_vecs.T
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError("non-finite scores during evaluation")
    n_items = scores.shape[1]
    out = []
    for row, u in enumerate(users):
        seen = train_csr.indices[train_csr.indptr[u]:train_csr.indptr[u + 1]]
        s = -scores[row]
        s[seen] = np.inf
        n_cand = n_items - len(seen)
        k = min(max_k, n_cand)
        if k <= 0:
            out.append(np.empty(0, dtype=np.int64))
            continue
        # stable sort keeps ascending item index among equal scores
        if k < n_items // 4:
            part = np.argpartition(s, k - 1)[:k]
            kth = s[part].max()
            pool = np.flatnonzero(s <= kth)
            order = pool[np.argsort(s[pool], kind="stable")]
        else:
            order = np.argsort(s, kind="stable")
        out.append(order[:k].astype(np.int64))
    return out


def evaluate(final: np.ndarray, train: InteractionLog, target: InteractionLog,
             ks=DEFAULT_KS, threads: int = 1, chunk_size: int = 512) -> RankingResult:
    """Rank every non-training item for each user that has target interactions."""
    ks = tuple(sorted(set(int(k) for k in ks)))
    n_users = train.n_users
    user_vecs, item_vecs = final[:n_users], final[n_users:]
    train_csr = interaction_matrix(train)
    target_csr = interaction_matrix(target)
    users = np.flatnonzero(np.diff(target_csr.indptr) > 0)
    max_k = ks[-1]

    chunks = [users[i:i + chunk_size] for i in range(0, len(users), chunk_size)]
    work = lambda c: _rank_chunk(user_vecs[c], item_vecs, train_csr, c, max_k)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    ranked = [r for part in parts for r in part]

    per_user = {f"{m}@{k}": np.zeros(len(users)) for m in ("recall", "ndcg") for k in ks}
    idcg = np.cumsum(1.0 / np.log2(np.arange(2, max_k + 2)))
    for row, u in enumerate(users):
        rel = target_csr.indices[target_csr.indptr[u]:target_csr.indptr[u + 1]]
        hits = np.isin(ranked[row], rel)
        gains = hits / np.log2(np.arange(2, len(hits) + 2))
        for k in ks:
            n_hit = hits[:k].sum()
            per_user[f"recall@{k}"][row] = n_hit / len(rel)
            per_user[f"ndcg@{k}"][row] = gains[:k].sum() / idcg[min(len(rel), k) - 1]
    summary = {name: float(vals.mean()) if len(vals) else float("nan")
               for name, vals in per_user.items()}
    return RankingResult(users, ranked, per_user, summary)
