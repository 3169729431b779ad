"""Synthetic interaction logs with planted community structure."""

from __future__ import annotations

import numpy as np

from .ingest import InteractionLog


def two_community_log(n_users: int = 200, n_items: int = 100, per_user: int = 20,
                      noise: float = 0.05, skew: float = 1.0, seed: int = 0) -> InteractionLog:
    """Two user communities, each preferring one half of the items.

    Even users belong to community 0 (items ``[0, n_items/2)``), odd users to
    community 1. Within its half, a community picks items with Zipf-like
    popularity ``rank ** -skew``; each of a user's ``per_user`` interactions
    comes from the other half with probability ``noise``. Timestamps are a
    random permutation, so a chronological split is a random one.
    """
    rng = np.random.default_rng(seed)
    half = n_items // 2
    pop = 1.0 / np.arange(1, half + 1) ** skew
    pop /= pop.sum()
    users, items = [], []
    for u in range(n_users):
        own = np.arange(half) + (u % 2) * half
        other = np.arange(half) + (1 - u % 2) * half
        n_cross = min(rng.binomial(per_user, noise), half)
        liked = rng.choice(own, size=per_user - n_cross, replace=False, p=pop)
        cross = rng.choice(other, size=n_cross, replace=False)
        picked = np.concatenate([liked, cross])
        users.extend([u] * len(picked))
        items.extend(picked.tolist())
    stamps = rng.permutation(len(users))
    return InteractionLog(np.array(users), np.array(items), stamps, n_users, n_items)


def random_baseline_recall(k: int, n_items: int) -> float:
    """Expected Recall@K of a uniformly random ranking, about K / n_items."""
    return k / n_items
