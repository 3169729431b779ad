"""Independent reference implementations used as test oracles.

Nothing here imports package internals beyond plain data containers: each
oracle recomputes its quantity from definitions with dense arrays, Python
loops, or brute force.
"""

import math

import numpy as np


def brute_force_k_core(pairs, k):
    """Repeatedly delete one under-degree node until none remain."""
    edges = set(pairs)
    while True:
        udeg, ideg = {}, {}
        for u, i in edges:
            udeg[u] = udeg.get(u, 0) + 1
            ideg[i] = ideg.get(i, 0) + 1
        victim = next((("u", u) for u, d in sorted(udeg.items()) if d < k), None)
        if victim is None:
            victim = next((("i", i) for i, d in sorted(ideg.items()) if d < k), None)
        if victim is None:
            return edges
        kind, node = victim
        edges = {(u, i) for u, i in edges if (u if kind == "u" else i) != node}


def sort_and_slice_split(records, ratios=(0.7, 0.1, 0.2)):
    """records: list of (user, item, ts). Returns three lists of records."""
    ordered = sorted(records, key=lambda r: (r[2], r[0], r[1]))
    n = len(ordered)
    a = int(math.floor(n * ratios[0] + 0.5))
    b = int(math.floor(n * (ratios[0] + ratios[1]) + 0.5))
    train, valid, test = ordered[:a], ordered[a:b], ordered[b:]
    users = {r[0] for r in train}
    items = {r[1] for r in train}
    valid = [r for r in valid if r[0] in users and r[1] in items]
    test = [r for r in test if r[0] in users and r[1] in items]
    return train, valid, test


def dense_adjacency(n_users, n_items, pairs):
    n = n_users + n_items
    a = np.zeros((n, n))
    for u, i in pairs:
        a[u, n_users + i] = 1.0
        a[n_users + i, u] = 1.0
    return a


def dense_normalize(a):
    deg = a.sum(axis=1)
    inv = np.zeros_like(deg)
    inv[deg > 0] = deg[deg > 0] ** -0.5
    return inv[:, None] * a * inv[None, :]


def dense_layergcn(a_hat, x0, n_layers, eps):
    """Straight-line refinement forward pass with explicit per-row loops."""
    x = x0
    out = np.zeros_like(x0)
    for _ in range(n_layers):
        h = a_hat @ x
        nxt = np.empty_like(h)
        for r in range(h.shape[0]):
            num = float(np.dot(h[r], x0[r]))
            den = max(math.sqrt(float(np.dot(h[r], h[r]))) * math.sqrt(float(np.dot(x0[r], x0[r]))), eps)
            nxt[r] = (num / den + eps) * h[r]
        x = nxt
        out = out + x
    return out


def dense_lightgcn(a_hat, x0, n_layers):
    layers = [x0]
    for _ in range(n_layers):
        layers.append(a_hat @ layers[-1])
    return sum(layers) / (n_layers + 1)


def brute_force_evaluate(final, n_users, train_pairs, target_pairs, ks):
    """Scalar-loop all-ranking evaluator: full sort per user, set lookups."""
    n_items = final.shape[0] - n_users
    train_by_user, target_by_user = {}, {}
    for u, i in train_pairs:
        train_by_user.setdefault(u, set()).add(i)
    for u, i in target_pairs:
        target_by_user.setdefault(u, set()).add(i)
    per_user = {}
    for u in sorted(target_by_user):
        scores = []
        for i in range(n_items):
            if i in train_by_user.get(u, set()):
                continue
            s = sum(float(final[u, t]) * float(final[n_users + i, t]) for t in range(final.shape[1]))
            scores.append((-s, i))
        scores.sort()
        ranking = [i for _, i in scores]
        rel = target_by_user[u]
        row = {}
        for k in ks:
            top = ranking[:k]
            hits = [1 if i in rel else 0 for i in top]
            row[f"recall@{k}"] = sum(hits) / len(rel)
            dcg = sum((2 ** h - 1) / math.log(pos + 2) for pos, h in enumerate(hits))
            idcg = sum(1 / math.log(pos + 2) for pos in range(min(len(rel), k)))
            row[f"ndcg@{k}"] = dcg / idcg
        per_user[u] = row
    return per_user


def scalar_adam(xs, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Adam on a single scalar, given the gradient sequence."""
    m = v = 0.0
    x = xs
    trace = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        x = x - lr * mh / (math.sqrt(vh) + eps)
        trace.append(x)
    return trace


def central_differences(fn, x, h=1e-5):
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        plus = x.copy()
        minus = x.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (fn(plus) - fn(minus)) / (2 * h)
    return grad
