"""Bipartite user-item graph, symmetric normalization and the propagation kernel.

Node ids: users occupy ``[0, n_users)``, item ``i`` is node ``n_users + i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ingest import InteractionLog


@dataclass(frozen=True)
class BipartiteGraph:
    n_users: int
    n_items: int
    users: np.ndarray   # edge k joins user users[k] ...
    items: np.ndarray   # ... and item items[k]
    degree: np.ndarray  # per node, length n_users + n_items

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_items

    @property
    def n_edges(self) -> int:
        return len(self.users)

    @property
    def heads(self) -> np.ndarray:
        return self.users

    @property
    def tails(self) -> np.ndarray:
        return self.items + self.n_users


def node_degrees(n_nodes: int, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    return (np.bincount(heads, minlength=n_nodes)
            + np.bincount(tails, minlength=n_nodes)).astype(np.int64)


def build_graph(train: InteractionLog) -> BipartiteGraph:
    """One undirected edge per training interaction."""
    users = np.asarray(train.users, dtype=np.int64).copy()
    items = np.asarray(train.items, dtype=np.int64).copy()
    n = train.n_users + train.n_items
    return BipartiteGraph(train.n_users, train.n_items, users, items,
                          node_degrees(n, users, items + train.n_users))


def symmetric_adjacency(n_nodes: int, heads: np.ndarray, tails: np.ndarray,
                        dtype=np.float64) -> sp.csr_matrix:
    """D^{-1/2} A D^{-1/2} over the undirected edges ``(heads[k], tails[k])``.

    Degrees come from the given edges, so passing a subset renormalizes.
    Nodes without edges get empty rows. No self-loops are added.
    """
    heads = np.asarray(heads, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    deg = node_degrees(n_nodes, heads, tails)
    root = np.sqrt(deg.astype(np.float64))
    weight = 1.0 / (root[heads] * root[tails])
    rows = np.concatenate([heads, tails])
    cols = np.concatenate([tails, heads])
    vals = np.concatenate([weight, weight]).astype(dtype)
    adj = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
    adj.sort_indices()
    return adj


def normalize(g: BipartiteGraph, dtype=np.float64) -> sp.csr_matrix:
    return symmetric_adjacency(g.n_nodes, g.heads, g.tails, dtype=dtype)


def spmm(adj: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``adj @ x``.

    scipy's CSR kernel walks rows in order and accumulates each row's stored
    entries in index order, so repeated calls are bit-identical.
    """
    if adj.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: adjacency {adj.shape} vs embeddings {x.shape}")
    return np.asarray(adj @ x)


def dump_coo(adj: sp.spmatrix, path):
    """Write ``i j value`` lines, one per stored entry (debugging aid)."""
    coo = adj.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{i}\t{j}\t{v!r}\n")
