"""Interaction loading, k-core filtering and chronological splitting."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "valid", "test")


@dataclass
class InteractionLog:
    """Deduplicated (user, item, timestamp) records over dense indices.

    ``user_ids[u]`` / ``item_ids[i]`` give the raw identifier behind each index.
    """

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    n_users: int
    n_items: int
    user_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if not (len(self.users) == len(self.items) == len(self.timestamps)):
            raise DataError("users, items and timestamps must have equal length")
        if not self.user_ids:
            self.user_ids = [str(u) for u in range(self.n_users)]
        if not self.item_ids:
            self.item_ids = [str(i) for i in range(self.n_items)]

    def __len__(self):
        return len(self.users)

    @property
    def user_index(self) -> dict:
        return {raw: idx for idx, raw in enumerate(self.user_ids)}

    @property
    def item_index(self) -> dict:
        return {raw: idx for idx, raw in enumerate(self.item_ids)}

    def pairs(self) -> set:
        return set(zip(self.users.tolist(), self.items.tolist()))

    def subset(self, mask: np.ndarray) -> "InteractionLog":
        """Rows selected by ``mask``; index space is left untouched."""
        return InteractionLog(
            self.users[mask], self.items[mask], self.timestamps[mask],
            self.n_users, self.n_items, list(self.user_ids), list(self.item_ids),
        )

    def validate(self):
        if self.n_users < 1 or self.n_items < 1:
            raise DataError("interaction log needs at least one user and one item")
        if len(self) and (self.users.min() < 0 or self.users.max() >= self.n_users):
            raise DataError("user index out of range")
        if len(self) and (self.items.min() < 0 or self.items.max() >= self.n_items):
            raise DataError("item index out of range")
        keys = self.users * self.n_items + self.items
        if len(np.unique(keys)) != len(keys):
            raise DataError("duplicate (user, item) pair")


@dataclass
class SplitBundle:
    """Train/valid/test logs sharing the train split's user and item index space."""

    train: InteractionLog
    valid: InteractionLog
    test: InteractionLog
    n_dropped: int = 0

    @property
    def n_users(self) -> int:
        return self.train.n_users

    @property
    def n_items(self) -> int:
        return self.train.n_items


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not np.isfinite(value) or value != int(value):
            raise ValueError(f"timestamp {text!r} is not an integer")
        return int(value)


def from_records(records, user_ids=None, item_ids=None) -> InteractionLog:
    """Build a log from ``(raw_user, raw_item, timestamp)`` triples.

    Duplicate pairs keep their earliest timestamp. Indices are assigned in
    order of first appearance.
    """
    user_index = {} if user_ids is None else {r: i for i, r in enumerate(user_ids)}
    item_index = {} if item_ids is None else {r: i for i, r in enumerate(item_ids)}
    earliest = {}
    for raw_user, raw_item, ts in records:
        u = user_index.setdefault(raw_user, len(user_index))
        i = item_index.setdefault(raw_item, len(item_index))
        key = (u, i)
        if key not in earliest or ts < earliest[key]:
            earliest[key] = ts
    if not earliest:
        raise DataError("no interactions")
    keys = list(earliest)
    users = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
    items = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
    stamps = np.fromiter(earliest.values(), dtype=np.int64, count=len(keys))
    return InteractionLog(users, items, stamps, len(user_index), len(item_index),
                          list(user_index), list(item_index))


def load_interactions(path, delimiter: str = "\t",
                      columns: Sequence[int] = (0, 1, 2)) -> InteractionLog:
    """Read a delimited interaction file.

    ``columns`` gives the positions of the user, item and timestamp fields.
    A first line whose timestamp field is non-numeric is treated as a header.
    Any extra columns (ratings, say) are ignored: every record is a positive.
    """
    user_col, item_col, time_col = columns
    width = max(columns) + 1
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(delimiter) if delimiter != " " else line.split()
            if len(fields) < width:
                raise DataError(f"{path}:{lineno}: expected at least {width} fields, got {len(fields)}")
            if not records and lineno == 1 and not _is_number(fields[time_col].strip()):
                continue
            try:
                ts = _parse_timestamp(fields[time_col].strip())
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad timestamp: {exc}") from None
            user, item = fields[user_col].strip(), fields[item_col].strip()
            if not user or not item:
                raise DataError(f"{path}:{lineno}: empty user or item field")
            records.append((user, item, ts))
    if not records:
        raise DataError(f"{path}: no interactions")
    return from_records(records)


def _reindex(log: InteractionLog, keep: np.ndarray) -> InteractionLog:
    """Restrict to rows in ``keep`` and compact indices, preserving their order."""
    users, items = log.users[keep], log.items[keep]
    kept_users = np.unique(users)
    kept_items = np.unique(items)
    user_map = np.full(log.n_users, -1, dtype=np.int64)
    item_map = np.full(log.n_items, -1, dtype=np.int64)
    user_map[kept_users] = np.arange(len(kept_users))
    item_map[kept_items] = np.arange(len(kept_items))
    return InteractionLog(
        user_map[users], item_map[items], log.timestamps[keep],
        len(kept_users), len(kept_items),
        [log.user_ids[u] for u in kept_users], [log.item_ids[i] for i in kept_items],
    )


def k_core_filter(log: InteractionLog, k: int, k_item: int | None = None) -> InteractionLog:
    """Iteratively drop users with < ``k`` and items with < ``k_item`` interactions."""
    if k < 1 or (k_item is not None and k_item < 1):
        raise DataError("k must be >= 1")
    k_item = k if k_item is None else k_item
    keep = np.ones(len(log), dtype=bool)
    while True:
        user_deg = np.bincount(log.users[keep], minlength=log.n_users)
        item_deg = np.bincount(log.items[keep], minlength=log.n_items)
        new_keep = keep & (user_deg[log.users] >= k) & (item_deg[log.items] >= k_item)
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    if not keep.any():
        raise DataError("k-core empty")
    return _reindex(log, np.flatnonzero(keep))


def chronological_split(log: InteractionLog,
                        ratios: Sequence[float] = (0.7, 0.1, 0.2)) -> SplitBundle:
    """Global time-ordered 70/10/20 split with cold-start removal.

    Ties in timestamp are broken by (user, item) index. Validation and test
    rows whose user or item never occurs in training are dropped, and all
    three splits are re-indexed onto the training split's users and items.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(log)
    order = np.lexsort((log.items, log.users, log.timestamps))
    cut1 = int(np.floor(n * ratios[0] + 0.5))
    cut2 = int(np.floor(n * (ratios[0] + ratios[1]) + 0.5))
    if cut1 == 0:
        raise DataError("train split is empty")
    parts = [order[:cut1], order[cut1:cut2], order[cut2:]]

    train_rows = parts[0]
    seen_users = np.zeros(log.n_users, dtype=bool)
    seen_items = np.zeros(log.n_items, dtype=bool)
    seen_users[log.users[train_rows]] = True
    seen_items[log.items[train_rows]] = True

    user_map = np.full(log.n_users, -1, dtype=np.int64)
    item_map = np.full(log.n_items, -1, dtype=np.int64)
    train_users = np.flatnonzero(seen_users)
    train_items = np.flatnonzero(seen_items)
    user_map[train_users] = np.arange(len(train_users))
    item_map[train_items] = np.arange(len(train_items))
    user_ids = [log.user_ids[u] for u in train_users]
    item_ids = [log.item_ids[i] for i in train_items]

    logs = []
    dropped = 0
    for name, rows in zip(SPLIT_NAMES, parts):
        if name != "train":
            warm = seen_users[log.users[rows]] & seen_items[log.items[rows]]
            dropped += int(len(rows) - warm.sum())
            rows = rows[warm]
        logs.append(InteractionLog(
            user_map[log.users[rows]], item_map[log.items[rows]], log.timestamps[rows],
            len(train_users), len(train_items), list(user_ids), list(item_ids),
        ))
    for name, part in zip(SPLIT_NAMES[1:], logs[1:]):
        if len(part) == 0:
            logger.warning("%s split is empty after cold-start removal", name)
    return SplitBundle(*logs, n_dropped=dropped)


def dataset_stats(log: InteractionLog) -> dict:
    """Users, items, interactions and sparsity (percent), as in a dataset table."""
    m = len(log)
    sparsity = 100.0 * (1.0 - m / (log.n_users * log.n_items))
    return {"n_users": log.n_users, "n_items": log.n_items,
            "n_interactions": m, "sparsity": sparsity}


def write_log(log: InteractionLog, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user\titem\ttimestamp\n")
        for u, i, t in zip(log.users.tolist(), log.items.tolist(), log.timestamps.tolist()):
            fh.write(f"{u}\t{i}\t{t}\n")


def write_splits(bundle: SplitBundle, out_dir):
    """Write ``train.tsv``, ``valid.tsv``, ``test.tsv`` and ``id_map.tsv``."""
    os.makedirs(out_dir, exist_ok=True)
    for name in SPLIT_NAMES:
        write_log(getattr(bundle, name), os.path.join(out_dir, f"{name}.tsv"))
    with open(os.path.join(out_dir, "id_map.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind\tindex\traw_id\n")
        for idx, raw in enumerate(bundle.train.user_ids):
            fh.write(f"user\t{idx}\t{raw}\n")
        for idx, raw in enumerate(bundle.train.item_ids):
            fh.write(f"item\t{idx}\t{raw}\n")


def _read_index_file(path, n_users, n_items, user_ids, item_ids) -> InteractionLog:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\r\n").split("\t")
            if lineno == 1 and fields[0] == "user":
                continue
            if len(fields) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields")
            try:
                rows.append(tuple(int(f) for f in fields))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field") from None
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    log = InteractionLog(arr[:, 0], arr[:, 1], arr[:, 2], n_users, n_items,
                         list(user_ids), list(item_ids))
    log.validate()
    return log


def read_splits(data_dir) -> SplitBundle:
    """Inverse of :func:`write_splits`."""
    map_path = os.path.join(data_dir, "id_map.tsv")
    if not os.path.exists(map_path):
        raise DataError(f"{data_dir}: missing id_map.tsv (run `prepare` first)")
    user_ids, item_ids = [], []
    with open(map_path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            kind, _, raw = line.rstrip("\r\n").split("\t", 2)
            (user_ids if kind == "user" else item_ids).append(raw)
    logs = [_read_index_file(os.path.join(data_dir, f"{name}.tsv"),
                             len(user_ids), len(item_ids), user_ids, item_ids)
            for name in SPLIT_NAMES]
    if len(logs[0]) == 0:
        raise DataError(f"{data_dir}: train split is empty")
    return SplitBundle(*logs)
