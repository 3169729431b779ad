import numpy as np
import pytest

from layergcn.ingest import InteractionLog


def random_log(rng, n_users, n_items, n_pairs, with_time=True):
    pairs = set()
    while len(pairs) < n_pairs:
        pairs.add((int(rng.integers(n_users)), int(rng.integers(n_items))))
    pairs = sorted(pairs)
    users = [p[0] for p in pairs]
    items = [p[1] for p in pairs]
    stamps = rng.integers(0, 10 * n_pairs, size=len(pairs)) if with_time else np.arange(len(pairs))
    return InteractionLog(users, items, stamps, n_users, n_items)


def connected_log(rng, n_users, n_items, extra):
    """Every user and item has at least one interaction."""
    pairs = {(u, int(rng.integers(n_items))) for u in range(n_users)}
    pairs |= {(int(rng.integers(n_users)), i) for i in range(n_items)}
    target = min(n_users + n_items + extra, n_users * n_items)
    while len(pairs) < target:
        pairs.add((int(rng.integers(n_users)), int(rng.integers(n_items))))
    pairs = sorted(pairs)
    return InteractionLog([p[0] for p in pairs], [p[1] for p in pairs],
                          np.arange(len(pairs)), n_users, n_items)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def write_tsv(tmp_path):
    def _write(lines, name="log.tsv"):
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines))
        return path
    return _write
