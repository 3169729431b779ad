import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_log
from layergcn.errors import DataError
from layergcn.ingest import (
    InteractionLog, chronological_split, dataset_stats, k_core_filter, load_interactions,
    read_splits, write_splits,
)
from oracles import brute_force_k_core, sort_and_slice_split


def raw_pairs(log):
    return {(log.user_ids[u], log.item_ids[i]) for u, i in zip(log.users, log.items)}


class TestLoad:
    def test_dedup_keeps_earliest(self, write_tsv):
        path = write_tsv(["a\tx\t5", "b\ty\t6", "a\tx\t2"])
        log = load_interactions(path)
        assert len(log) == 2
        assert (log.n_users, log.n_items) == (2, 2)
        row = list(zip(log.users, log.items)).index((log.user_index["a"], log.item_index["x"]))
        assert log.timestamps[row] == 2

    def test_single_record(self, write_tsv):
        log = load_interactions(write_tsv(["u1\ti1\t100"]))
        assert len(log) == 1 and log.n_users == 1 and log.n_items == 1

    def test_header_detected(self, write_tsv):
        log = load_interactions(write_tsv(["user\titem\ttimestamp", "1\t2\t3"]))
        assert len(log) == 1 and log.user_ids == ["1"]

    def test_column_selection_and_extra_fields(self, write_tsv):
        path = write_tsv(["user\titem\trating\ttimestamp", "7\t9\t4\t881250949"])
        log = load_interactions(path, columns=(0, 1, 3))
        assert log.timestamps.tolist() == [881250949]

    def test_comma_delimiter(self, write_tsv):
        log = load_interactions(write_tsv(["a,b,1", "c,b,2"]), delimiter=",")
        assert (log.n_users, log.n_items) == (2, 1)

    def test_malformed_line_reports_line_number(self, write_tsv):
        with pytest.raises(DataError, match=":3:"):
            load_interactions(write_tsv(["a\tb\t1", "a\tc\t2", "broken line"]))

    def test_bad_timestamp(self, write_tsv):
        with pytest.raises(DataError, match=":2:"):
            load_interactions(write_tsv(["a\tb\t1", "a\tc\tnoon"]))

    def test_empty_file(self, write_tsv):
        with pytest.raises(DataError):
            load_interactions(write_tsv([]))


class TestKCore:
    def test_star_graph_is_empty(self):
        log = InteractionLog([0] * 5, range(5), range(5), 1, 5)
        with pytest.raises(DataError, match="k-core empty"):
            k_core_filter(log, 2)

    def test_complete_bipartite_unchanged(self):
        users, items = zip(*[(u, i) for u in range(3) for i in range(3)])
        log = InteractionLog(users, items, range(9), 3, 3)
        out = k_core_filter(log, 3)
        assert raw_pairs(out) == raw_pairs(log)
        assert (out.n_users, out.n_items) == (3, 3)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            log = random_log(rng, 50, 30, 500)
            pairs = set(zip(log.users.tolist(), log.items.tolist()))
            expected = {(str(u), str(i)) for u, i in brute_force_k_core(pairs, 5)}
            out = k_core_filter(log, 5)
            assert raw_pairs(out) == expected
            out.validate()

    def test_separate_user_and_item_thresholds(self, rng):
        log = random_log(rng, 40, 20, 300)
        out = k_core_filter(log, 8, k_item=3)
        assert np.bincount(out.users).min() >= 8
        assert np.bincount(out.items).min() >= 3

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 6))
    def test_idempotent(self, seed, k):
        log = random_log(np.random.default_rng(seed), 30, 20, 200)
        try:
            once = k_core_filter(log, k)
        except DataError:
            return
        twice = k_core_filter(once, k)
        assert raw_pairs(once) == raw_pairs(twice)
        assert np.array_equal(once.users, twice.users)


class TestSplit:
    def test_ratio_arithmetic(self):
        users = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2]
        items = [0, 1, 2, 0, 1, 2, 3, 0, 1, 2]
        log = InteractionLog(users, items, range(10), 3, 4)
        # every user and item of the tail also appears in the first seven rows
        split = chronological_split(log)
        assert (len(split.train), len(split.valid), len(split.test)) == (7, 1, 2)

    def test_all_cold_start_gives_empty_splits(self, caplog):
        users = list(range(10))
        log = InteractionLog(users, users, range(10), 10, 10)
        with caplog.at_level(logging.WARNING):
            split = chronological_split(log)
        assert len(split.train) == 7 and len(split.valid) == 0 and len(split.test) == 0
        assert "empty" in caplog.text
        assert split.n_dropped == 3

    def test_matches_sort_and_slice(self, rng):
        log = random_log(rng, 80, 60, 1000)
        # coarse timestamps force plenty of ties
        log.timestamps = log.timestamps // 50
        split = chronological_split(log)
        records = list(zip(log.users.tolist(), log.items.tolist(), log.timestamps.tolist()))
        expected = sort_and_slice_split(records)
        for part, exp in zip((split.train, split.valid, split.test), expected):
            got = [(int(part.user_ids[u]), int(part.item_ids[i]), int(t))
                   for u, i, t in zip(part.users, part.items, part.timestamps)]
            assert got == exp

    def test_invariants(self, rng):
        log = random_log(rng, 60, 40, 700)
        split = chronological_split(log)
        total = len(split.train) + len(split.valid) + len(split.test) + split.n_dropped
        assert total == len(log)
        sets = [p.pairs() for p in (split.train, split.valid, split.test)]
        assert not (sets[0] & sets[1]) and not (sets[0] & sets[2]) and not (sets[1] & sets[2])
        train_users, train_items = set(split.train.users), set(split.train.items)
        for part in (split.valid, split.test):
            assert set(part.users) <= train_users and set(part.items) <= train_items
        assert split.n_users == len(train_users) and split.n_items == len(train_items)
        assert split.train.timestamps.max() <= split.test.timestamps.min()

    def test_bad_ratios(self, rng):
        with pytest.raises(DataError):
            chronological_split(random_log(rng, 5, 5, 10), (0.5, 0.5, 0.5))

    def test_round_trip_files(self, rng, tmp_path):
        split = chronological_split(random_log(rng, 30, 20, 200))
        write_splits(split, tmp_path)
        back = read_splits(tmp_path)
        for name in ("train", "valid", "test"):
            a, b = getattr(split, name), getattr(back, name)
            assert np.array_equal(a.users, b.users) and np.array_equal(a.items, b.items)
            assert np.array_equal(a.timestamps, b.timestamps)
        assert back.train.user_ids == split.train.user_ids
        assert back.train.item_ids == split.train.item_ids


def test_stats_sparsity():
    log = InteractionLog([0], [0], [1], 2, 2)
    assert dataset_stats(log)["sparsity"] == pytest.approx(75.0)
