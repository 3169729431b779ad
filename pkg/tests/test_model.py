import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import connected_log
from layergcn.errors import NumericalError
from layergcn.graph import build_graph, normalize
from layergcn.ingest import InteractionLog
from layergcn.model import (
    ModelConfig, cosine_rows, forward, forward_layergcn, forward_lightgcn, init_embeddings,
    layer_divergence, mean_layer_similarity, score_all,
)
from oracles import dense_adjacency, dense_layergcn, dense_lightgcn, dense_normalize

EPS = 1e-8


class TestCosine:
    def test_identical_rows(self, rng):
        a = rng.normal(size=(5, 3))
        np.testing.assert_allclose(cosine_rows(a, a, EPS), 1.0, rtol=0, atol=1e-15)

    def test_opposite_rows(self, rng):
        a = rng.normal(size=(5, 3))
        np.testing.assert_allclose(cosine_rows(a, -a, EPS), -1.0, rtol=0, atol=1e-15)

    def test_orthogonal(self):
        assert cosine_rows(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), EPS).tolist() == [0.0]

    def test_zero_row_guarded(self):
        out = cosine_rows(np.zeros((1, 3)), np.ones((1, 3)), EPS)
        assert out.tolist() == [0.0]

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, (4, 3), elements=st.floats(-1e3, 1e3)))
    def test_bounds(self, a, b):
        out = cosine_rows(a, b, EPS)
        assert np.all(out >= -1 - 1e-12) and np.all(out <= 1 + 1e-12)


def small_instance(rng, n_users=3, n_items=5, dim=4):
    log = connected_log(rng, n_users, n_items, 2)
    adj = normalize(build_graph(log))
    dense = dense_normalize(dense_adjacency(n_users, n_items, zip(log.users, log.items)))
    return adj, dense, rng.normal(size=(n_users + n_items, dim))


class TestLayerGCN:
    def test_parallel_propagation(self, rng):
        # a self-map adjacency propagates each row onto itself: cosine 1
        adj = sp.identity(4, format="csr")
        x0 = rng.normal(size=(4, 3))
        trace = forward_layergcn(adj, x0, ModelConfig("layergcn", 1))
        np.testing.assert_allclose(trace.sims[0], 1.0, atol=1e-15)
        np.testing.assert_allclose(trace.final, (1 + EPS) * x0, rtol=1e-15)

    def test_zero_embeddings(self):
        adj = normalize(build_graph(InteractionLog([0, 1], [0, 1], [0, 1], 2, 2)))
        trace = forward_layergcn(adj, np.zeros((4, 3)), ModelConfig("layergcn", 3))
        assert np.all(trace.final == 0)
        assert all(np.all(a == 0) for a in trace.sims)

    def test_dense_oracle(self, rng):
        for _ in range(5):
            adj, dense, x0 = small_instance(rng)
            trace = forward_layergcn(adj, x0, ModelConfig("layergcn", 3, EPS))
            expected = dense_layergcn(dense, x0, 3, EPS)
            assert np.max(np.abs(trace.final - expected)) < 1e-12

    def test_readout_excludes_ego(self, rng):
        x0 = rng.normal(size=(4, 3))
        zero = sp.csr_matrix((4, 4))
        layer = forward(zero, x0, ModelConfig("layergcn", 1))
        light = forward(zero, x0, ModelConfig("lightgcn", 1))
        assert np.all(layer.final == 0)
        np.testing.assert_array_equal(light.final, x0 / 2)

    def test_scale_equivariance(self, rng):
        adj, _, x0 = small_instance(rng, 6, 7, 5)
        cfg = ModelConfig("layergcn", 4)
        base = forward(adj, x0, cfg).final
        for c in (0.1, 3.0, 17.0):
            np.testing.assert_allclose(forward(adj, c * x0, cfg).final, c * base, rtol=0, atol=1e-10)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_names_layer(self):
        adj = sp.identity(2, format="csr") * 1e300
        x0 = np.full((2, 2), 1e10)
        with pytest.raises(NumericalError, match="layer 1"):
            forward_layergcn(adj.tocsr(), x0, ModelConfig("layergcn", 2))


class TestLightGCN:
    def test_single_edge_swaps(self, rng):
        adj = normalize(build_graph(InteractionLog([0], [0], [0], 1, 1)))
        x0 = rng.normal(size=(2, 3))
        trace = forward_lightgcn(adj, x0, ModelConfig("lightgcn", 1))
        np.testing.assert_array_equal(trace.layers[0], x0[::-1])
        np.testing.assert_allclose(trace.final, (x0 + x0[::-1]) / 2)

    def test_dense_oracle(self, rng):
        for n_layers in (1, 2, 3, 4):
            adj, dense, x0 = small_instance(rng, 5, 6, 3)
            trace = forward_lightgcn(adj, x0, ModelConfig("lightgcn", n_layers))
            assert np.max(np.abs(trace.final - dense_lightgcn(dense, x0, n_layers))) < 1e-12


def test_bpr_mf_is_identity(rng):
    adj, _, x0 = small_instance(rng)
    assert forward(adj, x0, ModelConfig("bpr_mf", 3)).final is x0


class TestScores:
    def test_zero_user(self, rng):
        x = rng.normal(size=(5, 3))
        x[1] = 0
        assert np.all(score_all(x, 1, 2) == 0)

    def test_basis(self):
        x = np.vstack([[0.0, 1.0, 0.0], np.eye(3)])
        assert score_all(x, 0, 1).tolist() == [0.0, 1.0, 0.0]

    def test_matches_dense(self, rng):
        x = rng.normal(size=(9, 4))
        np.testing.assert_allclose(score_all(x, 2, 4), x[4:] @ x[2], rtol=1e-15)

    def test_range_check(self, rng):
        with pytest.raises(IndexError):
            score_all(rng.normal(size=(5, 2)), 3, 3)


class TestDiagnostics:
    def test_divergence_identity_layers(self, rng):
        x0 = rng.normal(size=(4, 3))
        trace = forward(sp.identity(4, format="csr"), x0, ModelConfig("lightgcn", 2))
        assert np.all(layer_divergence(trace) == 0)

    def test_divergence_doubled(self, rng):
        x0 = rng.normal(size=(4, 3))
        trace = forward(2 * sp.identity(4, format="csr"), x0, ModelConfig("lightgcn", 1))
        np.testing.assert_allclose(layer_divergence(trace)[0], np.linalg.norm(x0, axis=1), rtol=1e-15)

    def test_divergence_loop_oracle(self, rng):
        adj, _, x0 = small_instance(rng)
        trace = forward(adj, x0, ModelConfig("layergcn", 3))
        d = layer_divergence(trace)
        for l, layer in enumerate(trace.layers):
            for v in range(x0.shape[0]):
                expected = sum((layer[v, t] - x0[v, t]) ** 2 for t in range(x0.shape[1])) ** 0.5
                assert abs(d[l, v] - expected) < 1e-12

    def test_mean_similarity(self, rng):
        adj, _, x0 = small_instance(rng)
        trace = forward(adj, x0, ModelConfig("layergcn", 4))
        sims = mean_layer_similarity(trace)
        assert sims.shape == (4,)
        for l, a in enumerate(trace.sims):
            assert sims[l] == pytest.approx(sum(a.tolist()) / len(a), abs=1e-15)

    def test_mean_similarity_alternating(self):
        from layergcn.model import ForwardTrace
        trace = ForwardTrace("layergcn", EPS, np.zeros((4, 1)), sims=[np.array([1.0, -1, 1, -1]), np.ones(4)])
        assert mean_layer_similarity(trace).tolist() == [0.0, 1.0]

    def test_similarity_needs_layergcn(self, rng):
        adj, _, x0 = small_instance(rng)
        with pytest.raises(ValueError):
            mean_layer_similarity(forward(adj, x0, ModelConfig("lightgcn", 2)))


def test_refinement_contracts_distance_to_ego():
    """|x cos - x0| <= |x - x0| whenever cos(x, x0) < 0."""
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 10_000:
        dim = int(rng.integers(1, 65))
        x, x0 = rng.normal(size=(2, dim)) * rng.lognormal(size=(2, 1))
        cos = float(x @ x0 / (np.linalg.norm(x) * np.linalg.norm(x0)))
        if not cos < 0:
            continue
        checked += 1
        assert np.linalg.norm(x * cos - x0) <= np.linalg.norm(x - x0) + 1e-12


def test_init_bounds(rng):
    x = init_embeddings(10, 30, 8, rng)
    assert x.shape == (40, 8)
    assert np.abs(x[:10]).max() <= np.sqrt(6 / 18)
    assert np.abs(x[10:]).max() <= np.sqrt(6 / 38)


@pytest.mark.parametrize("cfg,ok", [
    (ModelConfig("layergcn", 4), True),
    (ModelConfig("gat", 4), False),
    (ModelConfig("layergcn", 0), False),
    (ModelConfig("layergcn", 2, 0.0), False),
])
def test_config_validation(cfg, ok):
    assert (not cfg.validate()) == ok
