import math

import networkx as nx
import numpy as np
import pytest

from dpcp.datagen import (
    MeterGraph,
    ObservationSet,
    SynthConfig,
    is_connected,
    random_geometric_graph,
    synthesize,
)
from dpcp.errors import GraphGenerationError, ValidationError


def union_find_connected(n, edges):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


class TestGraph:
    def test_two_nodes_within_range(self):
        g = random_geometric_graph(2, 0.4, positions=[[0.1, 0.1], [0.4, 0.1]])
        assert g.edges == ((0, 1),)

    def test_single_node(self):
        g = random_geometric_graph(1, 0.4, seed=0)
        assert g.edges == () and is_connected(g)

    def test_paper_size_connected(self):
        g = random_geometric_graph(25, 0.4, seed=0)
        assert is_connected(g)
        assert nx.is_connected(g.to_networkx())
        pos = g.positions
        for i, j in g.edges:
            assert np.linalg.norm(pos[i] - pos[j]) < 0.4

    def test_edge_rule_is_strict(self):
        pos = [[0.0, 0.0], [0.5, 0.0]]
        with pytest.raises(GraphGenerationError):
            random_geometric_graph(2, 0.5, positions=pos)

    def test_retry_budget_exhausted(self):
        with pytest.raises(GraphGenerationError):
            random_geometric_graph(40, 0.01, seed=1, max_tries=5)

    def test_invariants_over_seeds(self):
        for seed in range(20):
            g = random_geometric_graph(15, 0.45, seed=seed)
            for n, nb in enumerate(g.neighbors):
                assert n not in nb
                for m in nb:
                    assert n in g.neighbors[m]
            assert is_connected(g)

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            random_geometric_graph(0, 0.4)
        with pytest.raises(ValidationError):
            random_geometric_graph(3, 0.0)


class TestIsConnected:
    def test_path(self):
        assert is_connected(MeterGraph.from_edges(3, [(0, 1), (1, 2)]))

    def test_isolated(self):
        assert not is_connected(MeterGraph.from_edges(2, []))

    def test_agrees_with_union_find(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 9))
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
            g = MeterGraph.from_edges(n, pairs)
            assert is_connected(g) == union_find_connected(n, pairs)

    def test_from_edges_validation(self):
        with pytest.raises(ValidationError):
            MeterGraph.from_edges(2, [(0, 0)])
        with pytest.raises(ValidationError):
            MeterGraph.from_edges(2, [(0, 1), (1, 0)])
        with pytest.raises(ValidationError):
            MeterGraph.from_edges(2, [(0, 2)])


class TestSynthesize:
    def test_no_outliers(self):
        ds, _ = synthesize(SynthConfig(N=5, T=20, r=2, p_out=0.0, seed=1, d_c=0.8))
        assert not np.any(ds.O)

    def test_full_observation(self):
        ds, _ = synthesize(SynthConfig(N=5, T=20, r=2, p_obs=1.0, seed=1, d_c=0.8))
        assert np.all(ds.mask == 1)
        np.testing.assert_array_equal(ds.Y_obs, ds.X + ds.O + ds.E)

    def test_model_identities(self):
        ds, g = synthesize(SynthConfig(N=10, T=50, r=3, amplitude=2.5, seed=4, d_c=0.6))
        np.testing.assert_array_equal(ds.X, ds.W @ ds.Z.T)
        np.testing.assert_array_equal(ds.Y_obs, ds.mask * (ds.X + ds.O + ds.E))
        assert set(np.unique(ds.O)) <= {-2.5, 0.0, 2.5}
        assert np.all(ds.Y_obs[ds.mask == 0] == 0)
        s = np.linalg.svd(ds.X, compute_uv=False)
        assert s[3] <= 1e-8 * s[0]
        assert g.n_nodes == 10

    def test_deterministic(self):
        cfg = SynthConfig(N=8, T=40, seed=11, d_c=0.6)
        a, ga = synthesize(cfg)
        b, gb = synthesize(cfg)
        for f in ("X", "W", "Z", "O", "E", "mask", "Y_obs"):
            assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
        assert ga == gb
        c, _ = synthesize(SynthConfig(N=8, T=40, seed=12, d_c=0.6))
        assert not np.array_equal(a.X, c.X)

    def test_paper_statistics(self):
        cfg = SynthConfig()
        ds, g = synthesize(cfg)
        n = cfg.N * cfg.T
        assert abs(ds.mask.mean() - 0.7) <= 0.05
        assert abs(np.mean(ds.O != 0) - 0.10) <= 0.02
        # Four standard errors around each nominal probability.
        for frac, p in [
            (ds.mask.mean(), cfg.p_obs),
            (np.mean(ds.O == 1), cfg.p_out),
            (np.mean(ds.O == -1), cfg.p_out),
        ]:
            assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / n)
        e = ds.E.ravel()
        assert abs(e.mean()) <= 4 * math.sqrt(cfg.sigma2 / n)
        # Sample variance: standard error sigma^2 * sqrt(2/n) for Gaussian data.
        assert abs(e.var() - cfg.sigma2) <= 4 * cfg.sigma2 * math.sqrt(2 / n)
        assert is_connected(g)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(p_out=0.6), dict(p_obs=0.0), dict(r=30, N=5, T=20), dict(d_c=0), dict(sigma2=-1)],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValidationError):
            SynthConfig(**kwargs)


class TestObservationSet:
    def test_rejects_data_off_mask(self):
        with pytest.raises(ValidationError):
            ObservationSet(np.ones((2, 2)), np.eye(2))

    def test_from_full(self):
        obs = ObservationSet.from_full(np.ones((2, 2)), np.eye(2))
        np.testing.assert_array_equal(obs.Y, np.eye(2))
