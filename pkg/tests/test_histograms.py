import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import approx_histogram_oracle, exact_histogram_oracle, random_edges

from cohop.exceptions import ConfigError
from cohop.graph import build_graph
from cohop.histograms import (
    HistogramConfig,
    LabelHistogramTransformer,
    approx_histograms,
    concat_features,
    exact_histograms,
    normalize_rows,
)
from cohop.labels import LabelSet


def labelset(y, train, n_classes):
    return LabelSet.from_indices(y, n_classes, train, [])


class TestConfig:
    @pytest.mark.parametrize("kw", [{"alpha": -0.1}, {"alpha": 1.5}, {"ell": 0}, {"mode": "fast"}])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            HistogramConfig(**kw)


class TestExact:
    def test_geometric_decay_on_path(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        labels = labelset([0, 1, 1], [0], 2)
        cfg = HistogramConfig(alpha=0.5, ell=2)
        raw = exact_histograms(g, labels, cfg, normalize=False)
        np.testing.assert_allclose(raw, [[1, 0], [0.5, 0], [0.25, 0]])
        np.testing.assert_allclose(exact_histograms(g, labels, cfg), [[1, 0]] * 3)

    def test_out_of_range_is_zero(self):
        g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
        h = exact_histograms(g, labelset([0, 0, 0, 1], [0], 2), HistogramConfig(alpha=0.5, ell=2))
        np.testing.assert_array_equal(h[3], [0, 0])

    def test_val_labels_ignored(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        a = LabelSet.from_indices([0, 1, 1], 2, [0], [2])
        b = LabelSet.from_indices([0, 1, 0], 2, [0], [2])
        cfg = HistogramConfig(alpha=0.5, ell=3)
        np.testing.assert_array_equal(exact_histograms(g, a, cfg), exact_histograms(g, b, cfg))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_all_pairs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, c = 30, 3
        edges = random_edges(rng, n, 0.15)
        y = rng.integers(0, c, n)
        train = rng.choice(n, 6, replace=False)
        cfg = HistogramConfig(alpha=0.7, ell=4)
        got = exact_histograms(build_graph(edges, n), labelset(y, train, c), cfg)
        want = exact_histogram_oracle(n, edges, y, train, c, 0.7, 4)
        np.testing.assert_allclose(got, want, atol=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_node_relabeling_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        n, c = 25, 3
        edges = random_edges(rng, n, 0.15)
        y = rng.integers(0, c, n)
        train = rng.choice(n, 5, replace=False)
        perm = rng.permutation(n)
        cfg = HistogramConfig(alpha=0.6, ell=5)
        h = exact_histograms(build_graph(edges, n), labelset(y, train, c), cfg)
        pe = [(perm[u], perm[v]) for u, v in edges]
        py = np.empty_like(y)
        py[perm] = y
        hp = exact_histograms(build_graph(pe, n), labelset(py, perm[train], c), cfg)
        np.testing.assert_allclose(hp[perm], h, atol=1e-12)


class TestApprox:
    def test_one_step(self):
        g = build_graph([(0, 1)], 2)
        labels = labelset([0, 1], [0], 2)
        cfg = HistogramConfig(alpha=0.5, ell=1, mode="approximate")
        np.testing.assert_allclose(approx_histograms(g, labels, cfg, normalize=False), [[0, 0], [0.5, 0]])
        np.testing.assert_allclose(approx_histograms(g, labels, cfg), [[0, 0], [1, 0]])

    def test_alpha_zero(self):
        rng = np.random.default_rng(0)
        edges = random_edges(rng, 15, 0.3)
        h = approx_histograms(
            build_graph(edges, 15), labelset(rng.integers(0, 3, 15), [0, 1, 2], 3),
            HistogramConfig(alpha=0.0, ell=4, mode="approximate"),
        )
        assert np.all(h == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_powers(self, seed):
        rng = np.random.default_rng(seed)
        n, c = 25, 3
        edges = random_edges(rng, n, 0.2)
        y = rng.integers(0, c, n)
        train = rng.choice(n, 5, replace=False)
        cfg = HistogramConfig(alpha=0.6, ell=3, mode="approximate")
        got = approx_histograms(build_graph(edges, n), labelset(y, train, c), cfg)
        np.testing.assert_allclose(got, approx_histogram_oracle(n, edges, y, train, c, 0.6, 3), atol=1e-6)

    def test_leakage_on_cycle(self):
        g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
        labels = labelset([0, 1, 0, 1], [0], 2)

        def self_mass(alpha):
            cfg = HistogramConfig(alpha=alpha, ell=10, mode="approximate")
            return approx_histograms(g, labels, cfg, normalize=False)[0].sum()

        assert self_mass(0.9) > 0
        masses = [self_mass(a) for a in (0.05, 0.1, 0.3, 0.6, 0.9)]
        assert np.all(np.diff(masses) > 0)
        # relative to the distance-0 weight of 1 the exact method assigns
        assert self_mass(0.1) < 0.05


class TestExactApproxAgreement:
    def test_disjoint_paths(self):
        # three paths, each labeled at one endpoint with a single class
        edges, y, train, start = [], [], [], 0
        for length, cls in [(4, 0), (3, 1), (5, 2)]:
            edges += [(start + k, start + k + 1) for k in range(length - 1)]
            y += [cls] * length
            train.append(start)
            start += length
        g = build_graph(edges, start)
        labels = labelset(y, train, 3)
        for ell in (2, 3, 6):
            ex = exact_histograms(g, labels, HistogramConfig(alpha=0.5, ell=ell))
            ap = approx_histograms(g, labels, HistogramConfig(alpha=0.5, ell=ell, mode="approximate"))
            np.testing.assert_allclose(ex, ap, atol=1e-6)

    def test_cycle_differs(self):
        g = build_graph([(i, (i + 1) % 6) for i in range(6)], 6)
        labels = labelset([0, 1, 0, 1, 0, 1], [0, 1], 2)
        ex = exact_histograms(g, labels, HistogramConfig(alpha=0.5, ell=3))
        ap = approx_histograms(g, labels, HistogramConfig(alpha=0.5, ell=3, mode="approximate"))
        assert not np.allclose(ex, ap)


class TestNormalization:
    @given(
        st.lists(st.lists(st.floats(0, 10), min_size=3, max_size=3), min_size=1, max_size=8),
        st.floats(0.01, 100),
    )
    @settings(max_examples=100, deadline=None)
    def test_rows_and_scaling(self, rows, c):
        h = np.array(rows)
        out = normalize_rows(h)
        s = out.sum(axis=1)
        assert np.all(out >= 0)
        assert np.all((np.abs(s - 1) < 1e-6) | (s == 0))
        np.testing.assert_allclose(normalize_rows(h * c), out, atol=1e-9)


class TestConcat:
    def test_shape_and_roundtrip(self):
        x = np.arange(6.0).reshape(3, 2)
        h = np.array([[1, 0], [0.5, 0.5], [0, 0]])
        out = concat_features(x, h)
        assert out.shape == (3, 4)
        np.testing.assert_array_equal(out[:, :2], x)
        np.testing.assert_array_equal(out[:, 2:], h)

    def test_zero_histograms_pad(self):
        x = np.ones((2, 3))
        out = concat_features(x, np.zeros((2, 4)))
        np.testing.assert_array_equal(out, np.hstack([x, np.zeros((2, 4))]))

    def test_row_mismatch(self):
        with pytest.raises(ValueError, match="3 rows"):
            concat_features(np.ones((3, 2)), np.ones((2, 2)))


class TestTransformer:
    def test_fit_transform(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        x = np.zeros((3, 2))
        out = LabelHistogramTransformer(graph=g, alpha=0.5, ell=2).fit_transform(x, [0, -1, -1])
        assert out.shape == (3, 3)
        np.testing.assert_allclose(out[:, 2], 1.0)

    def test_get_params(self):
        t = LabelHistogramTransformer(alpha=0.3, ell=4, mode="approximate")
        assert t.get_params() == {"graph": None, "alpha": 0.3, "ell": 4, "mode": "approximate"}

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            LabelHistogramTransformer().transform(np.zeros((2, 2)))
