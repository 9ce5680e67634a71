import json
import struct

import numpy as np
import pytest

from cohop.data import (
    Dataset,
    SplitSpec,
    edge_homophily,
    generate_sbm,
    load_dataset,
    make_inductive_split,
    make_transductive_split,
    read_features,
    save_dataset,
    training_view,
    write_features,
)
from cohop.exceptions import (
    ConfigError,
    DataError,
    DimensionMismatchError,
    LabelRangeError,
    MalformedLineError,
    MissingFileError,
)
from cohop.graph import build_graph


def write_dir(root, edges="0\t1\n1\t2\n", labels="0\t0\n1\t1\n2\t0\n", x=None):
    root.mkdir(exist_ok=True)
    (root / "edges.tsv").write_text(edges)
    (root / "labels.tsv").write_text(labels)
    write_features(np.arange(6, dtype=np.float32).reshape(3, 2) if x is None else x, root / "features.bin")
    return root


def balanced(n_per_class, n_classes):
    y = np.repeat(np.arange(n_classes), n_per_class)
    return Dataset(build_graph([], len(y)), np.zeros((len(y), 1), np.float32), y, n_classes)


class TestLoad:
    def test_minimal(self, tmp_path):
        ds = load_dataset(write_dir(tmp_path / "d"))
        assert ds.n == 3 and ds.x.shape == (3, 2) and ds.n_classes == 2
        assert ds.graph.m == 2 and ds.split is None
        assert ds.x.dtype == np.float32

    def test_feature_row_mismatch(self, tmp_path):
        root = write_dir(tmp_path / "d", x=np.zeros((4, 2), np.float32))
        with pytest.raises(DimensionMismatchError, match="4.*3|3.*4"):
            load_dataset(root)

    def test_truncated_payload(self, tmp_path):
        root = write_dir(tmp_path / "d")
        raw = (root / "features.bin").read_bytes()
        (root / "features.bin").write_bytes(raw[:-4])
        with pytest.raises(DimensionMismatchError):
            load_dataset(root)

    def test_missing_file(self, tmp_path):
        root = write_dir(tmp_path / "d")
        (root / "edges.tsv").unlink()
        with pytest.raises(MissingFileError, match="edges.tsv"):
            load_dataset(root)

    def test_malformed_line(self, tmp_path):
        root = write_dir(tmp_path / "d", edges="0\t1\n1 2\n")
        with pytest.raises(MalformedLineError) as err:
            load_dataset(root)
        assert err.value.line == 2 and "edges.tsv" in str(err.value)

    def test_edge_out_of_range(self, tmp_path):
        root = write_dir(tmp_path / "d", edges="0\t1\n\n1\t7\n")
        with pytest.raises(DataError) as err:
            load_dataset(root)
        assert err.value.line == 3

    def test_negative_label(self, tmp_path):
        root = write_dir(tmp_path / "d", labels="0\t0\n1\t-2\n2\t0\n")
        with pytest.raises(LabelRangeError):
            load_dataset(root)

    def test_bad_magic(self, tmp_path):
        root = write_dir(tmp_path / "d")
        (root / "features.bin").write_bytes(b"NOPE!" + struct.pack("<II", 0, 0))
        with pytest.raises(DataError, match="magic"):
            load_dataset(root)

    def test_split_json(self, tmp_path):
        root = write_dir(tmp_path / "d")
        (root / "split.json").write_text(json.dumps({"train": [0], "val": [1], "unseen": [2]}))
        ds = load_dataset(root)
        assert ds.split.mode == "inductive"
        assert list(ds.split.test) == [2] and list(ds.split.unseen) == [2]

    def test_roundtrip_bit_identical(self, tmp_path):
        ds = generate_sbm(n=60, n_classes=3, p_in=0.2, p_out=0.02, feature_dim=5, seed=1)
        ds = Dataset(ds.graph, ds.x, ds.y, ds.n_classes, make_transductive_split(ds, 3, 4, seed=0))
        save_dataset(ds, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert back.x.tobytes() == ds.x.tobytes()
        np.testing.assert_array_equal(back.y, ds.y)
        np.testing.assert_array_equal(back.graph.neighbors, ds.graph.neighbors)
        np.testing.assert_array_equal(back.split.train, ds.split.train)
        np.testing.assert_array_equal(back.split.test, ds.split.test)

    def test_features_layout(self, tmp_path):
        x = np.array([[1.5, -2.0]], dtype=np.float32)
        write_features(x, tmp_path / "f")
        raw = (tmp_path / "f").read_bytes()
        assert raw == b"COHF1" + struct.pack("<II", 1, 2) + struct.pack("<2f", 1.5, -2.0)
        np.testing.assert_array_equal(read_features(tmp_path / "f"), x)


class TestTransductiveSplit:
    def test_counts(self):
        s = make_transductive_split(balanced(100, 3), seed=0)
        assert (len(s.train), len(s.val), len(s.test)) == (60, 90, 150)

    def test_cora_shaped(self):
        # seven classes, as in the 140 / 210 split used for Cora
        s = make_transductive_split(balanced(60, 7), seed=0)
        assert (len(s.train), len(s.val)) == (140, 210)

    def test_per_class_counts_and_disjoint(self):
        ds = balanced(80, 4)
        s = make_transductive_split(ds, seed=3)
        for c in range(4):
            assert np.sum(ds.y[s.train] == c) == 20
            assert np.sum(ds.y[s.val] == c) == 30
        parts = np.concatenate([s.train, s.val, s.test])
        assert len(parts) == ds.n and len(np.unique(parts)) == ds.n

    def test_seeded(self):
        ds = balanced(80, 4)
        a, b = make_transductive_split(ds, seed=7), make_transductive_split(ds, seed=7)
        np.testing.assert_array_equal(a.train, b.train)
        np.testing.assert_array_equal(a.val, b.val)
        c = make_transductive_split(ds, seed=8)
        assert not np.array_equal(a.train, c.train)

    def test_small_class_fallback(self):
        ds = balanced(25, 2)
        with pytest.warns(UserWarning, match="proportional"):
            s = make_transductive_split(ds, seed=0)
        assert len(s.train) == 20 and len(s.val) == 30

    @pytest.mark.filterwarnings("ignore:class 0 has")
    def test_empty_class(self):
        ds = Dataset(build_graph([], 4), np.zeros((4, 1), np.float32), np.array([0, 0, 2, 2]), 3)
        with pytest.raises(DataError, match="class 1"):
            make_transductive_split(ds)


class TestInductiveSplit:
    def base(self):
        ds = generate_sbm(n=300, n_classes=3, p_in=0.1, p_out=0.01, feature_dim=4, seed=0)
        return ds, make_transductive_split(ds, 10, 10, seed=0)

    def test_fraction(self):
        ds, base = self.base()
        base = SplitSpec("transductive", base.train, base.val, base.test[:100])
        s = make_inductive_split(ds, base, 0.2, seed=0)
        assert len(s.unseen) == 20 and len(s.seen) == 80

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
    def test_fraction_guard(self, frac):
        ds, base = self.base()
        with pytest.raises(ConfigError):
            make_inductive_split(ds, base, frac)

    def test_requires_transductive_base(self):
        ds, base = self.base()
        ind = make_inductive_split(ds, base, 0.2)
        with pytest.raises(ConfigError):
            make_inductive_split(ds, ind, 0.2)

    def test_partition_and_training_graph(self):
        ds, base = self.base()
        s = make_inductive_split(ds, base, 0.2, seed=1)
        assert set(s.seen) | set(s.unseen) == set(s.test)
        assert not set(s.seen) & set(s.unseen)
        g, x, labels, kept = training_view(ds, s)
        assert not np.isin(s.unseen, kept).any()
        assert g.n == ds.n - len(s.unseen)
        np.testing.assert_array_equal(x, ds.x[kept])
        # no training-graph edge touches an unseen node, and every surviving edge is a real one
        orig = {tuple(e) for e in ds.graph.edges()}
        for a, b in g.edges():
            assert (kept[a], kept[b]) in orig
        unseen = set(s.unseen.tolist())
        expected = sum(1 for u, v in orig if u not in unseen and v not in unseen)
        assert g.m == expected


class TestSbm:
    def test_no_inter_class_edges(self):
        ds = generate_sbm(n=200, n_classes=4, p_in=0.1, p_out=0.0, seed=0)
        e = ds.graph.edges()
        assert np.all(ds.y[e[:, 0]] == ds.y[e[:, 1]])

    def test_noiseless_features_separable(self):
        ds = generate_sbm(n=100, n_classes=4, noise_sigma=0.0, seed=0)
        # orthogonal class means: the argmax of the first C coordinates is the class
        np.testing.assert_array_equal(ds.x[:, :4].argmax(axis=1), ds.y)

    def test_homophily(self):
        ds = generate_sbm(n=1000, n_classes=4, p_in=0.05, p_out=0.005, seed=0)
        assert edge_homophily(ds.graph, ds.y) > 0.6

    def test_balanced_and_seeded(self):
        a = generate_sbm(n=101, n_classes=4, seed=5)
        b = generate_sbm(n=101, n_classes=4, seed=5)
        assert np.bincount(a.y).max() - np.bincount(a.y).min() <= 1
        assert a.x.tobytes() == b.x.tobytes()
        np.testing.assert_array_equal(a.graph.neighbors, b.graph.neighbors)

    @pytest.mark.parametrize("kw", [{"p_in": 0.01, "p_out": 0.01}, {"p_out": -0.1}, {"feature_dim": 2}])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            generate_sbm(n=50, n_classes=4, **kw)
