"""Dataset loaders, splits, and the two synthetic generators."""

import math

import numpy as np
import pytest

from gsagcn.data import (
    NodeDataset,
    SynthConfig,
    gen_feature_sbm,
    gen_graph_classification,
    load_node_dataset,
    load_planetoid,
    make_full_split,
    make_semi_split,
    row_normalize,
    save_node_dataset,
)
from gsagcn.exceptions import ParameterError
from gsagcn.gnn import uniform_spec
from gsagcn.graph import Graph
from gsagcn.train import TrainConfig, train_graph_classifier


# ---------------------------------------------------------------- splits

def block_labels(num_classes, per_class):
    return np.repeat(np.arange(num_classes), per_class)


def test_semi_split_sizes_classic_shape():
    labels = block_labels(7, 250)
    train, val, test = make_semi_split(labels)
    assert int(train.sum()) == 140          # 7 classes x 20 nodes
    assert int(val.sum()) == 500
    assert int(test.sum()) == 1000
    assert not np.any(train & val) and not np.any(train & test)
    assert not np.any(val & test)
    for c in range(7):
        assert int(train[labels == c].sum()) == 20


def test_semi_split_seed_zero_is_id_order():
    labels = block_labels(3, 600)
    train, val, test = make_semi_split(labels)
    expected_train = np.concatenate([np.arange(c * 600, c * 600 + 20)
                                     for c in range(3)])
    assert np.array_equal(np.flatnonzero(train), expected_train)
    pool = np.flatnonzero(~train)
    assert np.array_equal(np.flatnonzero(val), pool[:500])
    assert np.array_equal(np.flatnonzero(test), pool[500:1500])


def test_semi_split_other_seeds_permute_but_keep_counts():
    labels = block_labels(4, 500)
    base = make_semi_split(labels)
    seen_different = False
    for seed in range(1, 11):
        train, val, test = make_semi_split(labels, seed=seed)
        assert int(train.sum()) == 80
        assert int(val.sum()) == 500 and int(test.sum()) == 1000
        assert not np.any(train & val) and not np.any(train & test)
        for c in range(4):
            assert int(train[labels == c].sum()) == 20
        if not np.array_equal(train, base[0]):
            seen_different = True
    assert seen_different


def test_semi_split_shortage_errors():
    with pytest.raises(ParameterError):
        make_semi_split(block_labels(2, 10))          # <20 per class
    with pytest.raises(ParameterError):
        make_semi_split(block_labels(2, 100))         # pool < 1500


def test_full_split_sizes_on_ten_nodes():
    labels = block_labels(2, 5)
    train, val, test = make_full_split(labels)
    assert (int(train.sum()), int(val.sum()), int(test.sum())) == (6, 2, 2)
    for c in range(2):
        assert int(train[labels == c].sum()) == 3


def test_full_split_stratified_and_deterministic():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 3, size=200)
    a = make_full_split(labels, seed=5)
    b = make_full_split(labels, seed=5)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    train, val, test = a
    assert not np.any(train & val) and not np.any(val & test)
    assert np.all(train | val | test)
    for c in range(3):
        members = labels == c
        n_c = int(members.sum())
        assert abs(int(train[members].sum()) - round(0.6 * n_c)) <= 1
        assert abs(int(val[members].sum()) - round(0.2 * n_c)) <= 1
    other = make_full_split(labels, seed=6)
    assert not np.array_equal(other[0], train)


def test_full_split_validation():
    labels = block_labels(2, 5)
    with pytest.raises(ParameterError):
        make_full_split(labels, train_frac=0.0)
    with pytest.raises(ParameterError):
        make_full_split(labels, train_frac=0.8, val_frac=0.3)
    with pytest.raises(ParameterError):
        make_full_split(np.array([0, 0, 0, 1, 1]))    # class 1 too small


# ---------------------------------------------------------------- sbm

def count_edges_by_side(ds):
    intra = sum(1 for i, j in ds.graph.edges if ds.labels[i] == ds.labels[j])
    return intra, len(ds.graph.edges) - intra


def test_sbm_edge_counts_match_binomial_rates():
    n, k, p_in, p_out = 60, 2, 0.3, 0.05
    per = n // k
    pairs_in = k * per * (per - 1) // 2
    pairs_out = per * per
    tot_in = tot_out = 0
    for seed in range(20):
        cfg = SynthConfig(n=n, num_classes=k, p_in=p_in, p_out=p_out,
                          feature_dim=3, feature_noise=0.1, seed=seed)
        intra, cross = count_edges_by_side(gen_feature_sbm(cfg))
        tot_in += intra
        tot_out += cross
    for total, pairs, p in ((tot_in, pairs_in, p_in), (tot_out, pairs_out, p_out)):
        mean = 20 * pairs * p
        sigma = math.sqrt(20 * pairs * p * (1 - p))
        assert abs(total - mean) <= 3 * sigma


def test_sbm_degenerate_parameters_give_cliques():
    cfg = SynthConfig(n=12, num_classes=3, p_in=1.0, p_out=0.0,
                      feature_dim=4, feature_noise=0.0, seed=9)
    ds = gen_feature_sbm(cfg)
    per = 4
    assert len(ds.graph.edges) == 3 * per * (per - 1) // 2
    for i, j in ds.graph.edges:
        assert ds.labels[i] == ds.labels[j]
    for c in range(3):
        rows = ds.x[ds.labels == c]
        assert np.array_equal(rows, np.tile(rows[0], (per, 1)))


def test_sbm_labels_balanced_within_one():
    cfg = SynthConfig(n=100, num_classes=7, p_in=0.1, p_out=0.01,
                      feature_dim=2, feature_noise=1.0, seed=1)
    ds = gen_feature_sbm(cfg)
    counts = np.bincount(ds.labels, minlength=7)
    assert counts.max() - counts.min() <= 1
    assert ds.num_classes == 7


def test_sbm_cross_class_boost_adds_cross_edges_only():
    base = dict(n=80, num_classes=2, p_in=0.2, p_out=0.0,
                feature_dim=3, feature_noise=0.5, seed=4)
    plain = gen_feature_sbm(SynthConfig(**base))
    boosted = gen_feature_sbm(
        SynthConfig(**base, cross_class_edge_boost=0.3)
    )
    intra_p, cross_p = count_edges_by_side(plain)
    intra_b, cross_b = count_edges_by_side(boosted)
    assert cross_p == 0
    assert cross_b > 0
    assert intra_b == intra_p      # same seed, same intra draws
    pairs_out = 40 * 40
    sigma = math.sqrt(pairs_out * 0.3 * 0.7)
    assert abs(cross_b - pairs_out * 0.3) <= 3 * sigma


# ---------------------------------------------------------------- graph corpus

def test_graph_corpus_topologies_and_labels():
    cfg = SynthConfig(n=20, num_classes=4, p_in=0.0, p_out=0.0,
                      feature_dim=3, feature_noise=0.2, seed=2)
    ds = gen_graph_classification(cfg)
    assert len(ds.items) == 20
    path3 = {(0, 1), (1, 2)}
    star3 = {(0, 1), (0, 2)}
    tri = {(0, 1), (0, 2), (1, 2)}
    expected = [path3, star3, tri, tri]
    for t, item in enumerate(ds.items):
        assert item.label == t % 4
        assert item.graph.n == 3
        assert set(item.graph.edges) == expected[item.label]


def test_graph_corpus_split_is_stratified_and_complete():
    cfg = SynthConfig(n=40, num_classes=2, p_in=0.0, p_out=0.0,
                      feature_dim=3, feature_noise=0.2, seed=2)
    ds = gen_graph_classification(cfg)
    all_idx = np.concatenate([ds.train_idx, ds.val_idx, ds.test_idx])
    assert sorted(all_idx.tolist()) == list(range(40))
    labels = np.array([it.label for it in ds.items])
    for c in range(2):
        assert int((labels[ds.train_idx] == c).sum()) == 12
        assert int((labels[ds.val_idx] == c).sum()) == 4


def test_graph_corpus_needs_five_per_class():
    with pytest.raises(ParameterError):
        gen_graph_classification(
            SynthConfig(n=9, num_classes=2, p_in=0.0, p_out=0.0,
                        feature_dim=3, feature_noise=0.2)
        )


def test_noise_free_corpus_is_easy_for_a_small_gcn():
    cfg = SynthConfig(n=40, num_classes=2, p_in=0.0, p_out=0.0,
                      feature_dim=5, feature_noise=0.0, seed=0)
    ds = gen_graph_classification(cfg)
    spec = uniform_spec(5, 8, 2, dropout_rate=0.0)
    tc = TrainConfig(epochs=30, patience=0, dropout=0.0, batch_size=8)
    _, records = train_graph_classifier(spec, ds, tc)
    assert records[-1].test_acc > 0.9


# ---------------------------------------------------------------- round trip

def masked_dataset():
    cfg = SynthConfig(n=30, num_classes=3, p_in=0.4, p_out=0.05,
                      feature_dim=4, feature_noise=0.7, seed=6)
    ds = gen_feature_sbm(cfg)
    return ds.with_split(*make_full_split(ds.labels, seed=6))


def test_save_load_round_trip_is_lossless(tmp_path):
    ds = masked_dataset()
    save_node_dataset(ds, tmp_path / "out")
    back = load_node_dataset(tmp_path / "out")
    assert back.graph.n == ds.graph.n
    assert back.graph.edges == ds.graph.edges
    assert np.array_equal(back.x, ds.x)           # 17g survives exactly
    assert np.array_equal(back.labels, ds.labels)
    assert back.num_classes == ds.num_classes
    for name in ("train_mask", "val_mask", "test_mask"):
        assert np.array_equal(getattr(back, name), getattr(ds, name))


def test_save_load_without_masks(tmp_path):
    cfg = SynthConfig(n=10, num_classes=2, p_in=0.5, p_out=0.1,
                      feature_dim=2, feature_noise=0.3, seed=3)
    ds = gen_feature_sbm(cfg)
    save_node_dataset(ds, tmp_path / "bare")
    assert not (tmp_path / "bare" / "masks.csv").exists()
    back = load_node_dataset(tmp_path / "bare")
    assert back.train_mask is None and back.test_mask is None


def test_load_rejects_out_of_order_rows(tmp_path):
    ds = masked_dataset()
    save_node_dataset(ds, tmp_path / "d")
    path = tmp_path / "d" / "features.csv"
    lines = path.read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParameterError):
        load_node_dataset(tmp_path / "d")


# ---------------------------------------------------------------- planetoid

def write_planetoid(tmp_path, content_rows, cite_rows):
    content = tmp_path / "toy.content"
    cites = tmp_path / "toy.cites"
    content.write_text("".join(r + "\n" for r in content_rows))
    cites.write_text("".join(r + "\n" for r in cite_rows))
    return content, cites


BASE_CONTENT = [
    "paperA\t1\t0\t1\tml",
    "paperB\t0\t1\t0\tdb",
    "paperC\t1\t1\t0\tml",
    "paperD\t0\t0\t1\ttheory",
]


def test_planetoid_basic_load(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT,
        ["paperA paperB", "paperB paperC", "paperC paperA"],
    )
    ds = load_planetoid(content, cites)
    assert ds.graph.n == 4 and ds.feature_dim == 3
    # label ids follow first appearance in the file
    assert ds.labels.tolist() == [0, 1, 0, 2]
    assert ds.num_classes == 3
    assert ds.graph.edges == ((0, 1), (0, 2), (1, 2))
    assert np.array_equal(ds.x[0], [1.0, 0.0, 1.0])
    assert ds.cites_skipped == 0


def test_planetoid_skips_unknown_and_self_cites(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT,
        [
            "paperA paperB",
            "paperA ghost",        # unknown target: counted
            "phantom paperC",      # unknown source: counted
            "paperB paperB",       # self-cite: dropped silently
            "onefield",            # malformed: ignored
            "a b c",               # malformed: ignored
        ],
    )
    ds = load_planetoid(content, cites)
    assert ds.graph.edges == ((0, 1),)
    assert ds.cites_skipped == 2


def test_planetoid_duplicate_edges_collapse(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT,
        ["paperA paperB", "paperB paperA", "paperA paperB"],
    )
    ds = load_planetoid(content, cites)
    assert ds.graph.edges == ((0, 1),)


def test_planetoid_line_order_only_permutes_node_ids(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT, ["paperA paperC", "paperB paperD"]
    )
    ds = load_planetoid(content, cites)
    shuffled = [BASE_CONTENT[i] for i in (2, 0, 3, 1)]
    sub = tmp_path / "again"
    sub.mkdir()
    content2, cites2 = write_planetoid(
        sub, shuffled, ["paperA paperC", "paperB paperD"]
    )
    ds2 = load_planetoid(content2, cites2)
    # same multiset of (degree, label, feature row) per paper
    def summary(d):
        degs = np.zeros(d.graph.n, dtype=int)
        for i, j in d.graph.edges:
            degs[i] += 1
            degs[j] += 1
        return sorted(
            (int(deg), tuple(row)) for deg, row in zip(degs, d.x)
        )
    assert summary(ds) == summary(ds2)


def test_planetoid_content_errors_carry_line_numbers(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT + ["paperA\t0\t0\t0\tml"], []
    )
    with pytest.raises(ParameterError, match=r":5: duplicate id"):
        load_planetoid(content, cites)

    bad = tmp_path / "ragged"
    bad.mkdir()
    content, cites = write_planetoid(
        bad, [BASE_CONTENT[0], "paperB\t0\t1\tdb"], []
    )
    with pytest.raises(ParameterError, match=r":2: ragged feature row"):
        load_planetoid(content, cites)

    bad2 = tmp_path / "short"
    bad2.mkdir()
    content, cites = write_planetoid(bad2, ["paperA\tml"], [])
    with pytest.raises(ParameterError, match=r":1: too few columns"):
        load_planetoid(content, cites)


def test_planetoid_optional_row_normalization(tmp_path):
    content, cites = write_planetoid(
        tmp_path, BASE_CONTENT, ["paperA paperB"]
    )
    raw = load_planetoid(content, cites)
    normed = load_planetoid(content, cites, row_normalize_features=True)
    assert np.array_equal(raw.x[0], [1.0, 0.0, 1.0])
    assert np.allclose(normed.x.sum(axis=1), 1.0)


def test_row_normalize_keeps_zero_rows():
    x = np.array([[2.0, 2.0], [0.0, 0.0], [1.0, 3.0]])
    out = row_normalize(x)
    assert np.allclose(out[0], [0.5, 0.5])
    assert np.array_equal(out[1], [0.0, 0.0])
    assert np.allclose(out[2], [0.25, 0.75])


# ---------------------------------------------------------------- container

def test_node_dataset_validates_masks():
    g = Graph.from_edges(3, [(0, 1)])
    x = np.zeros((3, 2))
    labels = np.array([0, 1, 0], dtype=np.int64)
    overlap = np.array([True, True, False])
    with pytest.raises(ParameterError):
        NodeDataset(graph=g, x=x, labels=labels, num_classes=2,
                    train_mask=overlap, val_mask=overlap)
    with pytest.raises(ParameterError):
        NodeDataset(graph=g, x=x, labels=np.array([0, 2, 0]), num_classes=2)
