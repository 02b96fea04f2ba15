"""Datasets: citation-graph loading, splits, and synthetic generators.

The citation loader reads the two-file text format used by the common
citation benchmarks: a ``.content`` file of ``id<TAB>features...<TAB>label``
rows and a ``.cites`` file of ``cited<TAB>citing`` pairs.  Node order is
the order of first appearance in the content file, label ids are
assigned by first appearance, and citations mentioning unknown ids are
skipped but counted, never invented.

Synthetic data comes in two flavors: a feature-decorated stochastic
block model for node tasks (with an optional cross-class edge boost to
provoke overfitting along spurious edges) and a small-graph corpus for
graph classification built from four topologies crossed with class
prototypes.  Both are exactly reproducible from their config.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from ._seeding import STREAM_SAMPLING, STREAM_SPLITS, substream
from .exceptions import ParameterError, ShapeError
from .graph import Graph, read_edge_list, write_edge_list
from .numkernel import Mat


@dataclass(frozen=True)
class NodeDataset:
    """One graph with per-node features, labels, and optional masks."""

    graph: Graph
    x: Mat
    labels: np.ndarray
    num_classes: int
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None
    cites_skipped: int = 0

    def __post_init__(self):
        n = self.graph.n
        if self.x.shape[0] != n or self.labels.shape != (n,):
            raise ShapeError("features and labels must cover every node")
        if self.num_classes < 1:
            raise ParameterError("num_classes must be positive")
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise ParameterError("labels out of range")
        masks = [self.train_mask, self.val_mask, self.test_mask]
        present = [m for m in masks if m is not None]
        for m in present:
            if m.shape != (n,) or m.dtype != np.bool_:
                raise ShapeError("masks must be boolean vectors over nodes")
        for i in range(len(present)):
            for j in range(i + 1, len(present)):
                if np.any(present[i] & present[j]):
                    raise ParameterError("masks must be pairwise disjoint")

    @property
    def feature_dim(self) -> int:
        return self.x.shape[1]

    def with_split(
        self, train: np.ndarray, val: np.ndarray, test: np.ndarray
    ) -> "NodeDataset":
        return replace(self, train_mask=train, val_mask=val, test_mask=test)


@dataclass(frozen=True)
class GraphItem:
    graph: Graph
    x: Mat
    label: int


@dataclass(frozen=True)
class GraphDataset:
    """A corpus of small labeled graphs with index-based splits."""

    items: tuple[GraphItem, ...]
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    num_classes: int

    def __post_init__(self):
        count = len(self.items)
        seen = set()
        for idx in (self.train_idx, self.val_idx, self.test_idx):
            for i in idx:
                if not 0 <= i < count:
                    raise ParameterError("split index out of range")
                if int(i) in seen:
                    raise ParameterError("split indices must be disjoint")
                seen.add(int(i))
        widths = {item.x.shape[1] for item in self.items}
        if len(widths) > 1:
            raise ShapeError("items must share one feature width")
        for item in self.items:
            if item.graph.n < 1:
                raise ParameterError("every graph must be nonempty")
            if not 0 <= item.label < self.num_classes:
                raise ParameterError("item label out of range")
            if item.x.shape[0] != item.graph.n:
                raise ShapeError("item features must cover its nodes")

    @property
    def feature_dim(self) -> int:
        return self.items[0].x.shape[1]


@dataclass(frozen=True)
class SynthConfig:
    """Knobs shared by both synthetic generators.

    ``p_in``/``p_out``/``cross_class_edge_boost`` only affect the block
    model; the graph-corpus generator ignores them.  The boost is added
    to the cross-class edge probability to densify exactly the edges a
    homophily-based model should not trust.
    """

    n: int
    num_classes: int
    p_in: float
    p_out: float
    feature_dim: int
    feature_noise: float
    cross_class_edge_boost: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.num_classes < 2 or self.n < self.num_classes:
            raise ParameterError("need n >= num_classes >= 2")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")
        if self.cross_class_edge_boost < 0:
            raise ParameterError("cross_class_edge_boost must be non-negative")
        if self.feature_dim < 1:
            raise ParameterError("feature_dim must be positive")
        if self.feature_noise < 0:
            raise ParameterError("feature_noise must be non-negative")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")


def row_normalize(x: Mat) -> Mat:
    """Scale each row to unit sum; all-zero rows pass through unchanged."""
    sums = x.sum(axis=1, keepdims=True)
    safe = np.where(sums == 0.0, 1.0, sums)
    return x / safe


def load_planetoid(
    content_path, cites_path, row_normalize_features: bool = False
) -> NodeDataset:
    """Load a citation dataset from ``.content`` and ``.cites`` files.

    Features stay as the raw 0/1 bag-of-words rows by default; pass
    ``row_normalize_features=True`` for the unit-row-sum variant some
    reference setups use.  Returns the full graph; split masks are
    assigned separately.
    """
    ids: dict[str, int] = {}
    rows: list[np.ndarray] = []
    label_ids: dict[str, int] = {}
    labels: list[int] = []
    width = None
    with open(content_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise ParameterError(f"{content_path}:{lineno}: too few columns")
            node_id, feats, label = parts[0], parts[1:-1], parts[-1]
            if node_id in ids:
                raise ParameterError(f"{content_path}:{lineno}: duplicate id {node_id}")
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise ParameterError(f"{content_path}:{lineno}: ragged feature row")
            ids[node_id] = len(rows)
            rows.append(np.array([float(v) for v in feats]))
            labels.append(label_ids.setdefault(label, len(label_ids)))

    skipped = 0
    pairs = []
    with open(cites_path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a not in ids or b not in ids:
                skipped += 1
                continue
            if a != b:
                pairs.append((ids[a], ids[b]))

    x = np.vstack(rows)
    if row_normalize_features:
        x = row_normalize(x)
    return NodeDataset(
        graph=Graph.from_edges(len(rows), pairs),
        x=x,
        labels=np.array(labels, dtype=np.int64),
        num_classes=len(label_ids),
        cites_skipped=skipped,
    )


def make_semi_split(
    labels: np.ndarray,
    per_class: int = 20,
    val_size: int = 500,
    test_size: int = 1000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Few-label split: ``per_class`` train nodes, then val/test pools.

    Seed 0 reproduces the deterministic node-id-order selection (first
    ``per_class`` ids of each class; validation and test are the next
    blocks of the remaining ids).  Any other seed samples the same
    sizes uniformly per class.
    """
    n = len(labels)
    num_classes = int(labels.max()) + 1 if n else 0
    if per_class < 1 or val_size < 1 or test_size < 1:
        raise ParameterError("split sizes must be positive")
    rng = substream(seed, STREAM_SPLITS) if seed != 0 else None
    train = np.zeros(n, dtype=bool)
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if len(members) < per_class:
            raise ParameterError(f"class {c} has fewer than {per_class} nodes")
        if rng is not None:
            members = rng.permutation(members)
        train[members[:per_class]] = True
    pool = np.flatnonzero(~train)
    if len(pool) < val_size + test_size:
        raise ParameterError("not enough nodes left for val and test")
    if rng is not None:
        pool = rng.permutation(pool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[pool[:val_size]] = True
    test[pool[val_size:val_size + test_size]] = True
    return train, val, test


def make_full_split(
    labels: np.ndarray,
    train_frac: float = 0.6,
    val_frac: float = 0.2,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified fractional split; the remainder of each class is test."""
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac >= 1:
        raise ParameterError("need 0 < train_frac, 0 <= val_frac, sum < 1")
    n = len(labels)
    num_classes = int(labels.max()) + 1 if n else 0
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if len(members) < 3:
            raise ParameterError(f"class {c} is too small to split three ways")
        members = substream(seed, STREAM_SPLITS, c).permutation(members)
        n_tr = max(1, int(round(train_frac * len(members))))
        n_va = max(1, int(round(val_frac * len(members))))
        n_tr = min(n_tr, len(members) - 2)
        n_va = min(n_va, len(members) - n_tr - 1)
        train[members[:n_tr]] = True
        val[members[n_tr:n_tr + n_va]] = True
        test[members[n_tr + n_va:]] = True
    return train, val, test


def gen_feature_sbm(cfg: SynthConfig) -> NodeDataset:
    """Stochastic block model with class-prototype features.

    Node i belongs to class ``i * k // n`` (balanced within one).  Each
    unordered pair draws an edge with probability ``p_in`` inside a
    class and ``min(1, p_out + cross_class_edge_boost)`` across.
    Features are the class prototype plus Gaussian noise, so zero noise
    collapses every class onto one point.
    """
    n, k = cfg.n, cfg.num_classes
    labels = (np.arange(n) * k) // n
    p_cross = min(1.0, cfg.p_out + cfg.cross_class_edge_boost)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, cfg.p_in, p_cross)
    draws = substream(cfg.seed, STREAM_SAMPLING, 1).random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    chosen = draws[iu, ju] < prob[iu, ju]
    edges = list(zip(iu[chosen].tolist(), ju[chosen].tolist()))

    protos = substream(cfg.seed, STREAM_SAMPLING, 2).standard_normal(
        (k, cfg.feature_dim)
    )
    noise = substream(cfg.seed, STREAM_SAMPLING, 3).standard_normal(
        (n, cfg.feature_dim)
    )
    x = protos[labels] + cfg.feature_noise * noise
    return NodeDataset(
        graph=Graph.from_edges(n, edges),
        x=x,
        labels=labels.astype(np.int64),
        num_classes=k,
    )


def _path_edges(size: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(size - 1)]


def _star_edges(size: int) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, size)]


def _cycle_edges(size: int) -> list[tuple[int, int]]:
    return _path_edges(size) + [(0, size - 1)]


def _clique_edges(size: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(size) for j in range(i + 1, size)]


_TOPOLOGIES = (_path_edges, _star_edges, _cycle_edges, _clique_edges)


def gen_graph_classification(cfg: SynthConfig) -> GraphDataset:
    """Corpus of small graphs whose class fixes topology and prototype.

    Class c uses topology ``c mod 4`` (path, star, cycle, clique) at
    size ``3 + (c div 4) mod 6``, so sizes stay in [3, 8].  Item
    features are the class prototype plus per-node Gaussian noise.
    Items are assigned round-robin to classes and split 60/20/20
    stratified; every class needs at least five items.
    """
    n, k = cfg.n, cfg.num_classes
    if n < 5 * k:
        raise ParameterError("need at least five items per class to split")
    protos = substream(cfg.seed, STREAM_SAMPLING, 2).standard_normal(
        (k, cfg.feature_dim)
    )
    noise_rng = substream(cfg.seed, STREAM_SAMPLING, 3)
    items = []
    for t in range(n):
        c = t % k
        size = 3 + (c // 4) % 6
        g = Graph.from_edges(size, _TOPOLOGIES[c % 4](size))
        x = protos[c][None, :] + cfg.feature_noise * noise_rng.standard_normal(
            (size, cfg.feature_dim)
        )
        items.append(GraphItem(graph=g, x=x, label=c))

    labels = np.array([it.label for it in items])
    train_m, val_m, test_m = make_full_split(
        labels, train_frac=0.6, val_frac=0.2, seed=cfg.seed
    )
    return GraphDataset(
        items=tuple(items),
        train_idx=np.flatnonzero(train_m),
        val_idx=np.flatnonzero(val_m),
        test_idx=np.flatnonzero(test_m),
        num_classes=k,
    )


def save_node_dataset(ds: NodeDataset, dirpath) -> None:
    """Write edges.tsv, features.csv, and masks.csv.

    The features file carries one row per node: ``node_id,f1..fd,label``.
    Floats are written with 17 significant digits, which round-trips
    float64 exactly.  masks.csv is only written when all three masks
    are present.
    """
    import os

    os.makedirs(dirpath, exist_ok=True)
    write_edge_list(ds.graph, os.path.join(dirpath, "edges.tsv"))
    with open(os.path.join(dirpath, "features.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["node_id"] + [f"f{i + 1}" for i in range(ds.feature_dim)] + ["label"]
        )
        for node_id, (label, row) in enumerate(zip(ds.labels, ds.x)):
            writer.writerow(
                [node_id] + [f"{v:.17g}" for v in row] + [int(label)]
            )
    if all(
        m is not None for m in (ds.train_mask, ds.val_mask, ds.test_mask)
    ):
        with open(os.path.join(dirpath, "masks.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["train", "val", "test"])
            for t, v, te in zip(ds.train_mask, ds.val_mask, ds.test_mask):
                writer.writerow([int(t), int(v), int(te)])


def load_node_dataset(dirpath) -> NodeDataset:
    """Inverse of :func:`save_node_dataset`."""
    import os

    labels = []
    feats = []
    with open(os.path.join(dirpath, "features.csv"), newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            if int(row[0]) != len(labels):
                raise ParameterError("features.csv rows must be in node order")
            labels.append(int(row[-1]))
            feats.append([float(v) for v in row[1:-1]])
    n = len(labels)
    graph = read_edge_list(os.path.join(dirpath, "edges.tsv"), n=n)
    masks = {}
    masks_path = os.path.join(dirpath, "masks.csv")
    if os.path.exists(masks_path):
        cols = np.loadtxt(masks_path, delimiter=",", skiprows=1, dtype=np.int64)
        cols = cols.reshape(n, 3)
        masks = {
            "train_mask": cols[:, 0].astype(bool),
            "val_mask": cols[:, 1].astype(bool),
            "test_mask": cols[:, 2].astype(bool),
        }
    labels_arr = np.array(labels, dtype=np.int64)
    return NodeDataset(
        graph=graph,
        x=np.array(feats),
        labels=labels_arr,
        num_classes=int(labels_arr.max()) + 1 if n else 1,
        **masks,
    )
