"""Undirected graphs and their normalized operators.

A :class:`Graph` is an immutable edge list over ``n`` nodes; all dense
operators derived from it (normalized adjacency, complement, shifted
propagation matrix) live here, together with the deflated power
iteration that estimates the largest non-principal eigenvalue
magnitude of the normalized adjacency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import DisconnectedGraphError, ParameterError
from .numkernel import Mat


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph: ``n`` nodes, canonical sorted edge list.

    Edges are stored as (i, j) pairs with i < j, strictly increasing,
    no duplicates, no self-loops.  Use :meth:`from_edges` to build one
    from an arbitrary pair iterable.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 0:
            raise ParameterError("node count must be non-negative")
        prev = None
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ParameterError(f"edge ({i}, {j}) is not canonical for n={self.n}")
            if prev is not None and (i, j) <= prev:
                raise ParameterError("edges must be strictly sorted and unique")
            prev = (i, j)

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        """Canonicalize an arbitrary iterable of undirected pairs."""
        canon = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop ({i}, {i}) is not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ParameterError(f"edge ({i}, {j}) out of range for n={n}")
            canon.add((min(i, j), max(i, j)))
        return cls(n=n, edges=tuple(sorted(canon)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops.

    ``mat`` is D^{-1/2} (A + I) D^{-1/2} where D counts the self-loop,
    so every diagonal entry equals 1/degree(i) and the row for an
    isolated node is a single 1 on the diagonal.  ``degrees`` holds the
    self-loop-inclusive degrees.
    """

    mat: Mat
    degrees: np.ndarray


def adjacency(g: Graph) -> Mat:
    """Dense 0/1 adjacency matrix (no self-loops)."""
    a = np.zeros((g.n, g.n))
    for i, j in g.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    if g.n == 0:
        raise ParameterError("cannot normalize the empty graph")
    a = adjacency(g)
    a[np.diag_indices(g.n)] = 1.0
    deg = a.sum(axis=1)
    dinv_sqrt = 1.0 / np.sqrt(deg)
    mat = a * dinv_sqrt[:, None] * dinv_sqrt[None, :]
    return NormalizedAdjacency(mat=mat, degrees=deg.astype(np.int64))


def complement_adjacency(g: Graph, include_diagonal: bool = True) -> Mat:
    """Adjacency of the complement graph.

    Off-diagonal entries flip edge/non-edge.  The diagonal is 1 by
    default (a node is "not adjacent to itself" in the original simple
    graph); pass ``include_diagonal=False`` for the zero-diagonal
    reading.  Both appear in downstream regularizer analyses, so the
    choice is explicit here.
    """
    comp = np.ones((g.n, g.n)) - adjacency(g)
    if not include_diagonal:
        comp[np.diag_indices(g.n)] = 0.0
    return comp


def shifted_laplacian(g: Graph, eps: float) -> Mat:
    """(1 + eps) I + D^{-1/2} A D^{-1/2}, positive definite for eps > 0.

    D is the self-loop-inclusive degree used by
    :func:`normalize_adjacency`, so this equals the normalized
    adjacency with its diagonal 1/deg(i) entries replaced by 1 + eps.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive for positive definiteness")
    na = normalize_adjacency(g)
    mat = na.mat.copy()
    mat[np.diag_indices(g.n)] = 1.0 + eps
    return mat


def connected_components(g: Graph) -> list[list[int]]:
    """Node lists of connected components, each sorted, in discovery order."""
    adj = g.neighbors()
    seen = np.zeros(g.n, dtype=bool)
    comps: list[list[int]] = []
    for start in range(g.n):
        if seen[start]:
            continue
        queue = deque([start])
        seen[start] = True
        comp = []
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Largest component as a relabeled graph plus the kept node ids.

    Returns ``(sub, nodes)`` where ``nodes[new_id] = old_id``.  Ties on
    size go to the component containing the smallest node id.
    """
    comps = connected_components(g)
    if not comps:
        raise ParameterError("graph has no nodes")
    nodes = max(comps, key=len)
    index = {old: new for new, old in enumerate(nodes)}
    edges = [
        (index[i], index[j]) for i, j in g.edges if i in index and j in index
    ]
    return Graph.from_edges(len(nodes), edges), np.asarray(nodes, dtype=np.int64)


def is_connected(g: Graph) -> bool:
    return g.n <= 1 or len(connected_components(g)) == 1


def spectral_gap(
    na: NormalizedAdjacency, tol: float = 1e-13, max_iters: int = 50_000
) -> float:
    """Largest |eigenvalue| of the normalized adjacency below the principal one.

    The principal eigenvector e = D^{1/2} 1 (eigenvalue exactly 1) is
    deflated each step and the iteration runs on the squared operator,
    which makes the estimate insensitive to eigenvalue sign.  Requires
    a connected graph; disconnected inputs have a multiple eigenvalue 1
    and must be analysed per component.
    """
    if tol <= 0:
        raise ParameterError("tolerance must be positive")
    n = na.mat.shape[0]
    if not _mat_connected(na.mat):
        raise DisconnectedGraphError(
            "normalized adjacency is disconnected; "
            "extract a component and analyse components separately"
        )
    if n == 1:
        return 0.0

    e = np.sqrt(na.degrees.astype(np.float64))
    e /= np.linalg.norm(e)

    def deflate(v: np.ndarray) -> np.ndarray:
        return v - e * (e @ v)

    def run(v: np.ndarray) -> float:
        v = deflate(v)
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            return -1.0  # start vector lies in span(e); caller retries
        v /= nv
        est = 0.0
        for _ in range(max_iters):
            w = deflate(na.mat @ deflate(na.mat @ v))
            nw = np.linalg.norm(w)
            if nw < 1e-300:
                return 0.0  # operator annihilates the complement of e
            new_est = float(np.sqrt(nw))
            v = w / nw
            if abs(new_est - est) <= tol * max(new_est, 1e-300):
                return new_est
            est = new_est
        return est

    est = run(np.ones(n))
    rng = np.random.default_rng(0x5EED)
    if est < 0.0:
        est = run(rng.standard_normal(n))
        if est < 0.0:  # pragma: no cover - two random draws inside span(e)
            return 0.0
    # One perturbed restart in case the deterministic start was
    # orthogonal to the dominant deflated eigenvector.
    est_pert = run(rng.standard_normal(n))
    return float(max(est, est_pert))


def _mat_connected(mat: Mat) -> bool:
    n = mat.shape[0]
    if n <= 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.nonzero(mat[u])[0]:
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return bool(seen.all())


def write_edge_list(g: Graph, path) -> None:
    """One ``i<TAB>j`` line per edge, canonical order."""
    with open(path, "w", encoding="ascii") as fh:
        for i, j in g.edges:
            fh.write(f"{i}\t{j}\n")


def read_edge_list(path, n: int | None = None) -> Graph:
    """Read an ``i<TAB>j`` edge list.

    If ``n`` is omitted the node count is 1 + max id seen, which only
    round-trips graphs without trailing isolated nodes.
    """
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParameterError(f"{path}:{lineno}: expected 'i<TAB>j'")
            pairs.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=-1)
    return Graph.from_edges(n, pairs)
