import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsagcn.exceptions import (
    DisconnectedGraphError,
    ParameterError,
    ShapeError,
)
from gsagcn.graph import (
    Graph,
    adjacency,
    complement_adjacency,
    connected_components,
    is_connected,
    largest_connected_component,
    normalize_adjacency,
    read_edge_list,
    shifted_laplacian,
    spectral_gap,
    write_edge_list,
)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def random_connected_graph(n, p, seed):
    # A spanning path guarantees connectivity; extra edges are random.
    g = random_graph(n, p, seed)
    edges = set(g.edges) | {(i, i + 1) for i in range(n - 1)}
    return Graph.from_edges(n, edges)


def test_graph_rejects_bad_nodes_and_loops():
    with pytest.raises(ParameterError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(ParameterError):
        Graph.from_edges(2, [(1, 1)])


def test_graph_canonicalizes_edges():
    g = Graph.from_edges(3, [(2, 1), (1, 2), (0, 2)])
    assert g.edges == ((0, 2), (1, 2))
    assert g.num_edges == 2


def test_normalize_single_node():
    na = normalize_adjacency(Graph.from_edges(1, []))
    assert np.array_equal(na.mat, [[1.0]])
    assert na.degrees.tolist() == [1]


def test_normalize_single_edge():
    na = normalize_adjacency(Graph.from_edges(2, [(0, 1)]))
    assert np.allclose(na.mat, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_normalize_star_values():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    na = normalize_adjacency(g)
    # center degree 4 with self-loop, leaves degree 2
    assert na.mat[0, 0] == pytest.approx(0.25, abs=1e-15)
    for j in (1, 2, 3):
        assert na.mat[0, j] == pytest.approx(1.0 / (2.0 * np.sqrt(2.0)), abs=1e-15)
        assert na.mat[j, j] == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_normalize_diagonal_is_inverse_degree(n, seed):
    g = random_graph(n, 0.4, seed)
    na = normalize_adjacency(g)
    assert np.max(np.abs(na.mat - na.mat.T)) <= 1e-12
    for i in range(n):
        assert na.mat[i, i] == pytest.approx(1.0 / na.degrees[i], abs=1e-15)
    eigs = np.linalg.eigvalsh(na.mat)
    assert np.max(np.abs(eigs)) <= 1.0 + 1e-9


def test_normalize_principal_direction_residual():
    g = random_connected_graph(8, 0.3, 12)
    na = normalize_adjacency(g)
    e = np.sqrt(na.degrees.astype(float))
    e /= np.linalg.norm(e)
    assert np.linalg.norm(na.mat @ e - e) <= 1e-10


def test_complement_complete_graph_is_identity():
    g = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    assert np.array_equal(complement_adjacency(g), np.eye(3))


def test_complement_empty_graph_is_all_ones():
    g = Graph.from_edges(2, [])
    assert np.array_equal(complement_adjacency(g), np.ones((2, 2)))


def test_complement_path():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    expected = np.eye(3)
    expected[0, 2] = expected[2, 0] = 1.0
    assert np.array_equal(complement_adjacency(g), expected)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_complement_plus_adjacency_is_all_ones(n, seed):
    g = random_graph(n, 0.5, seed)
    ones = np.ones((n, n))
    assert np.array_equal(complement_adjacency(g) + adjacency(g), ones)
    without_diag = complement_adjacency(g, include_diagonal=False)
    assert np.array_equal(without_diag + adjacency(g) + np.eye(n), ones)


def test_shifted_laplacian_empty_graph():
    g = Graph.from_edges(3, [])
    assert np.array_equal(shifted_laplacian(g, 0.5), 1.5 * np.eye(3))


def test_shifted_laplacian_single_edge_values():
    g = Graph.from_edges(2, [(0, 1)])
    m = shifted_laplacian(g, 0.1)
    assert np.allclose(m, [[1.1, 0.5], [0.5, 1.1]], atol=1e-15)
    assert np.min(np.linalg.eigvalsh(m)) == pytest.approx(0.6, abs=1e-12)


def test_shifted_laplacian_rejects_bad_eps():
    with pytest.raises(ParameterError):
        shifted_laplacian(Graph.from_edges(2, [(0, 1)]), 0.0)


def test_shifted_laplacian_positive_definite_on_random_graphs():
    for seed in range(50):
        g = random_graph(1 + seed % 9, 0.5, seed)
        m = shifted_laplacian(g, 0.01)
        assert np.min(np.linalg.eigvalsh(m)) > 0.0


def test_spectral_gap_complete_triangle_is_zero():
    g = Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
    assert spectral_gap(normalize_adjacency(g)) <= 1e-10


def test_spectral_gap_single_edge_is_zero():
    g = Graph.from_edges(2, [(0, 1)])
    assert spectral_gap(normalize_adjacency(g)) <= 1e-10


def test_spectral_gap_path_matches_dense_oracle():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    na = normalize_adjacency(g)
    eigs = np.linalg.eigvalsh(na.mat)
    magnitudes = np.sort(np.abs(eigs))[::-1]
    assert magnitudes[0] == pytest.approx(1.0, abs=1e-12)
    assert spectral_gap(na) == pytest.approx(magnitudes[1], abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_spectral_gap_in_unit_interval(n, seed):
    na = normalize_adjacency(random_connected_graph(n, 0.3, seed))
    lam = spectral_gap(na)
    assert 0.0 <= lam < 1.0
    eigs = np.sort(np.abs(np.linalg.eigvalsh(na.mat)))[::-1]
    assert lam == pytest.approx(eigs[1] if n > 1 else 0.0, abs=1e-8)


def test_spectral_gap_rejects_disconnected():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedGraphError, match="component"):
        spectral_gap(normalize_adjacency(g))


def test_connected_components_and_largest():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)])
    comps = connected_components(g)
    assert [sorted(c) for c in comps] == [[0, 1, 2], [3, 4], [5]]
    assert not is_connected(g)
    sub, nodes = largest_connected_component(g)
    assert sub.n == 3
    assert nodes.tolist() == [0, 1, 2]
    assert sub.edges == ((0, 1), (1, 2))


def test_edge_list_round_trip(tmp_path):
    g = random_graph(7, 0.4, 99)
    path = tmp_path / "graph.tsv"
    write_edge_list(g, path)
    loaded = read_edge_list(path, n=7)
    assert loaded == g
    text = path.read_text()
    for line in text.splitlines():
        i, j = line.split("\t")
        assert int(i) < int(j)
