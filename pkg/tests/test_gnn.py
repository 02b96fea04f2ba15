import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsagcn.exceptions import ParameterError, ShapeError
from gsagcn.gnn import (
    GsaLayerParams,
    ModelSpec,
    attention_output,
    attention_scores,
    build_segment_mask,
    gcn_layer_forward,
    gsa_layer_forward,
    init_params,
    model_forward,
    sum_pool_readout,
    uniform_spec,
)
from gsagcn.graph import Graph, NormalizedAdjacency, normalize_adjacency
from gsagcn.numkernel import row_softmax

GLOROT_LIMIT = lambda fi, fo: np.sqrt(6.0 / (fi + fo))  # noqa: E731


def ring_na(n):
    return normalize_adjacency(Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)]))


def random_params(spec, seed, gamma):
    params = init_params(spec, seed)
    for p in params:
        p.gamma = gamma
    return params


def test_attention_scores_identity_rows():
    out = attention_scores(np.eye(2), np.eye(2), np.eye(2))
    assert np.array_equal(out, np.eye(2))


def test_attention_scores_binary_inner_products():
    h = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    out = attention_scores(h, np.eye(2), np.eye(2))
    assert np.array_equal(out, [[1, 0, 1], [0, 1, 0], [1, 0, 1]])


def test_attention_scores_matches_per_pair_oracle():
    rng = np.random.default_rng(1)
    h = rng.standard_normal((4, 3))
    wl = rng.standard_normal((3, 2))
    wr = rng.standard_normal((3, 2))
    out = attention_scores(h, wl, wr)
    for i in range(4):
        for j in range(4):
            expected = float(np.dot(h[i] @ wl, h[j] @ wr))
            assert abs(out[i, j] - expected) < 1e-12


def test_attention_scores_shape_error():
    with pytest.raises(ShapeError):
        attention_scores(np.ones((2, 3)), np.ones((4, 2)), np.ones((3, 2)))


def test_attention_output_identity_mask():
    rng = np.random.default_rng(2)
    h = rng.standard_normal((3, 4))
    wh = rng.standard_normal((4, 2))
    wg = rng.standard_normal((2, 4))
    assert np.allclose(attention_output(h, np.eye(3), wh, wg), h @ wh @ wg)


def test_attention_output_uniform_mask_averages():
    h = np.array([[0.0, 3.0], [2.0, 1.0], [4.0, 2.0]])
    mask = np.full((3, 3), 1.0 / 3.0)
    out = attention_output(h, mask, np.eye(2), np.eye(2))
    mean_row = h.mean(axis=0)
    assert np.allclose(out, np.tile(mean_row, (3, 1)), atol=1e-14)


def test_attention_output_matches_summation_oracle():
    rng = np.random.default_rng(3)
    n, d, da = 5, 3, 2
    h = rng.standard_normal((n, d))
    mask = row_softmax(rng.standard_normal((n, n)))
    wh = rng.standard_normal((d, da))
    wg = rng.standard_normal((da, d))
    out = attention_output(h, mask, wh, wg)
    for i in range(n):
        acc = np.zeros(da)
        for j in range(n):
            acc += mask[i, j] * (h[j] @ wh)
        assert np.max(np.abs(out[i] - acc @ wg)) < 1e-12


def test_gcn_layer_scalar_chain():
    na = NormalizedAdjacency(mat=np.array([[1.0]]), degrees=np.array([1]))
    out, _ = gcn_layer_forward(na, np.array([[2.0]]), np.array([[3.0]]), "identity")
    assert np.array_equal(out, [[6.0]])


def test_gcn_layer_relu_clamps():
    na = NormalizedAdjacency(mat=np.array([[1.0]]), degrees=np.array([1]))
    out, cache = gcn_layer_forward(
        na, np.array([[1.0, 1.0]]), np.array([[-1.0, 2.0], [0.0, 0.0]]), "relu"
    )
    assert np.array_equal(out, [[0.0, 2.0]])
    assert np.array_equal(cache.pre_activation, [[-1.0, 2.0]])


def test_gcn_layer_reproduces_normalized_adjacency():
    na = normalize_adjacency(Graph.from_edges(2, [(0, 1)]))
    out, _ = gcn_layer_forward(na, np.eye(2), np.eye(2), "identity")
    assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_gsa_layer_single_node_hand_value():
    na = NormalizedAdjacency(mat=np.array([[1.0]]), degrees=np.array([1]))
    one = np.array([[1.0]])
    p = GsaLayerParams(w=np.array([[3.0]]), wl=one, wr=one.copy(),
                       wh=one.copy(), wg=one.copy(), gamma=0.5)
    out, cache = gsa_layer_forward(na, np.array([[2.0]]), p, "identity")
    assert np.array_equal(cache.mask, [[1.0]])
    assert np.array_equal(cache.attn_out, [[2.0]])
    assert np.array_equal(out, [[9.0]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.integers(1, 5))
def test_gsa_layer_gamma_zero_is_bitwise_gcn(seed, n, d):
    rng = np.random.default_rng(seed)
    g = Graph.from_edges(
        n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.4]
    )
    na = normalize_adjacency(g)
    h = rng.standard_normal((n, d))
    d_out = int(rng.integers(1, 5))
    p = GsaLayerParams(
        w=rng.standard_normal((d, d_out)),
        wl=rng.standard_normal((d, 1)),
        wr=rng.standard_normal((d, 1)),
        wh=rng.standard_normal((d, 1)),
        wg=rng.standard_normal((1, d)),
        gamma=0.0,
    )
    gsa_out, _ = gsa_layer_forward(na, h, p, "relu")
    gcn_out, _ = gcn_layer_forward(na, h, p.w, "relu")
    assert np.array_equal(gsa_out, gcn_out)


def test_gsa_layer_uniform_rows_reduce_to_shift():
    # When all feature rows coincide and wh @ wg = I, attention returns
    # the shared row, so the layer is act((A_hat h + gamma h) w).
    na = ring_na(5)
    row = np.array([0.7, -0.3, 1.1])
    h = np.tile(row, (5, 1))
    rng = np.random.default_rng(9)
    p = GsaLayerParams(
        w=rng.standard_normal((3, 2)),
        wl=rng.standard_normal((3, 3)),
        wr=rng.standard_normal((3, 3)),
        wh=np.eye(3),
        wg=np.eye(3),
        gamma=0.8,
    )
    out, _ = gsa_layer_forward(na, h, p, "relu")
    expected = np.maximum((na.mat @ h + 0.8 * h) @ p.w, 0.0)
    assert np.allclose(out, expected, atol=1e-12)


def test_gsa_layer_masks_are_row_stochastic():
    rng = np.random.default_rng(4)
    na = ring_na(6)
    h = rng.standard_normal((6, 4))
    p = GsaLayerParams(
        w=rng.standard_normal((4, 3)),
        wl=rng.standard_normal((4, 2)),
        wr=rng.standard_normal((4, 2)),
        wh=rng.standard_normal((4, 2)),
        wg=rng.standard_normal((2, 4)),
        gamma=0.3,
    )
    _, cache = gsa_layer_forward(na, h, p, "relu")
    assert np.all(np.abs(cache.mask.sum(axis=1) - 1.0) <= 1e-12)


def test_gsa_layer_permutation_equivariance():
    rng = np.random.default_rng(5)
    n, d = 6, 4
    g = Graph.from_edges(n, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)])
    h = rng.standard_normal((n, d))
    p = GsaLayerParams(
        w=rng.standard_normal((d, 3)),
        wl=rng.standard_normal((d, 2)),
        wr=rng.standard_normal((d, 2)),
        wh=rng.standard_normal((d, 2)),
        wg=rng.standard_normal((2, d)),
        gamma=0.6,
    )
    out, _ = gsa_layer_forward(normalize_adjacency(g), h, p, "relu")

    perm = np.array([3, 1, 5, 0, 2, 4])
    relabeled = Graph.from_edges(n, [(perm[i], perm[j]) for i, j in g.edges])
    h_perm = np.empty_like(h)
    h_perm[perm] = h
    out_perm, _ = gsa_layer_forward(normalize_adjacency(relabeled), h_perm, p, "relu")
    assert np.allclose(out_perm[perm], out, atol=1e-12)


def test_attention_bypasses_adjacency():
    # No edges at all: A_hat = I, yet gamma > 0 must leak row j into row i.
    rng = np.random.default_rng(6)
    n, d = 4, 3
    na = normalize_adjacency(Graph.from_edges(n, []))
    assert np.array_equal(na.mat, np.eye(n))
    h = rng.standard_normal((n, d))
    p = GsaLayerParams(
        w=rng.standard_normal((d, d)),
        wl=rng.standard_normal((d, 1)),
        wr=rng.standard_normal((d, 1)),
        wh=rng.standard_normal((d, 1)),
        wg=rng.standard_normal((1, d)),
        gamma=0.9,
    )
    base, _ = gsa_layer_forward(na, h, p, "identity")
    bumped = h.copy()
    bumped[3] += 0.5
    moved, _ = gsa_layer_forward(na, bumped, p, "identity")
    assert np.max(np.abs(moved[0] - base[0])) > 1e-8


def test_sum_pool_singleton():
    h = np.array([[1.0, 2.0]])
    assert np.array_equal(sum_pool_readout(h, np.array([1])), h)


def test_sum_pool_two_graphs():
    out = sum_pool_readout(np.eye(3), np.array([2, 1]))
    assert np.array_equal(out, [[1, 1, 0], [0, 0, 1]])


def test_sum_pool_matches_loop_oracle():
    rng = np.random.default_rng(7)
    sizes = np.array([3, 1, 4])
    h = rng.standard_normal((8, 5))
    out = sum_pool_readout(h, sizes)
    start = 0
    for gi, size in enumerate(sizes):
        assert np.allclose(out[gi], h[start:start + size].sum(axis=0), atol=1e-14)
        start += size


def test_sum_pool_rejects_bad_partition():
    with pytest.raises(ShapeError):
        sum_pool_readout(np.eye(3), np.array([2, 2]))


def test_model_spec_validation():
    with pytest.raises(ParameterError):
        ModelSpec(layer_dims=(3, 2), attention=(False, True))
    with pytest.raises(ParameterError):
        ModelSpec(layer_dims=(3, 2), attention=(False,), activation="tanh")
    with pytest.raises(ParameterError):
        ModelSpec(layer_dims=(3, 2), attention=(False,), dropout_rate=1.0)
    with pytest.raises(ParameterError):
        ModelSpec(layer_dims=(3, 2), attention=(False,), attn_dim_divisor=0)
    spec = uniform_spec(16, 8, 3, num_layers=2, attention=True)
    assert spec.layer_dims == (16, 8, 3)
    assert spec.attn_dim(0) == 2 and spec.attn_dim(1) == 1


def test_init_params_glorot_range_and_shared_streams():
    spec_a = uniform_spec(10, 6, 3, attention=True)
    spec_p = uniform_spec(10, 6, 3, attention=False)
    pa = init_params(spec_a, 42)
    pp = init_params(spec_p, 42)
    for layer_a, layer_p, (fi, fo) in zip(pa, pp, [(10, 6), (6, 3)]):
        # attention on/off must not shift the main weight stream
        assert np.array_equal(layer_a.w, layer_p.w)
        limit = GLOROT_LIMIT(fi, fo)
        assert np.max(np.abs(layer_a.w)) <= limit
        assert layer_a.gamma == 0.0
    assert not np.array_equal(init_params(spec_a, 43)[0].w, pa[0].w)


def test_model_forward_composes_gcn_layers():
    rng = np.random.default_rng(8)
    na = ring_na(5)
    x = rng.standard_normal((5, 4))
    spec = uniform_spec(4, 6, 3, attention=False)
    params = init_params(spec, 0)
    logits, caches = model_forward(spec, params, na, x)
    h1, _ = gcn_layer_forward(na, x, params[0].w, "relu")
    h2, _ = gcn_layer_forward(na, h1, params[1].w, "identity")
    assert np.array_equal(logits, h2)
    assert len(caches.layers) == 2


def test_model_forward_final_layer_is_identity():
    na = ring_na(4)
    x = np.ones((4, 3))
    spec = uniform_spec(3, 5, 2, attention=False)
    params = init_params(spec, 1)
    params[0].w = np.ones((3, 5))   # keeps hidden strictly positive
    params[1].w = -np.ones((5, 2))  # drives logits strictly negative
    logits, _ = model_forward(spec, params, na, x)
    assert np.all(logits < 0.0)  # relu at the top would clamp these to 0


def test_model_forward_straight_line_oracle():
    # Five-node fixture evaluated in one straight line of numpy.
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
    rng = np.random.default_rng(21)
    x = rng.standard_normal((5, 3))
    spec = uniform_spec(3, 16, 2, attention=False)
    params = init_params(spec, 5)
    na = normalize_adjacency(g)
    expected = na.mat @ np.maximum(na.mat @ x @ params[0].w, 0.0) @ params[1].w
    logits, _ = model_forward(spec, params, na, x)
    assert np.allclose(logits, expected, atol=1e-12)


def test_model_forward_dropout_determinism_and_scaling():
    rng = np.random.default_rng(10)
    na = ring_na(6)
    x = rng.standard_normal((6, 8))
    spec = uniform_spec(8, 5, 2, attention=False, dropout_rate=0.5)
    params = init_params(spec, 2)
    a, _ = model_forward(spec, params, na, x, train_mode=True, dropout_rng=7)
    b, _ = model_forward(spec, params, na, x, train_mode=True, dropout_rng=7)
    c, _ = model_forward(spec, params, na, x, train_mode=True, dropout_rng=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    eval_out, _ = model_forward(spec, params, na, x)
    assert not np.array_equal(a, eval_out)
    _, caches = model_forward(spec, params, na, x, train_mode=True, dropout_rng=7)
    scale = caches.dropout_scales[0]
    kept = scale[scale > 0]
    assert np.allclose(kept, 2.0)  # 1 / (1 - 0.5)


def test_segment_mask_blocks():
    mask = build_segment_mask(np.array([2, 1]))
    assert np.array_equal(mask[:2, :2], np.zeros((2, 2)))
    assert mask[0, 2] == -np.inf and mask[2, 0] == -np.inf
    with pytest.raises(ShapeError):
        build_segment_mask(np.array([0, 2]))


def test_batched_attention_matches_separate_runs():
    rng = np.random.default_rng(11)
    g1 = Graph.from_edges(3, [(0, 1), (1, 2)])
    g2 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    x1 = rng.standard_normal((3, 4))
    x2 = rng.standard_normal((4, 4))
    spec = uniform_spec(4, 6, 2, attention=True, attn_dim_divisor=2)
    params = random_params(spec, 3, gamma=0.7)

    na1, na2 = normalize_adjacency(g1), normalize_adjacency(g2)
    out1, _ = model_forward(spec, params, na1, x1)
    out2, _ = model_forward(spec, params, na2, x2)

    mat = np.zeros((7, 7))
    mat[:3, :3] = na1.mat
    mat[3:, 3:] = na2.mat
    batch_na = NormalizedAdjacency(
        mat=mat, degrees=np.concatenate([na1.degrees, na2.degrees])
    )
    batch_x = np.vstack([x1, x2])
    score_mask = build_segment_mask(np.array([3, 4]))
    batch_out, caches = model_forward(
        spec, params, batch_na, batch_x, score_mask=score_mask
    )
    assert np.allclose(batch_out[:3], out1, atol=1e-12)
    assert np.allclose(batch_out[3:], out2, atol=1e-12)
    # masked attention entries are exactly zero, never just small
    for cache in caches.layers:
        assert np.all(cache.mask[:3, 3:] == 0.0)
        assert np.all(cache.mask[3:, :3] == 0.0)
