"""Graph-convolution layers, with and without global self-attention.

A plain layer computes ``act(A_hat @ h @ w)`` for the symmetrically
normalized self-loop adjacency ``A_hat``.  The attentive variant adds a
globally mixed term before the shared linear map:

    scores  s = (h wl) (h wr)^T          one logit per ordered node pair
    weights b = row_softmax(s)           row-stochastic, graph-oblivious
    output  o = (b (h wh)) wg            mixed features, back in input width
    layer   act((A_hat h + gamma * o) w)

``gamma`` interpolates between pure local aggregation (gamma = 0, in
which case the attentive layer is bit-identical to the plain one) and
attention-dominated mixing.  The attention term is deliberately *not*
multiplied by ``A_hat``: its entire point is to couple nodes that share
no edge.

All gradients are derived by hand in :func:`layer_backward` and checked
against central finite differences in the test-suite.  Batched graph
inputs isolate their members through an additive score mask of ``-inf``
across block boundaries, which survives softmax and backward exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._seeding import STREAM_DROPOUT, STREAM_INIT, substream
from .exceptions import ParameterError, ShapeError
from .graph import NormalizedAdjacency
from .numkernel import Mat, row_softmax

MATRIX_FIELDS = ("w", "wl", "wr", "wh", "wg")
ACTIVATIONS = ("relu", "identity")


@dataclass
class GsaLayerParams:
    """Trainable state of one layer.

    ``w`` is the output projection shared by both pathways; ``wl``,
    ``wr`` produce score queries/keys, ``wh`` the mixed values and
    ``wg`` lifts them back to the input width.  ``gamma`` is the
    non-negative interpolation weight (0 disables the attention term).
    Plain layers carry the same structure with the attention matrices
    simply unused, which keeps optimizer state uniform.
    """

    w: Mat
    wl: Mat
    wr: Mat
    wh: Mat
    wg: Mat
    gamma: float = 0.0

    def __post_init__(self):
        d_in, d_att = self.wl.shape
        if self.wr.shape != (d_in, d_att) or self.wh.shape != (d_in, d_att):
            raise ShapeError("wl, wr, wh must share shape (d_in, d_att)")
        if self.wg.shape != (d_att, d_in):
            raise ShapeError("wg must have shape (d_att, d_in)")
        if self.w.shape[0] != d_in:
            raise ShapeError("w rows must match the layer input width")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ParameterError("gamma must be finite and non-negative")

    @property
    def d_in(self) -> int:
        return self.w.shape[0]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]

    @property
    def d_att(self) -> int:
        return self.wl.shape[1]

    def copy(self) -> "GsaLayerParams":
        return GsaLayerParams(
            w=self.w.copy(), wl=self.wl.copy(), wr=self.wr.copy(),
            wh=self.wh.copy(), wg=self.wg.copy(), gamma=self.gamma,
        )

    def zeros_like(self) -> "GsaLayerParams":
        return GsaLayerParams(
            w=np.zeros_like(self.w), wl=np.zeros_like(self.wl),
            wr=np.zeros_like(self.wr), wh=np.zeros_like(self.wh),
            wg=np.zeros_like(self.wg), gamma=0.0,
        )


@dataclass
class LayerCache:
    """Forward intermediates needed for the exact backward pass."""

    h_in: Mat
    pre_activation: Mat
    na_mat: Mat
    activation: str
    attention: bool
    scores: Mat | None = None
    mask: Mat | None = None          # row-softmax of scores
    attn_out: Mat | None = None      # o, in input width
    ql: Mat | None = None
    qr: Mat | None = None
    hv: Mat | None = None
    mixed: Mat | None = None         # b @ hv
    attn_out_w: Mat | None = None    # o @ w, reused for the gamma gradient


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a layer stack.

    ``layer_dims`` has one entry per feature width, so the model has
    ``len(layer_dims) - 1`` layers; ``attention`` flags each layer.
    The final layer always emits raw logits (identity), ``activation``
    applies to every earlier layer.  Attention width per layer is
    ``max(1, d_in // attn_dim_divisor)``.
    """

    layer_dims: tuple[int, ...]
    attention: tuple[bool, ...]
    activation: str = "relu"
    dropout_rate: float = 0.0
    attn_dim_divisor: int = 8

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ParameterError("need at least input and output widths")
        if any(int(d) != d or d < 1 for d in self.layer_dims):
            raise ParameterError("layer widths must be positive integers")
        if len(self.attention) != self.num_layers:
            raise ParameterError(
                f"need {self.num_layers} attention flags, got {len(self.attention)}"
            )
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        if self.attn_dim_divisor < 1:
            raise ParameterError("attn_dim_divisor must be at least 1")

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    def attn_dim(self, layer: int) -> int:
        return max(1, self.layer_dims[layer] // self.attn_dim_divisor)


def uniform_spec(
    input_dim: int,
    hidden_dim: int,
    output_dim: int,
    num_layers: int = 2,
    attention: bool = False,
    activation: str = "relu",
    dropout_rate: float = 0.0,
    attn_dim_divisor: int = 8,
) -> ModelSpec:
    """Stack with one hidden width repeated ``num_layers - 1`` times."""
    if num_layers < 1:
        raise ParameterError("num_layers must be at least 1")
    dims = (input_dim,) + (hidden_dim,) * (num_layers - 1) + (output_dim,)
    return ModelSpec(
        layer_dims=dims,
        attention=(attention,) * num_layers,
        activation=activation,
        dropout_rate=dropout_rate,
        attn_dim_divisor=attn_dim_divisor,
    )


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> Mat:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: ModelSpec, seed: int) -> list[GsaLayerParams]:
    """Glorot-uniform parameters, gamma = 0.

    Each matrix draws from its own (seed, layer, slot) sub-stream, so
    two specs that agree on ``layer_dims`` get bit-identical shared
    weights regardless of their attention flags.
    """
    params = []
    for layer in range(spec.num_layers):
        d_in, d_out = spec.layer_dims[layer], spec.layer_dims[layer + 1]
        d_att = spec.attn_dim(layer)
        shapes = {
            "w": (d_in, d_out),
            "wl": (d_in, d_att),
            "wr": (d_in, d_att),
            "wh": (d_in, d_att),
            "wg": (d_att, d_in),
        }
        mats = {
            name: _glorot(substream(seed, STREAM_INIT, layer, slot), shp)
            for slot, (name, shp) in enumerate(shapes.items())
        }
        params.append(GsaLayerParams(gamma=0.0, **mats))
    return params


def _apply_activation(z: Mat, activation: str) -> Mat:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise ParameterError(f"unknown activation {activation!r}")


def attention_scores(h: Mat, wl: Mat, wr: Mat) -> Mat:
    """Pairwise score logits (h wl)(h wr)^T."""
    if h.shape[1] != wl.shape[0] or wl.shape != wr.shape:
        raise ShapeError("score projections must match the feature width")
    return (h @ wl) @ (h @ wr).T


def attention_output(h: Mat, mask: Mat, wh: Mat, wg: Mat) -> Mat:
    """Mixture output (mask (h wh)) wg for a row-stochastic mask."""
    n = h.shape[0]
    if mask.shape != (n, n):
        raise ShapeError("mask must be square over the node count")
    if h.shape[1] != wh.shape[0] or wh.shape[1] != wg.shape[0]:
        raise ShapeError("value/output projections do not chain")
    return (mask @ (h @ wh)) @ wg


def gcn_layer_forward(
    na: NormalizedAdjacency, h: Mat, w: Mat, activation: str = "relu"
) -> tuple[Mat, LayerCache]:
    """Plain convolution act(A_hat h w)."""
    if h.shape[0] != na.mat.shape[0]:
        raise ShapeError("feature rows must match the node count")
    if h.shape[1] != w.shape[0]:
        raise ShapeError(f"cannot project width {h.shape[1]} with {w.shape}")
    z = na.mat @ (h @ w)
    cache = LayerCache(
        h_in=h, pre_activation=z, na_mat=na.mat,
        activation=activation, attention=False,
    )
    return _apply_activation(z, activation), cache


def gsa_layer_forward(
    na: NormalizedAdjacency,
    h: Mat,
    p: GsaLayerParams,
    activation: str = "relu",
    score_mask: Mat | None = None,
) -> tuple[Mat, LayerCache]:
    """Attentive convolution act((A_hat h + gamma o) w).

    ``score_mask`` is an additive matrix applied to the raw scores;
    batched inputs pass 0 within a graph and ``-inf`` across graphs so
    softmax zeroes every cross-graph weight exactly.  With gamma = 0
    the pre-activation is computed by the identical expression as the
    plain layer, so the two agree bit for bit.
    """
    if h.shape[0] != na.mat.shape[0]:
        raise ShapeError("feature rows must match the node count")
    if h.shape[1] != p.d_in:
        raise ShapeError(f"layer expects width {p.d_in}, got {h.shape[1]}")
    ql = h @ p.wl
    qr = h @ p.wr
    s = ql @ qr.T
    if score_mask is not None:
        if score_mask.shape != s.shape:
            raise ShapeError("score mask must be square over the node count")
        s = s + score_mask
    b = row_softmax(s)
    hv = h @ p.wh
    mixed = b @ hv
    o = mixed @ p.wg
    ow = o @ p.w
    z = na.mat @ (h @ p.w)
    if p.gamma != 0.0:
        z = z + p.gamma * ow
    cache = LayerCache(
        h_in=h, pre_activation=z, na_mat=na.mat,
        activation=activation, attention=True,
        scores=s, mask=b, attn_out=o,
        ql=ql, qr=qr, hv=hv, mixed=mixed, attn_out_w=ow,
    )
    return _apply_activation(z, activation), cache


def softmax_rows_backward(b: Mat, grad_b: Mat) -> Mat:
    """Exact Jacobian-vector product of a row softmax.

    For each row, grad_s = b * (grad_b - <grad_b, b>).  Rows that were
    fully masked upstream have b = 0 there and propagate exact zeros.
    """
    rowdot = np.sum(grad_b * b, axis=1, keepdims=True)
    return b * (grad_b - rowdot)


def layer_backward(
    cache: LayerCache, p: GsaLayerParams, grad_out: Mat
) -> tuple[Mat, GsaLayerParams]:
    """Exact gradients of one layer.

    Returns ``(grad_h, grads)`` where ``grads`` reuses the parameter
    container (``grads.gamma`` holds the scalar gamma gradient).  The
    mask cached by the forward pass makes the softmax backward exact
    even for batched inputs: masked entries carry weight exactly 0 and
    therefore contribute exactly 0 gradient.
    """
    h = cache.h_in
    if grad_out.shape != cache.pre_activation.shape:
        raise ShapeError("grad_out does not match the layer output")
    if h.shape[1] != p.d_in or cache.pre_activation.shape[1] != p.d_out:
        raise ShapeError("cache and params disagree on layer widths")
    if cache.attention and cache.mask is None:
        raise ShapeError("attention cache is missing its softmax mask")

    if cache.activation == "relu":
        g_z = grad_out * (cache.pre_activation > 0.0)
    else:
        g_z = grad_out

    grads = p.zeros_like()
    g_hw = cache.na_mat @ g_z          # A_hat is symmetric
    grads.w = h.T @ g_hw
    g_h = g_hw @ p.w.T

    if cache.attention:
        grads.gamma = float(np.sum(g_z * cache.attn_out_w))
        if p.gamma != 0.0:
            g_ow = p.gamma * g_z
            grads.w += cache.attn_out.T @ g_ow
            g_o = g_ow @ p.w.T
            grads.wg = cache.mixed.T @ g_o
            g_mixed = g_o @ p.wg.T
            g_hv = cache.mask.T @ g_mixed
            grads.wh = h.T @ g_hv
            g_h += g_hv @ p.wh.T
            g_b = g_mixed @ cache.hv.T
            g_s = softmax_rows_backward(cache.mask, g_b)
            g_ql = g_s @ cache.qr
            g_qr = g_s.T @ cache.ql
            grads.wl = h.T @ g_ql
            grads.wr = h.T @ g_qr
            g_h += g_ql @ p.wl.T + g_qr @ p.wr.T
    return g_h, grads


@dataclass
class ModelCaches:
    """Per-layer caches plus the dropout scale masks actually applied."""

    layers: list[LayerCache] = field(default_factory=list)
    dropout_scales: list[Mat | None] = field(default_factory=list)


def build_segment_mask(sizes: np.ndarray) -> Mat:
    """Additive score mask: 0 inside each block, -inf across blocks."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or len(sizes) == 0 or (sizes < 1).any():
        raise ShapeError("segment sizes must be a non-empty positive vector")
    total = int(sizes.sum())
    mask = np.full((total, total), -np.inf)
    start = 0
    for size in sizes:
        stop = start + int(size)
        mask[start:stop, start:stop] = 0.0
        start = stop
    return mask


def model_forward(
    spec: ModelSpec,
    params: list[GsaLayerParams],
    na: NormalizedAdjacency,
    x: Mat,
    train_mode: bool = False,
    dropout_rng: np.random.Generator | int | None = None,
    score_mask: Mat | None = None,
) -> tuple[Mat, ModelCaches]:
    """Run the full stack; the final layer always emits raw logits.

    Dropout applies to every layer input (features included) only when
    ``train_mode`` is set, using inverted scaling so evaluation needs
    no rescaling.  ``dropout_rng`` may be a generator or a plain seed.
    """
    if len(params) != spec.num_layers:
        raise ShapeError(f"expected {spec.num_layers} layers, got {len(params)}")
    if x.shape[1] != spec.layer_dims[0]:
        raise ShapeError(f"input width {x.shape[1]} != spec {spec.layer_dims[0]}")
    if isinstance(dropout_rng, int):
        dropout_rng = substream(dropout_rng, STREAM_DROPOUT)
    use_dropout = train_mode and spec.dropout_rate > 0.0
    if use_dropout and dropout_rng is None:
        raise ParameterError("train-mode dropout requires a generator or seed")

    caches = ModelCaches()
    h = x
    for layer, p in enumerate(params):
        if use_dropout:
            keep = dropout_rng.random(h.shape) >= spec.dropout_rate
            scale = keep / (1.0 - spec.dropout_rate)
            h = h * scale
            caches.dropout_scales.append(scale)
        else:
            caches.dropout_scales.append(None)
        activation = spec.activation if layer < spec.num_layers - 1 else "identity"
        if spec.attention[layer]:
            h, cache = gsa_layer_forward(na, h, p, activation, score_mask)
        else:
            h, cache = gcn_layer_forward(na, h, p.w, activation)
        caches.layers.append(cache)
    return h, caches


def model_backward(
    spec: ModelSpec,
    params: list[GsaLayerParams],
    caches: ModelCaches,
    grad_logits: Mat,
) -> tuple[list[GsaLayerParams], Mat]:
    """Exact gradients for every layer plus the input features."""
    if len(caches.layers) != len(params):
        raise ShapeError("cache depth does not match parameter depth")
    grads: list[GsaLayerParams] = [None] * len(params)  # type: ignore[list-item]
    g = grad_logits
    for layer in range(len(params) - 1, -1, -1):
        g, grads[layer] = layer_backward(caches.layers[layer], params[layer], g)
        scale = caches.dropout_scales[layer]
        if scale is not None:
            g = g * scale
    return grads, g


def sum_pool_readout(h: Mat, sizes: np.ndarray) -> Mat:
    """Sum node rows per graph; row g is the readout of graph g."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or len(sizes) == 0 or (sizes < 1).any():
        raise ShapeError("graph sizes must be a non-empty positive vector")
    if int(sizes.sum()) != h.shape[0]:
        raise ShapeError("graph sizes do not cover the node rows")
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return np.add.reduceat(h, starts, axis=0)


def sum_pool_backward(grad_pooled: Mat, sizes: np.ndarray) -> Mat:
    """Each node inherits its graph's pooled gradient row."""
    return np.repeat(grad_pooled, np.asarray(sizes, dtype=np.int64), axis=0)
