"""Numerical checks behind the attention layer's two theoretical claims.

Overfitting side: the last-layer loss splits into a geometry term (an
effective propagation matrix that down-weights trusted edges) plus a
feature regularizer over disconnected node pairs; DropEdge-style edge
cancellation is simulated exactly on signed d-regular graphs via
Ramsey pair/triangle packing.

Over-smoothing side: layer outputs of a plain stack contract toward
the invariant subspace spanned by the degree vector at rate (s lambda)
per layer; the attentive layer inflates the effective weight's top
singular value, slowing that contraction.  The checks here sample
admissible instances and verify the eigenvalue and singular-value
claims with explicit tolerances instead of trusting the algebra.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from ._seeding import STREAM_SAMPLING, substream
from .exceptions import (
    AssumptionViolation,
    DisconnectedGraphError,
    ParameterError,
    ShapeError,
)
from .gnn import GsaLayerParams, ModelSpec, gcn_layer_forward, gsa_layer_forward
from .graph import (
    Graph,
    NormalizedAdjacency,
    adjacency,
    complement_adjacency,
    normalize_adjacency,
    spectral_gap,
)
from .numkernel import Mat, max_singular_value, solve_spd

RANK_TOL = 1e-10
BHAT_DELTA = 1e-3
DEFAULT_EPS = 0.01

# Exact classical Ramsey numbers R(r+1, r+1) for the supported r.
RAMSEY_NUMBER = {1: 2, 2: 6}


@dataclass(frozen=True)
class LossDecomposition:
    """Split of the attentive last layer into geometry and feature parts.

    ``geometry_matrix`` is the effective propagation acting on the last
    hidden output; ``feature_reg`` is the non-negative disconnected-pair
    penalty (negative similarity contributions clamped at zero), with
    the unclamped raw sum kept alongside.
    """

    geometry_matrix: Mat
    feature_reg: float
    feature_reg_unclamped: float
    gamma: float


@dataclass(frozen=True)
class OversmoothReport:
    """Per-layer collapse traces of twin stacks sharing weights.

    ``per_layer_dm_*`` start at layer 0 (the raw features), so they are
    one longer than the per-layer singular-value lists.  ``s_tilde``
    entries are None where the attentive stack's hidden features lost
    full column rank and the effective weight is undefined.
    """

    per_layer_dm_plain: tuple[float, ...]
    per_layer_dm_gsa: tuple[float, ...]
    per_layer_s: tuple[float, ...]
    per_layer_s_tilde: tuple[float | None, ...]
    lambda_: float
    gamma: float


@dataclass(frozen=True)
class DropEdgeSimReport:
    n: int
    d: int
    r: int
    eliminated_count: int
    guaranteed_count: int
    arrangement: str


def loss_decomposition(
    h_prev: Mat,
    h_last: Mat,
    na: NormalizedAdjacency,
    g: Graph,
    mask: Mat,
    gamma: float,
    similarity: str = "cross",
    include_diagonal: bool = True,
) -> LossDecomposition:
    """Geometry matrix and disconnected-pair feature penalty.

    ``h_prev``/``h_last`` are the features entering and leaving the
    last linear map; ``mask`` is that layer's attention mask.  The
    geometry matrix is ``A_hat + gamma * (comp + offdiag_ones) * mask``
    built from the complement adjacency; the feature term sums
    ``<h_prev_i, h_prev_j> * ||h_last_i - h_last_j||^2`` over ordered
    disconnected pairs, scaled by gamma/2.  ``similarity="self"``
    switches the inner product to ``<h_prev_i, h_prev_i>``.
    """
    n = g.n
    if h_prev.shape[0] != n or h_last.shape[0] != n:
        raise ShapeError("feature rows must match the node count")
    if mask.shape != (n, n) or na.mat.shape != (n, n):
        raise ShapeError("mask and adjacency must be square over the nodes")
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if similarity not in ("cross", "self"):
        raise ParameterError("similarity must be 'cross' or 'self'")

    comp = complement_adjacency(g, include_diagonal=include_diagonal)
    offdiag_ones = np.ones((n, n)) - np.eye(n)
    geometry = na.mat + gamma * ((comp + offdiag_ones) * mask)

    # Ordered disconnected pairs (i != j, no edge).
    no_edge = (adjacency(g) == 0.0) & ~np.eye(n, dtype=bool)
    if similarity == "cross":
        sim = h_prev @ h_prev.T
    else:
        sim = np.broadcast_to(
            np.sum(h_prev * h_prev, axis=1, keepdims=True), (n, n)
        )
    sq_norms = np.sum(h_last * h_last, axis=1)
    dist_sq = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (h_last @ h_last.T)
    dist_sq = np.maximum(dist_sq, 0.0)
    raw_terms = np.where(no_edge, sim * dist_sq, 0.0)
    clamped_terms = np.where(no_edge, np.maximum(sim, 0.0) * dist_sq, 0.0)
    return LossDecomposition(
        geometry_matrix=geometry,
        feature_reg=float(0.5 * gamma * clamped_terms.sum()),
        feature_reg_unclamped=float(0.5 * gamma * raw_terms.sum()),
        gamma=float(gamma),
    )


def invariant_direction(na: NormalizedAdjacency) -> np.ndarray:
    """Unit vector along D^{1/2} 1, the fixed direction of the propagation."""
    e = np.sqrt(na.degrees.astype(np.float64))
    return e / np.linalg.norm(e)


def subspace_distance(h: Mat, na: NormalizedAdjacency) -> float:
    """Frobenius distance from ``h`` to the rank-one collapse subspace.

    The subspace is span(e) tensored with the feature coordinates for
    the unit degree direction e; the minimizer over it is the
    orthogonal projection e (e^T h), so the distance is the residual
    norm.  Only meaningful on a connected graph, where e is the unique
    non-negative invariant direction.
    """
    if h.shape[0] != na.mat.shape[0]:
        raise ShapeError("feature rows must match the node count")
    if not _connected(na):
        raise DisconnectedGraphError(
            "subspace distance needs a connected graph; "
            "analyse components separately"
        )
    e = invariant_direction(na)
    return float(np.linalg.norm(h - np.outer(e, e @ h)))


def _connected(na: NormalizedAdjacency) -> bool:
    from .graph import _mat_connected

    return _mat_connected(na.mat)


def shifted_from_normalized(na: NormalizedAdjacency, eps: float) -> Mat:
    """(1+eps) I + D^{-1/2} A D^{-1/2} rebuilt from the normalized form."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    mat = na.mat.copy()
    mat[np.diag_indices(mat.shape[0])] = 1.0 + eps
    return mat


def _require_full_column_rank(h: Mat) -> Mat:
    gram = h.T @ h
    smallest = float(np.linalg.eigvalsh(gram)[0])
    if smallest <= RANK_TOL:
        raise AssumptionViolation(
            f"features are rank deficient: sigma_min(H^T H) = {smallest:.3e} <= {RANK_TOL}"
        )
    return gram


def effective_weight(
    h: Mat,
    na: NormalizedAdjacency,
    mask: Mat,
    gamma: float,
    w: Mat,
    eps: float = DEFAULT_EPS,
) -> Mat:
    """Substitute weight making ``h @ w_eff`` mimic the attentive layer.

    Computes ``(I + gamma (H^T H)^{-1} H^T Z) W`` with ``Z`` solving
    ``A_hat Z = mask @ h``; if the normalized adjacency is numerically
    singular the solve falls back to the positive definite shifted
    form.  Requires full column rank features (checked, not patched).
    """
    n = na.mat.shape[0]
    if h.shape[0] != n or mask.shape != (n, n):
        raise ShapeError("h and mask must cover the node count")
    if h.shape[1] != w.shape[0]:
        raise ShapeError("w rows must match the feature width")
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    gram = _require_full_column_rank(h)
    bh = mask @ h
    z = None
    try:
        cand = scipy.linalg.solve(na.mat, bh, assume_a="sym")
        residual = np.linalg.norm(na.mat @ cand - bh)
        if residual <= 1e-8 * max(np.linalg.norm(bh), 1e-30):
            z = cand
    except scipy.linalg.LinAlgError:
        z = None
    if z is None:
        z = solve_spd(shifted_from_normalized(na, eps), bh)
    correction = solve_spd(gram, h.T @ z)
    d = h.shape[1]
    return (np.eye(d) + gamma * correction) @ w


def sample_bhat(n: int, seed: int) -> Mat:
    """Symmetric positive definite mixing matrix: gram of a seeded
    Gaussian square plus a small ridge keeping the conditioning sane."""
    r = np.random.default_rng(seed).standard_normal((n, n))
    return r @ r.T + BHAT_DELTA * np.eye(n)


def sample_p_matrix(h: Mat, g: Graph, eps: float, gamma: float, seed: int) -> Mat:
    """P = I + gamma (H^T H)^{-1} H^T (A'^{-1} Bhat) H for a seeded Bhat."""
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if h.shape[0] != g.n:
        raise ShapeError("feature rows must match the node count")
    gram = _require_full_column_rank(h)
    from .graph import shifted_laplacian

    aprime = shifted_laplacian(g, eps)
    chat = solve_spd(aprime, sample_bhat(g.n, seed))
    q = solve_spd(gram, h.T @ chat @ h)
    return np.eye(h.shape[1]) + gamma * q


class LemmaPdResult(NamedTuple):
    lambda_min_p: float
    sigma_min_p: float
    passed: bool


class AmplificationResult(NamedTuple):
    s: float
    s_tilde: float
    passed: bool


def check_lemma_pd(
    h: Mat, g: Graph, eps: float, gamma: float, seed: int
) -> LemmaPdResult:
    """Verify the correction matrix P sits strictly above the identity.

    Samples an admissible mixing matrix from ``seed``, forms P, and
    passes when its smallest eigenvalue (real part, the spectrum is
    real up to roundoff here) exceeds 1.  Requires gamma > 0; the
    gamma = 0 limit collapses P to the identity and is a boundary, not
    a pass.
    """
    if gamma <= 0:
        raise ParameterError("the eigenvalue claim needs gamma > 0")
    p = sample_p_matrix(h, g, eps, gamma, seed)
    eigs = np.linalg.eigvals(p)
    lambda_min = float(np.min(eigs.real))
    sigma_min = float(np.linalg.svd(p, compute_uv=False)[-1])
    return LemmaPdResult(lambda_min, sigma_min, lambda_min > 1.0)


def check_singular_amplification(
    h: Mat, g: Graph, eps: float, gamma: float, w: Mat, seed: int
) -> AmplificationResult:
    """Compare top singular values of ``w`` and ``P w`` under one Bhat.

    gamma = 0 gives s_tilde = s exactly (P is the identity) and counts
    as a boundary, never a pass.
    """
    if h.shape[1] != w.shape[0]:
        raise ShapeError("w rows must match the feature width")
    p = sample_p_matrix(h, g, eps, gamma, seed)
    s = max_singular_value(w).value
    s_tilde = max_singular_value(p @ w).value
    return AmplificationResult(s, s_tilde, bool(gamma > 0 and s_tilde > s))


@dataclass(frozen=True)
class LemmaInstance:
    """One sampled admissible input for the lemma checks."""

    index: int
    h: Mat
    g: Graph
    w: Mat
    eps: float
    bhat_seed: int


def sample_lemma_instance(
    index: int, base_seed: int = 0, eps: float = DEFAULT_EPS
) -> LemmaInstance:
    """Deterministic admissible instance: Gaussian features on a small
    random graph, feature count never above the node count."""
    rng = substream(base_seed, STREAM_SAMPLING, index)
    n = int(rng.integers(4, 13))
    d = int(rng.integers(2, n + 1))
    pairs = [
        (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.35
    ]
    g = Graph.from_edges(n, pairs)
    h = rng.standard_normal((n, d))
    d_out = int(rng.integers(1, d + 1))
    w = rng.standard_normal((d, d_out))
    return LemmaInstance(
        index=index, h=h, g=g, w=w, eps=eps,
        bhat_seed=int(rng.integers(2**31)),
    )


def oversmooth_trace(
    spec: ModelSpec,
    params: list[GsaLayerParams],
    dataset,
    depth: int,
) -> OversmoothReport:
    """Collapse traces of a plain and an attentive stack sharing weights.

    Both stacks run ``depth`` width-preserving layers on the dataset's
    features with the spec's activation throughout (these traces probe
    propagation, not classification, so no logits head).  Rows 0 of the
    distance traces are the shared input.  The effective-weight column
    uses each attentive layer's realized mask and input; layers whose
    input lost full column rank yield None there.
    """
    if depth < 1:
        raise ParameterError("depth must be at least 1")
    if len(params) != depth or spec.num_layers != depth:
        raise ParameterError("spec, params, and depth must agree")
    if len(set(spec.layer_dims)) != 1:
        raise ParameterError("trace requires a width-preserving stack")
    na = normalize_adjacency(dataset.graph)
    lam = spectral_gap(na)
    x = dataset.x
    if x.shape[1] != spec.layer_dims[0]:
        raise ShapeError("features do not match the stack width")

    dm_plain = [subspace_distance(x, na)]
    dm_gsa = [subspace_distance(x, na)]
    s_list: list[float] = []
    s_tilde_list: list[float | None] = []

    h = x
    for p in params:
        h, _ = gcn_layer_forward(na, h, p.w, spec.activation)
        dm_plain.append(subspace_distance(h, na))
        s_list.append(max_singular_value(p.w).value)

    h_hat = x
    for p in params:
        out, cache = gsa_layer_forward(na, h_hat, p, spec.activation)
        try:
            w_eff = effective_weight(h_hat, na, cache.mask, p.gamma, p.w)
            s_tilde_list.append(max_singular_value(w_eff).value)
        except AssumptionViolation:
            s_tilde_list.append(None)
        h_hat = out
        dm_gsa.append(subspace_distance(h_hat, na))

    return OversmoothReport(
        per_layer_dm_plain=tuple(dm_plain),
        per_layer_dm_gsa=tuple(dm_gsa),
        per_layer_s=tuple(s_list),
        per_layer_s_tilde=tuple(s_tilde_list),
        lambda_=lam,
        gamma=float(params[0].gamma),
    )


def identity_attention_params(
    weights: list[Mat], gamma: float
) -> list[GsaLayerParams]:
    """Layer params whose attention transforms are all identity.

    With these, the attentive layer reduces to the analysis form:
    scores h h^T, values h, so the layer computes
    act((A_hat h + gamma softmax(h h^T) h) w).
    """
    out = []
    for w in weights:
        d = w.shape[0]
        eye = np.eye(d)
        out.append(
            GsaLayerParams(
                w=w, wl=eye, wr=eye.copy(), wh=eye.copy(), wg=eye.copy(),
                gamma=gamma,
            )
        )
    return out


def trace_spec(width: int, depth: int, activation: str = "relu") -> ModelSpec:
    """Width-preserving attentive spec with identity-compatible widths."""
    return ModelSpec(
        layer_dims=(width,) * (depth + 1),
        attention=(True,) * depth,
        activation=activation,
        attn_dim_divisor=1,
    )


def write_dm_trace_csv(report: OversmoothReport, path) -> None:
    """Rows ``layer,dm_plain,dm_gsa,s,s_tilde``; layer 0 is the input,
    so its singular-value cells are empty, as are flagged s_tilde."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("layer,dm_plain,dm_gsa,s,s_tilde\n")
        for layer, (dp, dg) in enumerate(
            zip(report.per_layer_dm_plain, report.per_layer_dm_gsa)
        ):
            if layer == 0:
                s_cell = s_tilde_cell = ""
            else:
                s_cell = f"{report.per_layer_s[layer - 1]:.17g}"
                st = report.per_layer_s_tilde[layer - 1]
                s_tilde_cell = "" if st is None else f"{st:.17g}"
            fh.write(f"{layer},{dp:.17g},{dg:.17g},{s_cell},{s_tilde_cell}\n")


def smallest_reversal_gamma(
    weights: list[Mat], dataset, depth: int, gammas: tuple[float, ...],
    activation: str = "relu",
) -> float | None:
    """Smallest gamma in the sweep whose attentive stack ends farther
    from collapse than the plain one; None when no sweep value works."""
    width = weights[0].shape[0]
    spec = trace_spec(width, depth, activation)
    for gamma in sorted(gammas):
        report = oversmooth_trace(
            spec, identity_attention_params(weights, gamma), dataset, depth
        )
        if report.per_layer_dm_gsa[-1] > report.per_layer_dm_plain[-1]:
            return gamma
    return None


# ---------------------------------------------------------------------------
# DropEdge emulation on signed d-regular graphs


def _signed_pairs(n: int, rng: np.random.Generator) -> np.ndarray:
    signs = np.zeros((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.integers(0, 2, size=len(iu)) * 2 - 1
    signs[iu, ju] = draws
    signs[ju, iu] = draws
    return signs


def _repair_mixed_neighbors(
    signs: np.ndarray, adj: list[list[int]]
) -> bool:
    """Flip graph-edge signs until every vertex sees both signs.

    Deterministic greedy sweeps: a homogeneous vertex flips the edge to
    the neighbor best able to spare one of that sign.  Returns False
    when the budget runs out (possible only on degenerate inputs, e.g.
    odd 2-regular cycles).
    """
    n = len(adj)

    def counts(v: int) -> tuple[int, int]:
        pos = sum(1 for u in adj[v] if signs[v, u] > 0)
        return pos, len(adj[v]) - pos

    for _ in range(20 * n):
        fixed_everything = True
        for v in range(n):
            pos, neg = counts(v)
            if pos > 0 and neg > 0:
                continue
            fixed_everything = False
            sigma = 1 if pos > 0 else -1
            # Prefer a neighbor with a spare edge of the same sign, so
            # the flip cannot make that neighbor homogeneous.
            best, best_spare = None, -1
            for u in adj[v]:
                spare = sum(1 for t in adj[u] if signs[u, t] == sigma) - 1
                if spare > best_spare:
                    best, best_spare = u, spare
            signs[v, best] = -sigma
            signs[best, v] = -sigma
        if fixed_everything:
            return True
    return False


def _greedy_monochromatic_cliques(
    signs: np.ndarray, size: int
) -> list[tuple[tuple[int, ...], int]]:
    """Disjoint monochromatic cliques by exhaustive lexicographic scan."""
    remaining = list(range(signs.shape[0]))
    found = []
    while len(remaining) >= size:
        hit = None
        for combo in itertools.combinations(remaining, size):
            colors = {int(signs[a, b]) for a, b in itertools.combinations(combo, 2)}
            if len(colors) == 1:
                hit = (combo, colors.pop())
                break
        if hit is None:
            break
        found.append(hit)
        remaining = [v for v in remaining if v not in hit[0]]
    return found


def dropedge_simulation(
    n: int, d: int, r: int, signs: np.ndarray | None = None, seed: int = 0
) -> DropEdgeSimReport:
    """Count vertices whose attention influence cancels one edge influence.

    Builds a seeded d-regular graph, assigns every vertex pair a +-1
    feature influence (given or sampled), repairs graph-edge signs so
    each vertex sees both (the mixed-neighborhood assumption), packs
    disjoint monochromatic (r+1)-cliques of the signed complete graph,
    and lets each clique's members receive attention only from the
    other r members.  With gamma = 1/d, a member's aggregate attention
    influence is color/d, which cancels exactly one opposite-signed
    neighbor's influence; the arithmetic is integer (units of 1/d), so
    the cancellation check is exact.
    """
    if r not in RAMSEY_NUMBER:
        raise ParameterError("only r in {1, 2} is supported (exact Ramsey numbers)")
    if n < 2:
        return DropEdgeSimReport(
            n=n, d=d, r=r, eliminated_count=0, guaranteed_count=0,
            arrangement="degenerate: fewer than two vertices",
        )
    if d < 2 or d >= n or (n * d) % 2 != 0:
        raise ParameterError(f"no usable d-regular graph for n={n}, d={d}")

    import networkx as nx

    nxg = nx.random_regular_graph(d, n, seed=seed)
    g = Graph.from_edges(n, nxg.edges())
    adj = g.neighbors()

    rng = np.random.default_rng(seed)
    if signs is None:
        attempt = 0
        while True:
            candidate = _signed_pairs(n, rng)
            if _repair_mixed_neighbors(candidate, adj):
                signs = candidate
                break
            attempt += 1
            if attempt >= 10:  # pragma: no cover - d >= 2 repairs reliably
                raise AssumptionViolation(
                    "could not arrange mixed-sign neighborhoods"
                )
    else:
        signs = np.array(signs, dtype=np.int64)
        if signs.shape != (n, n) or np.any(np.abs(signs - signs.T) > 0):
            raise ShapeError("signs must be a symmetric n-by-n matrix")
        off = ~np.eye(n, dtype=bool)
        if not np.all(np.abs(signs[off]) == 1):
            raise ParameterError("off-diagonal signs must be +-1")
        if not _repair_mixed_neighbors(signs, adj):
            raise AssumptionViolation(
                "provided signs cannot satisfy mixed neighborhoods"
            )

    cliques = _greedy_monochromatic_cliques(signs, r + 1)

    eliminated = 0
    clique_bits = []
    for members, color in cliques:
        all_members_cancel = True
        for v in members:
            # Aggregate attention influence on v: r peers of influence
            # color each, softmax-normalized to color, scaled by
            # gamma = 1/d.  In integer 1/d units that is exactly
            # `color`, and a neighbor of influence -color cancels it.
            peers = [u for u in members if u != v]
            total_units = sum(int(signs[u, v]) for u in peers)
            normalized_units = color  # r * color normalized by r
            assert total_units == r * color
            has_canceling_neighbor = any(
                int(signs[u, v]) == -normalized_units for u in adj[v]
            )
            if not has_canceling_neighbor:  # pragma: no cover - repair forbids
                all_members_cancel = False
        if all_members_cancel:
            eliminated += len(members)
        clique_bits.append(
            "(" + ",".join(map(str, members)) + ("+" if color > 0 else "-") + ")"
        )

    guaranteed = (r + 1) * (n // RAMSEY_NUMBER[r])
    arrangement = (
        f"gamma=1/{d}; cliques={''.join(clique_bits) or 'none'}; "
        "each member attends to its clique peers and cancels one "
        "opposite-signed neighbor"
    )
    return DropEdgeSimReport(
        n=n, d=d, r=r,
        eliminated_count=eliminated,
        guaranteed_count=guaranteed,
        arrangement=arrangement,
    )


def every_k6_coloring_has_mono_triangle() -> bool:
    """Exhaustively confirm that all 2^15 edge 2-colorings of the
    complete graph on six vertices contain a one-color triangle."""
    edges = list(itertools.combinations(range(6), 2))
    edge_index = {e: i for i, e in enumerate(edges)}
    triangles = []
    for tri in itertools.combinations(range(6), 3):
        a, b, c = tri
        triangles.append(
            (
                edge_index[(a, b)],
                edge_index[(a, c)],
                edge_index[(b, c)],
            )
        )
    codes = np.arange(2**15, dtype=np.uint32)
    bits = (codes[:, None] >> np.arange(15)[None, :]) & 1
    has_mono = np.zeros(2**15, dtype=bool)
    for i, j, k in triangles:
        same = (bits[:, i] == bits[:, j]) & (bits[:, j] == bits[:, k])
        has_mono |= same
    return bool(has_mono.all())
