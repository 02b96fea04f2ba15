"""Optimization loops for node- and graph-level classification.

Node classification trains full-batch on one graph with boolean
supervision masks.  Graph classification trains on mini-batches that
are assembled into one block-diagonal graph per step; an additive
attention mask keeps member graphs exactly isolated, so batch
composition changes numbers only through sampling order, never through
cross-graph leakage.

The optimizer is plain Adam with L2 regularization folded into the
gradients before the moment updates.  The attention interpolation
weight gamma is clamped to stay non-negative after every step and is
exempt from weight decay (decaying it would bias every attentive layer
toward its plain counterpart even with zero gradient signal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._seeding import STREAM_DROPOUT, STREAM_SAMPLING, substream
from .exceptions import DivergenceError, ParameterError, ShapeError
from .gnn import (
    MATRIX_FIELDS,
    GsaLayerParams,
    ModelSpec,
    build_segment_mask,
    init_params,
    model_backward,
    model_forward,
    sum_pool_backward,
    sum_pool_readout,
)
from .graph import NormalizedAdjacency, normalize_adjacency
from .numkernel import Mat

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    seed: int = 0
    patience: int = 10          # 0 disables early stopping
    dropout: float = 0.5
    batch_size: int = 32        # graph tasks only

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ParameterError("epochs must be at least 1")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if self.patience < 0:
            raise ParameterError("patience must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be at least 1")


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation snapshot; epoch 0 is the untrained model."""

    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    test_acc: float
    gamma_values: tuple[float, ...]   # one per attentive layer


@dataclass
class AdamState:
    """First/second moments, mirrored onto the parameter containers."""

    m: list[GsaLayerParams]
    v: list[GsaLayerParams]

    @classmethod
    def zeros(cls, params: list[GsaLayerParams]) -> "AdamState":
        return cls(
            m=[p.zeros_like() for p in params],
            v=[p.zeros_like() for p in params],
        )


def cross_entropy_masked(
    logits: Mat, labels: np.ndarray, mask: np.ndarray
) -> tuple[float, Mat]:
    """Mean cross-entropy over masked rows plus its logits gradient.

    The gradient is dense over all rows with exact zeros outside the
    mask, so it feeds straight into the model backward pass.
    """
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("labels must be one id per logits row")
    if mask.shape != labels.shape or mask.dtype != np.bool_:
        raise ShapeError("mask must be a boolean vector over rows")
    rows = np.flatnonzero(mask)
    if len(rows) == 0:
        raise ParameterError("mask selects no rows")
    picked = labels[rows]
    if picked.min() < 0 or picked.max() >= logits.shape[1]:
        raise ParameterError("a masked label is outside the class range")
    z = logits[rows]
    z_shift = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z_shift), axis=1))
    loss = float(np.mean(lse - z_shift[np.arange(len(rows)), picked]))
    probs = np.exp(z_shift - lse[:, None])
    probs[np.arange(len(rows)), picked] -= 1.0
    grad = np.zeros_like(logits)
    grad[rows] = probs / len(rows)
    return loss, grad


def evaluate(logits: Mat, labels: np.ndarray, mask: np.ndarray) -> float:
    """Accuracy over masked rows; argmax ties resolve to the lowest class id."""
    if mask.shape != labels.shape or not mask.any():
        raise ParameterError("mask must select at least one row")
    preds = np.argmax(logits[mask], axis=1)
    return float(np.mean(preds == labels[mask]))


def adam_step(
    params: list[GsaLayerParams],
    grads: list[GsaLayerParams],
    state: AdamState,
    lr: float,
    weight_decay: float,
    t: int,
) -> None:
    """One Adam update, in place.

    L2 decay is added to the matrix gradients before the moment update;
    gamma sees no decay and is clamped at zero afterwards.  ``t`` is the
    1-based global step used for bias correction.
    """
    if t < 1:
        raise ParameterError("step index t must be at least 1")
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        for name in MATRIX_FIELDS:
            theta = getattr(p, name)
            geff = getattr(g, name) + weight_decay * theta
            m_new = ADAM_BETA1 * getattr(m, name) + (1 - ADAM_BETA1) * geff
            v_new = ADAM_BETA2 * getattr(v, name) + (1 - ADAM_BETA2) * geff * geff
            setattr(m, name, m_new)
            setattr(v, name, v_new)
            step = lr * (m_new / bc1) / (np.sqrt(v_new / bc2) + ADAM_EPS)
            setattr(p, name, theta - step)
        m.gamma = ADAM_BETA1 * m.gamma + (1 - ADAM_BETA1) * g.gamma
        v.gamma = ADAM_BETA2 * v.gamma + (1 - ADAM_BETA2) * g.gamma * g.gamma
        step = lr * (m.gamma / bc1) / (math.sqrt(v.gamma / bc2) + ADAM_EPS)
        p.gamma = max(0.0, p.gamma - step)


def gamma_trace(spec: ModelSpec, params: list[GsaLayerParams]) -> tuple[float, ...]:
    return tuple(
        p.gamma for p, attentive in zip(params, spec.attention) if attentive
    )


def train_node_classifier(
    spec: ModelSpec,
    dataset,
    cfg: TrainConfig | None = None,
    gamma_freeze: float | None = None,
) -> tuple[list[GsaLayerParams], list[MetricsRecord]]:
    """Full-batch training on one graph with train/val/test masks.

    Early stopping watches validation loss; when ``patience > 0`` the
    parameters from the best validation epoch are returned, otherwise
    the final ones.  ``gamma_freeze`` pins every gamma to a fixed value
    for the whole run (0 reduces every attentive layer to its plain
    form, bit for bit).  Metrics are recorded from a deterministic
    dropout-free forward pass each epoch, including epoch 0.
    """
    cfg = cfg or TrainConfig()
    if spec.num_layers < 2:
        raise ParameterError("classification models need at least 2 layers")
    for name in ("train_mask", "val_mask", "test_mask"):
        if getattr(dataset, name) is None:
            raise ParameterError(f"dataset is missing {name}")
    na = normalize_adjacency(dataset.graph)
    x, labels = dataset.x, dataset.labels

    params = init_params(spec, cfg.seed)
    if gamma_freeze is not None:
        if gamma_freeze < 0:
            raise ParameterError("frozen gamma must be non-negative")
        for p in params:
            p.gamma = float(gamma_freeze)
    state = AdamState.zeros(params)

    def snapshot(epoch: int) -> MetricsRecord:
        logits, _ = model_forward(spec, params, na, x)
        train_loss, _ = cross_entropy_masked(logits, labels, dataset.train_mask)
        val_loss, _ = cross_entropy_masked(logits, labels, dataset.val_mask)
        return MetricsRecord(
            epoch=epoch,
            train_loss=train_loss,
            train_acc=evaluate(logits, labels, dataset.train_mask),
            val_loss=val_loss,
            val_acc=evaluate(logits, labels, dataset.val_mask),
            test_acc=evaluate(logits, labels, dataset.test_mask),
            gamma_values=gamma_trace(spec, params),
        )

    records = [snapshot(0)]
    best_val = records[0].val_loss
    best_epoch = 0
    best_params = [p.copy() for p in params]

    for epoch in range(1, cfg.epochs + 1):
        rng = substream(cfg.seed, STREAM_DROPOUT, epoch)
        logits, caches = model_forward(
            spec, params, na, x, train_mode=True, dropout_rng=rng
        )
        loss, grad = cross_entropy_masked(logits, labels, dataset.train_mask)
        if not math.isfinite(loss):
            raise DivergenceError(epoch)
        grads, _ = model_backward(spec, params, caches, grad)
        if gamma_freeze is not None:
            for g in grads:
                g.gamma = 0.0
        adam_step(params, grads, state, cfg.learning_rate, cfg.weight_decay, epoch)

        records.append(snapshot(epoch))
        if cfg.patience > 0:
            if records[-1].val_loss < best_val:
                best_val = records[-1].val_loss
                best_epoch = epoch
                best_params = [p.copy() for p in params]
            elif epoch - best_epoch >= cfg.patience:
                break
    return (best_params if cfg.patience > 0 else params), records


def _assemble_batch(
    nas: list[NormalizedAdjacency], xs: list[Mat], indices: np.ndarray
) -> tuple[NormalizedAdjacency, Mat, np.ndarray]:
    """Block-diagonal union of the chosen graphs plus stacked features."""
    sizes = np.array([nas[i].mat.shape[0] for i in indices], dtype=np.int64)
    total = int(sizes.sum())
    mat = np.zeros((total, total))
    degrees = np.empty(total, dtype=np.int64)
    start = 0
    for i in indices:
        stop = start + nas[i].mat.shape[0]
        mat[start:stop, start:stop] = nas[i].mat
        degrees[start:stop] = nas[i].degrees
        start = stop
    x = np.concatenate([xs[i] for i in indices], axis=0)
    return NormalizedAdjacency(mat=mat, degrees=degrees), x, sizes


def _graph_logits(
    spec: ModelSpec,
    params: list[GsaLayerParams],
    na: NormalizedAdjacency,
    x: Mat,
    sizes: np.ndarray,
    train_mode: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    score_mask = build_segment_mask(sizes) if any(spec.attention) else None
    node_logits, caches = model_forward(
        spec, params, na, x,
        train_mode=train_mode, dropout_rng=dropout_rng, score_mask=score_mask,
    )
    return sum_pool_readout(node_logits, sizes), caches


def train_graph_classifier(
    spec: ModelSpec,
    dataset,
    cfg: TrainConfig | None = None,
    gamma_freeze: float | None = None,
) -> tuple[list[GsaLayerParams], list[MetricsRecord]]:
    """Mini-batch training over a corpus of small labeled graphs.

    Batches are shuffled per epoch from a dedicated seed stream and
    assembled block-diagonally; per-graph attention masking keeps the
    members exactly independent inside a batch.  Defaults follow the
    graph-task convention of weight decay 1e-4.  ``gamma_freeze`` works
    as in the node trainer.
    """
    cfg = cfg or TrainConfig(weight_decay=1e-4)
    if spec.num_layers < 2:
        raise ParameterError("classification models need at least 2 layers")
    items = dataset.items
    if len(items) < 2:
        raise ParameterError("need at least two graphs to train")
    nas = [normalize_adjacency(item.graph) for item in items]
    xs = [item.x for item in items]
    labels_all = np.array([item.label for item in items], dtype=np.int64)

    def split_eval(indices: np.ndarray, params) -> tuple[float, float]:
        losses, hits, seen = 0.0, 0.0, 0
        for chunk_start in range(0, len(indices), 256):
            chunk = indices[chunk_start:chunk_start + 256]
            na, x, sizes = _assemble_batch(nas, xs, chunk)
            logits, _ = _graph_logits(spec, params, na, x, sizes)
            y = labels_all[chunk]
            all_rows = np.ones(len(chunk), dtype=bool)
            loss, _ = cross_entropy_masked(logits, y, all_rows)
            losses += loss * len(chunk)
            hits += evaluate(logits, y, all_rows) * len(chunk)
            seen += len(chunk)
        return losses / seen, hits / seen

    params = init_params(spec, cfg.seed)
    if gamma_freeze is not None:
        if gamma_freeze < 0:
            raise ParameterError("frozen gamma must be non-negative")
        for p in params:
            p.gamma = float(gamma_freeze)
    state = AdamState.zeros(params)

    def snapshot(epoch: int) -> MetricsRecord:
        train_loss, train_acc = split_eval(dataset.train_idx, params)
        val_loss, val_acc = split_eval(dataset.val_idx, params)
        _, test_acc = split_eval(dataset.test_idx, params)
        return MetricsRecord(
            epoch=epoch,
            train_loss=train_loss, train_acc=train_acc,
            val_loss=val_loss, val_acc=val_acc, test_acc=test_acc,
            gamma_values=gamma_trace(spec, params),
        )

    records = [snapshot(0)]
    best_val = records[0].val_loss
    best_epoch = 0
    best_params = [p.copy() for p in params]

    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = substream(cfg.seed, STREAM_SAMPLING, epoch).permutation(
            dataset.train_idx
        )
        rng = substream(cfg.seed, STREAM_DROPOUT, epoch)
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            na, x, sizes = _assemble_batch(nas, xs, batch)
            logits, caches = _graph_logits(
                spec, params, na, x, sizes, train_mode=True, dropout_rng=rng
            )
            y = labels_all[batch]
            loss, grad = cross_entropy_masked(
                logits, y, np.ones(len(batch), dtype=bool)
            )
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            node_grad = sum_pool_backward(grad, sizes)
            grads, _ = model_backward(spec, params, caches, node_grad)
            if gamma_freeze is not None:
                for g in grads:
                    g.gamma = 0.0
            step += 1
            adam_step(params, grads, state, cfg.learning_rate, cfg.weight_decay, step)

        records.append(snapshot(epoch))
        if cfg.patience > 0:
            if records[-1].val_loss < best_val:
                best_val = records[-1].val_loss
                best_epoch = epoch
                best_params = [p.copy() for p in params]
            elif epoch - best_epoch >= cfg.patience:
                break
    return (best_params if cfg.patience > 0 else params), records
