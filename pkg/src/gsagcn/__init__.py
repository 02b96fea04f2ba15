"""Graph convolutional networks with a global self-attention term.

Numpy-based layers with hand-written gradients, small training loops
for node and graph classification, and diagnostic tools that check the
geometry of deep representations (subspace collapse, singular value
amplification, edge-drop cancellation on regular graphs).
"""

__version__ = "0.1.0"

from .exceptions import (
    AssumptionViolation,
    DisconnectedGraphError,
    DivergenceError,
    GsaGcnError,
    ParameterError,
    ShapeError,
    SingularMatrixError,
)
from .gnn import GsaLayerParams, ModelSpec, init_params, model_forward, uniform_spec
from .graph import Graph, NormalizedAdjacency, normalize_adjacency
from .train import TrainConfig, train_graph_classifier, train_node_classifier

__all__ = [
    "AssumptionViolation",
    "DisconnectedGraphError",
    "DivergenceError",
    "Graph",
    "GsaGcnError",
    "GsaLayerParams",
    "ModelSpec",
    "NormalizedAdjacency",
    "ParameterError",
    "ShapeError",
    "SingularMatrixError",
    "TrainConfig",
    "__version__",
    "init_params",
    "model_forward",
    "normalize_adjacency",
    "train_graph_classifier",
    "train_node_classifier",
    "uniform_spec",
]
