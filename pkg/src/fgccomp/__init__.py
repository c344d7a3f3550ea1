"""Attribute completion for graph anomaly detection.

Neighbors are grouped by training labels, a node-conditioned gate blends
the fraud and benign transforms for unknown neighbors, and the fused
messages complete missing attributes before a small MLP scores each node.
"""

from .graph import (
    EVAL,
    TRAIN,
    Graph,
    GraphError,
    GroupPartition,
    Split,
    SplitError,
    build_graph,
    edge_list,
    make_split,
    partition_neighbors,
    validate_graph,
    with_features,
    with_labels,
)
from .metrics import recall_at_k, roc_auc
from .models import (
    CheckpointError,
    build_model,
    load_checkpoint,
    model_forward,
    predict_proba,
    save_checkpoint,
)
from .data_io import (
    GraphFileError,
    load_graph,
    save_graph,
    synth_planted_anomaly,
)
from .training import (
    CorruptionConfig,
    NumericalAbortError,
    RunResult,
    TrainConfig,
    corrupt_features,
    train,
)

__version__ = "0.1.0"
