"""Retraining-free magnitude sparsification for small CNN weight sets.

The package turns a dense weight container into a sparser one by zeroing
weights whose magnitude falls at or below a per-layer threshold, without
touching the surviving values. Three threshold policies are provided
(flat, triangular, relative), along with per-layer statistics, binary
container formats for weights (SPWT) and datasets (SPDS), a small
inference evaluator for measuring the accuracy cost, and grid-sweep and
per-layer fine-tune drivers built on top of it.
"""

from .backend import BACKEND, backend_name, thread_count
from .container import LayerKind, LayerTensor, Model, read_model, write_model
from .dataset import Dataset, read_dataset, write_dataset
from .errors import FormatError, SparsekitError, TruncatedError, ValidationError
from .infer import (
    ArchManifest,
    evaluate,
    forward,
    load_manifest,
    manifest_from_dict,
    normalized_accuracy,
    save_manifest,
)
from .sparsify import (
    METHOD_FLAT,
    METHOD_RELATIVE,
    METHOD_TRIANGULAR,
    METHODS,
    RELATIVE_MODES,
    TRIANGULAR_MODES,
    LayerSparsity,
    SparsifyPlan,
    SparsityReport,
    aggregate_sparsity,
    apply_plan,
    compression_factor,
    plan_flat,
    plan_relative,
    plan_triangular,
    round_sig,
    sparsify_model,
    sparsity_report,
)
from .stats import (
    DEFAULT_HISTOGRAM_BINS,
    NO_OP_THRESHOLD,
    Histogram,
    LayerStats,
    layer_stats,
    magnitude_percentile,
    min_span,
    weight_histogram,
)
from .sweep import (
    DEFAULT_FINETUNE_STEP,
    DEFAULT_GATE,
    FINETUNE_DELTA_CAP,
    FinetuneResult,
    LayerFinetune,
    TradeoffCurve,
    TradeoffPoint,
    finetune_layers,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ArchManifest",
    "BACKEND",
    "DEFAULT_FINETUNE_STEP",
    "DEFAULT_GATE",
    "DEFAULT_HISTOGRAM_BINS",
    "Dataset",
    "FINETUNE_DELTA_CAP",
    "FinetuneResult",
    "FormatError",
    "Histogram",
    "LayerFinetune",
    "LayerKind",
    "LayerSparsity",
    "LayerStats",
    "LayerTensor",
    "METHODS",
    "METHOD_FLAT",
    "METHOD_RELATIVE",
    "METHOD_TRIANGULAR",
    "Model",
    "NO_OP_THRESHOLD",
    "RELATIVE_MODES",
    "SparsekitError",
    "SparsifyPlan",
    "SparsityReport",
    "TRIANGULAR_MODES",
    "TradeoffCurve",
    "TradeoffPoint",
    "TruncatedError",
    "ValidationError",
    "aggregate_sparsity",
    "apply_plan",
    "backend_name",
    "compression_factor",
    "evaluate",
    "finetune_layers",
    "forward",
    "layer_stats",
    "load_manifest",
    "magnitude_percentile",
    "manifest_from_dict",
    "min_span",
    "normalized_accuracy",
    "plan_flat",
    "plan_relative",
    "plan_triangular",
    "read_dataset",
    "read_model",
    "round_sig",
    "save_manifest",
    "sparsify_model",
    "sparsity_report",
    "sweep",
    "thread_count",
    "weight_histogram",
    "write_dataset",
    "write_model",
]
