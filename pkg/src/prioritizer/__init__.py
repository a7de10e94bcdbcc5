"""Prioritize unlabeled test inputs for trained networks by sentiment scores."""

from .engine import (
    ActivationTraceSet,
    ForwardMode,
    capture_traces,
    default_trace_layer,
    forward,
    predict_batch,
    softmax,
)
from .errors import (
    DataError,
    FormatError,
    MissingWeightError,
    NonFiniteError,
    PrioritizerError,
    SchemaError,
    ShapeError,
    UsageError,
)
from .evaluation import (
    CorrectnessVector,
    EvalReport,
    apfd_score,
    cumulative_error_curve,
    derive_correctness,
    evaluate_prioritization,
    rank_by_score,
    select_top,
)
from .formats import (
    LayerSpec,
    ModelManifest,
    load_index_file,
    load_model,
    load_tensor_file,
    save_index_file,
    save_model,
    save_tensor_file,
    validate_model,
)
from .scoring import (
    DsaIndex,
    McConfig,
    ScoreRecord,
    build_dsa_index,
    dsa_value,
    entropy,
    read_scores,
    score_dropout,
    score_dsa,
    score_softmax,
    write_scores,
)
from .tensor import Tensor, argmax, l2_distance, matmul

__version__ = "0.1.0"

__all__ = [
    "ActivationTraceSet",
    "CorrectnessVector",
    "DataError",
    "DsaIndex",
    "EvalReport",
    "ForwardMode",
    "FormatError",
    "LayerSpec",
    "McConfig",
    "MissingWeightError",
    "ModelManifest",
    "NonFiniteError",
    "PrioritizerError",
    "SchemaError",
    "ScoreRecord",
    "ShapeError",
    "Tensor",
    "UsageError",
    "apfd_score",
    "argmax",
    "build_dsa_index",
    "capture_traces",
    "cumulative_error_curve",
    "default_trace_layer",
    "derive_correctness",
    "dsa_value",
    "entropy",
    "evaluate_prioritization",
    "forward",
    "l2_distance",
    "load_index_file",
    "load_model",
    "load_tensor_file",
    "matmul",
    "predict_batch",
    "rank_by_score",
    "read_scores",
    "save_index_file",
    "save_model",
    "save_tensor_file",
    "score_dropout",
    "score_dsa",
    "score_softmax",
    "select_top",
    "softmax",
    "validate_model",
    "write_scores",
]
