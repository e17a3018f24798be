"""Graph neural network risk detection on transaction networks."""

from ._gnnrisk import (
    Dataset,
    GnnriskError,
    Model,
    SynthConfig,
    TrainConfig,
    auc,
    classification_metrics,
    fit,
    generate,
    load_dataset,
    load_model,
    model_from_bytes,
    roc_curve,
    run_cli,
    score,
)

__all__ = [
    "Dataset",
    "GnnriskError",
    "Model",
    "SynthConfig",
    "TrainConfig",
    "auc",
    "classification_metrics",
    "fit",
    "generate",
    "load_dataset",
    "load_model",
    "model_from_bytes",
    "roc_curve",
    "run_cli",
    "score",
]
__version__ = "0.1.0"
