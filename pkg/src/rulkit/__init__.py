"""Remaining-useful-life training toolkit.

From-scratch LSTM/GRU sequence regressors over CMAPSS-format sensor data,
plus a genetic optimizer that evolves learning rate and batch size across
generations of one-epoch-trained individuals.
"""

from .data import (
    CmapssPreprocessor,
    EngineSeries,
    NormalizationStats,
    RawRecord,
    WindowedDataset,
    build_windows,
    compute_rul_targets,
    default_rul_denominator,
    fit_normalizer,
    group_by_engine,
    load_engine_series,
    load_normalizer,
    normalize,
    parse_cmapss,
    save_normalizer,
    train_val_split,
    window,
)
from .evolve import (
    GAConfig,
    GenerationReport,
    GeneticTuner,
    Genome,
    Individual,
    crossover,
    evaluate_generation,
    init_population,
    mutate,
    next_generation,
    run_evolution,
    select,
)
from .model import (
    EpochMetrics,
    Model,
    ModelSpec,
    RulRegressor,
    TrainConfig,
    build_model,
    clone_model,
    evaluate,
    load_model,
    predict,
    predict_batch,
    save_model,
    train_epoch,
)
from .report import (
    ModelScore,
    PredictionTrace,
    build_prediction_trace,
    emit_comparison,
    emit_epoch_table,
    emit_generation_table,
    emit_prediction_trace,
)

__version__ = "0.1.0"

__all__ = [
    "CmapssPreprocessor",
    "EngineSeries",
    "EpochMetrics",
    "GAConfig",
    "GenerationReport",
    "GeneticTuner",
    "Genome",
    "Individual",
    "Model",
    "ModelScore",
    "ModelSpec",
    "NormalizationStats",
    "PredictionTrace",
    "RawRecord",
    "RulRegressor",
    "TrainConfig",
    "WindowedDataset",
    "build_model",
    "build_prediction_trace",
    "build_windows",
    "clone_model",
    "compute_rul_targets",
    "crossover",
    "default_rul_denominator",
    "emit_comparison",
    "emit_epoch_table",
    "emit_generation_table",
    "emit_prediction_trace",
    "evaluate",
    "evaluate_generation",
    "fit_normalizer",
    "group_by_engine",
    "init_population",
    "load_engine_series",
    "load_model",
    "load_normalizer",
    "mutate",
    "next_generation",
    "normalize",
    "parse_cmapss",
    "predict",
    "predict_batch",
    "run_evolution",
    "save_model",
    "save_normalizer",
    "select",
    "train_epoch",
    "train_val_split",
    "window",
]
