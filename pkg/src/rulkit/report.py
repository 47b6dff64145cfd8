"""Plot-ready CSV emitters: epoch tables, prediction traces, comparisons.

All emitters return the CSV text (UTF-8, LF, header row first) and
optionally write it to a sink, which may be a path or an open text file.
Floats render with 4 decimal places when that is exact, otherwise with
their full shortest round-trip form, so parsing the CSV back is loss-free.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .data import EngineSeries, NormalizationStats, normalize
from .evolve import GenerationReport
from .model import EpochMetrics, Model, predict_batch


class SinkError(OSError):
    pass


class EngineTooShortError(ValueError):
    pass


class DuplicateLabelError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionTrace:
    """Predicted vs. actual remaining cycles over one engine's life."""

    engine_id: int
    cycles: np.ndarray          # (k,) end cycle of each window
    actual_rul: np.ndarray      # (k,) cycles left, ends at 0
    predicted_rul: np.ndarray   # (k,) model output scaled back to cycles


@dataclass(frozen=True)
class ModelScore:
    """Final validation metrics of one labeled model."""

    label: str
    val_mse: float
    val_mae: float


def format_metric(x: float) -> str:
    """4-decimal fixed form when exact, else shortest round-trip repr."""
    x = float(x)
    compact = f"{x:.4f}"
    return compact if float(compact) == x else repr(x)


def _write(sink: str | Path | IO[str] | None, text: str) -> None:
    if sink is None:
        return
    try:
        if isinstance(sink, (str, Path)):
            Path(sink).write_text(text, encoding="utf-8")
        else:
            sink.write(text)
    except OSError as exc:
        raise SinkError(f"failed to write CSV: {exc}") from exc


def emit_epoch_table(metrics: Sequence[EpochMetrics], sink=None) -> str:
    """`epoch,mse,mae,val_mse,val_mae`, one row per epoch."""
    if not metrics:
        raise ValueError("no epoch metrics to emit")
    lines = ["epoch,mse,mae,val_mse,val_mae"]
    for m in metrics:
        if m.val_mse is None or m.val_mae is None:
            raise ValueError(f"epoch {m.epoch} is missing validation metrics")
        lines.append(
            f"{m.epoch},{format_metric(m.train_mse)},{format_metric(m.train_mae)},"
            f"{format_metric(m.val_mse)},{format_metric(m.val_mae)}"
        )
    text = "\n".join(lines) + "\n"
    _write(sink, text)
    return text


def emit_generation_table(reports: Sequence[GenerationReport], sink=None) -> str:
    """`generation,individual,lr,batch_size,mse,mae,val_mse,val_mae,delta_loss`."""
    if not reports:
        raise ValueError("no generation reports to emit")
    lines = ["generation,individual,lr,batch_size,mse,mae,val_mse,val_mae,delta_loss"]
    for rep in reports:
        for row in rep.individuals:
            lines.append(
                f"{rep.generation},{row.individual},{format_metric(row.learning_rate)},"
                f"{row.batch_size},{format_metric(row.train_mse)},{format_metric(row.train_mae)},"
                f"{format_metric(row.val_mse)},{format_metric(row.val_mae)},"
                f"{format_metric(row.delta_loss)}"
            )
    text = "\n".join(lines) + "\n"
    _write(sink, text)
    return text


def build_prediction_trace(
    model: Model,
    engine: EngineSeries,
    stats: NormalizationStats,
    rul_denominator: float,
) -> PredictionTrace:
    """Predict the engine's remaining life at every window end cycle."""
    window_len = model.spec.window_len
    total = engine.total_cycles
    if total < window_len:
        raise EngineTooShortError(
            f"engine {engine.unit_id} has {total} cycles, needs >= {window_len}"
        )
    norm = normalize(stats, engine.rows)
    ends = np.arange(window_len, total + 1)
    X = np.stack([norm[end - window_len : end] for end in ends])
    predicted = predict_batch(model, X) * rul_denominator
    return PredictionTrace(
        engine_id=engine.unit_id,
        cycles=ends,
        actual_rul=total - ends,
        predicted_rul=predicted,
    )


def emit_prediction_trace(
    model: Model,
    engine: EngineSeries,
    stats: NormalizationStats,
    rul_denominator: float,
    sink=None,
) -> str:
    """`cycle,actual_rul,predicted_rul`, one row per window end cycle."""
    trace = build_prediction_trace(model, engine, stats, rul_denominator)
    lines = ["cycle,actual_rul,predicted_rul"]
    for cycle, actual, predicted in zip(trace.cycles, trace.actual_rul, trace.predicted_rul):
        lines.append(f"{cycle},{actual},{format_metric(predicted)}")
    text = "\n".join(lines) + "\n"
    _write(sink, text)
    return text


def emit_comparison(scores: Sequence[ModelScore], sink=None) -> str:
    """`label,val_mse,val_mae,best` with best=1 on the lowest val MAE row."""
    if not scores:
        raise ValueError("no model scores to emit")
    labels = [s.label for s in scores]
    if len(set(labels)) != len(labels):
        dup = next(l for l in labels if labels.count(l) > 1)
        raise DuplicateLabelError(f"duplicate model label {dup!r}")
    best = min(range(len(scores)), key=lambda i: (scores[i].val_mae, i))
    lines = ["label,val_mse,val_mae,best"]
    for i, s in enumerate(scores):
        lines.append(
            f"{s.label},{format_metric(s.val_mse)},{format_metric(s.val_mae)},{int(i == best)}"
        )
    text = "\n".join(lines) + "\n"
    _write(sink, text)
    return text
