"""CMAPSS-format data ingestion: parsing, min-max normalization, windowing.

Input files are whitespace-separated numeric rows with no header, 26 columns
per row: unit id, cycle, 3 operational settings, 21 sensor values. Rows are
grouped per engine, normalized feature-wise to the training range, and cut
into fixed-length sliding windows paired with normalized remaining-life
targets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

N_SETTINGS = 3
N_SENSORS = 21
N_FEATURES = N_SETTINGS + N_SENSORS
N_COLUMNS = N_FEATURES + 2  # unit id and cycle come first
DEFAULT_WINDOW = 20


class MalformedRowError(ValueError):
    """Row does not conform to the 26-column CMAPSS layout."""


class NonNumericFieldError(ValueError):
    """A field could not be parsed as a number."""


class DuplicateCycleError(ValueError):
    """Same (unit, cycle) pair appears twice."""


class MissingCycleError(ValueError):
    """An engine's cycles are not the contiguous range 1..T."""


class EmptyInputError(ValueError):
    pass


class InvalidDenominatorError(ValueError):
    pass


class InvalidFractionError(ValueError):
    pass


@dataclass(frozen=True)
class RawRecord:
    """One data row: engine id, cycle index, and the 24 feature values."""

    unit_id: int
    cycle: int
    settings: np.ndarray  # (3,)
    sensors: np.ndarray   # (21,)

    @property
    def features(self) -> np.ndarray:
        return np.concatenate([self.settings, self.sensors])


@dataclass(frozen=True)
class EngineSeries:
    """All cycles of one engine, ordered 1..T with no gaps."""

    unit_id: int
    rows: np.ndarray  # (T, N_FEATURES); rows[t-1] holds the features of cycle t

    @property
    def total_cycles(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature training-range extrema for min-max scaling."""

    feature_min: np.ndarray  # (N_FEATURES,)
    feature_max: np.ndarray  # (N_FEATURES,)


@dataclass
class WindowedDataset:
    """Fixed-length input sequences paired with normalized RUL targets."""

    X: np.ndarray  # (n, window_len, n_features)
    y: np.ndarray  # (n,)
    window_len: int
    n_features: int
    rul_denominator: float

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, indices: np.ndarray) -> "WindowedDataset":
        return WindowedDataset(
            X=self.X[indices],
            y=self.y[indices],
            window_len=self.window_len,
            n_features=self.n_features,
            rul_denominator=self.rul_denominator,
        )


def parse_cmapss(source: str | Iterable[str]) -> list[RawRecord]:
    """Parse CMAPSS-format text into records, one per non-empty line.

    `source` is either a string or an iterable of lines (an open text file
    works). Raises MalformedRowError on a wrong column count and
    NonNumericFieldError on unparseable fields, both naming the line.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    records: list[RawRecord] = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != N_COLUMNS:
            raise MalformedRowError(
                f"line {lineno}: expected {N_COLUMNS} columns, got {len(fields)}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise NonNumericFieldError(f"line {lineno}: non-numeric field in {fields}") from None
        unit, cycle = values[0], values[1]
        if unit != int(unit) or int(unit) < 1:
            raise MalformedRowError(f"line {lineno}: unit id must be a positive integer, got {unit}")
        if cycle != int(cycle) or int(cycle) < 1:
            raise MalformedRowError(f"line {lineno}: cycle must be a positive integer, got {cycle}")
        records.append(
            RawRecord(
                unit_id=int(unit),
                cycle=int(cycle),
                settings=np.asarray(values[2 : 2 + N_SETTINGS], dtype=np.float64),
                sensors=np.asarray(values[2 + N_SETTINGS :], dtype=np.float64),
            )
        )
    return records


def group_by_engine(records: Sequence[RawRecord]) -> list[EngineSeries]:
    """Group records into one EngineSeries per unit, rows sorted by cycle.

    Cycles of each unit must be exactly 1..T: duplicates raise
    DuplicateCycleError, gaps raise MissingCycleError.
    """
    if not records:
        raise EmptyInputError("no records to group")
    by_unit: dict[int, dict[int, np.ndarray]] = {}
    for rec in records:
        unit_rows = by_unit.setdefault(rec.unit_id, {})
        if rec.cycle in unit_rows:
            raise DuplicateCycleError(f"unit {rec.unit_id}: cycle {rec.cycle} appears twice")
        unit_rows[rec.cycle] = rec.features
    series = []
    for unit_id in sorted(by_unit):
        unit_rows = by_unit[unit_id]
        total = len(unit_rows)
        missing = set(range(1, total + 1)) - set(unit_rows)
        if missing:
            raise MissingCycleError(f"unit {unit_id}: missing cycle {min(missing)} in 1..{total}")
        rows = np.stack([unit_rows[c] for c in range(1, total + 1)])
        series.append(EngineSeries(unit_id=unit_id, rows=rows))
    return series


def load_engine_series(path: str | Path) -> list[EngineSeries]:
    """Parse a CMAPSS text file and group it by engine."""
    with open(path, "r", encoding="utf-8") as fh:
        return group_by_engine(parse_cmapss(fh))


def fit_normalizer(train_series: Sequence[EngineSeries]) -> NormalizationStats:
    """Per-feature min and max pooled over all training rows."""
    if not train_series or all(s.total_cycles == 0 for s in train_series):
        raise EmptyInputError("no rows to fit normalization stats on")
    all_rows = np.concatenate([s.rows for s in train_series if s.total_cycles > 0])
    return NormalizationStats(
        feature_min=all_rows.min(axis=0),
        feature_max=all_rows.max(axis=0),
    )


def normalize(stats: NormalizationStats, rows: np.ndarray) -> np.ndarray:
    """Min-max scale rows (last axis = features) to the training range.

    out = (x - min) / (max - min); a degenerate feature (max == min) maps
    to 0. Out-of-range inputs fall outside [0, 1] and are not clamped.
    """
    span = stats.feature_max - stats.feature_min
    safe_span = np.where(span == 0.0, 1.0, span)
    out = (np.asarray(rows, dtype=np.float64) - stats.feature_min) / safe_span
    return np.where(span == 0.0, 0.0, out)


def compute_rul_targets(series: EngineSeries, rul_denominator: float) -> np.ndarray:
    """Normalized remaining life per cycle: (T - t) / rul_denominator."""
    if rul_denominator <= 0:
        raise InvalidDenominatorError(f"rul_denominator must be > 0, got {rul_denominator}")
    total = series.total_cycles
    t = np.arange(1, total + 1, dtype=np.float64)
    return (total - t) / rul_denominator


def default_rul_denominator(train_series: Sequence[EngineSeries]) -> float:
    """Global RUL scale: the largest (T - 1) over the training engines."""
    if not train_series:
        raise EmptyInputError("no engines")
    return float(max(s.total_cycles - 1 for s in train_series))


def window(
    series: EngineSeries,
    stats: NormalizationStats,
    rul_denominator: float,
    window_len: int = DEFAULT_WINDOW,
) -> tuple[np.ndarray, np.ndarray]:
    """Cut one engine into sliding windows of normalized rows.

    Emits one sequence per end cycle t in [window_len, T], paired with the
    normalized RUL at t. Engines shorter than window_len yield zero
    sequences. Returns (X, y) with X of shape (count, window_len, n_features).
    """
    if window_len < 1:
        raise ValueError(f"window_len must be >= 1, got {window_len}")
    total = series.total_cycles
    n_feat = series.rows.shape[1] if total else N_FEATURES
    count = max(0, total - window_len + 1)
    if count == 0:
        return (
            np.empty((0, window_len, n_feat), dtype=np.float64),
            np.empty((0,), dtype=np.float64),
        )
    norm_rows = normalize(stats, series.rows)
    targets = compute_rul_targets(series, rul_denominator)
    X = np.stack([norm_rows[start : start + window_len] for start in range(count)])
    y = targets[window_len - 1 :].copy()
    return X, y


def build_windows(
    series_list: Sequence[EngineSeries],
    stats: NormalizationStats,
    rul_denominator: float | None = None,
    window_len: int = DEFAULT_WINDOW,
) -> WindowedDataset:
    """Window every engine and concatenate into one dataset.

    Windows never span engine boundaries. When rul_denominator is None the
    global default max(T - 1) over `series_list` is used.
    """
    if rul_denominator is None:
        rul_denominator = default_rul_denominator(series_list)
    if rul_denominator <= 0:
        raise InvalidDenominatorError(f"rul_denominator must be > 0, got {rul_denominator}")
    xs, ys = [], []
    n_feat = N_FEATURES
    for series in series_list:
        X, y = window(series, stats, rul_denominator, window_len)
        n_feat = X.shape[2]
        if len(y):
            xs.append(X)
            ys.append(y)
    if xs:
        X_all = np.concatenate(xs)
        y_all = np.concatenate(ys)
    else:
        X_all = np.empty((0, window_len, n_feat), dtype=np.float64)
        y_all = np.empty((0,), dtype=np.float64)
    return WindowedDataset(
        X=X_all,
        y=y_all,
        window_len=window_len,
        n_features=n_feat,
        rul_denominator=float(rul_denominator),
    )


def train_val_split(
    dataset: WindowedDataset, val_fraction: float, seed: int
) -> tuple[WindowedDataset, WindowedDataset]:
    """Deterministic shuffled split into ceil(n*(1-f)) train + remainder val."""
    if not 0.0 < val_fraction < 1.0:
        raise InvalidFractionError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n = len(dataset)
    if n == 0:
        raise EmptyInputError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = math.ceil(n * (1.0 - val_fraction))
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:])


def save_normalizer(stats: NormalizationStats, rul_denominator: float, path: str | Path) -> None:
    """Persist stats as text: one `index min max` line per feature."""
    lines = [f"rul_denominator={float(rul_denominator)!r}"]
    for i, (lo, hi) in enumerate(zip(stats.feature_min, stats.feature_max)):
        lines.append(f"{i} {float(lo)!r} {float(hi)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_normalizer(path: str | Path) -> tuple[NormalizationStats, float]:
    """Inverse of save_normalizer."""
    text = Path(path).read_text(encoding="utf-8")
    denominator = None
    mins: dict[int, float] = {}
    maxs: dict[int, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("rul_denominator="):
            denominator = float(line.split("=", 1)[1])
            continue
        idx_s, lo_s, hi_s = line.split()
        mins[int(idx_s)] = float(lo_s)
        maxs[int(idx_s)] = float(hi_s)
    if denominator is None or not mins:
        raise ValueError(f"{path}: not a normalizer stats file")
    order = sorted(mins)
    stats = NormalizationStats(
        feature_min=np.array([mins[i] for i in order]),
        feature_max=np.array([maxs[i] for i in order]),
    )
    return stats, denominator


class CmapssPreprocessor(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit normalization on engine series, transform
    them into a WindowedDataset.

    Parameters
    ----------
    window_len : int, length of each input sequence.
    rul_denominator : float or None, RUL normalization scale; None derives
        the global default max(T - 1) from the series seen at fit time.
    """

    def __init__(self, window_len: int = DEFAULT_WINDOW, rul_denominator: float | None = None):
        self.window_len = window_len
        self.rul_denominator = rul_denominator

    def fit(self, series_list: Sequence[EngineSeries], y=None):
        self.stats_ = fit_normalizer(series_list)
        if self.rul_denominator is None:
            self.rul_denominator_ = default_rul_denominator(series_list)
        else:
            self.rul_denominator_ = float(self.rul_denominator)
        return self

    def transform(self, series_list: Sequence[EngineSeries]) -> WindowedDataset:
        check_is_fitted(self, "stats_")
        return build_windows(
            series_list, self.stats_, self.rul_denominator_, self.window_len
        )
