"""RUL network assembly and training.

The architecture follows a fixed 3-layer stack: a recurrent layer that
returns sequences, a second recurrent layer that returns its final hidden
state, and a 1-wide dense output with ReLU so predicted life is never
negative. Training is epoch-based mini-batch Adam; metrics accumulate over
the training batches of each epoch and validation is scored after the epoch.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import nn
from .data import WindowedDataset

CellType = Literal["lstm", "gru"]

MODEL_MAGIC = "RULNET 1"
_SEED_MOD = 2 ** 63


class InvalidSpecError(ValueError):
    pass


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Shape of the network: cell kind, layer widths, input window."""

    cell_type: CellType = "lstm"
    hidden_dims: tuple[int, int] = (64, 64)
    output_dim: int = 1
    window_len: int = 20
    n_features: int = 24
    init_seed: int = 0


@dataclass
class Model:
    """Parameter set for one network plus its optimizer state.

    `version` increments on every parameter update and guards against
    reusing forward caches across updates.
    """

    spec: ModelSpec
    layer1: nn.LstmParams | nn.GruParams
    layer2: nn.LstmParams | nn.GruParams
    dense: nn.DenseParams
    adam: nn.AdamState
    epochs_trained: int = 0
    version: int = 0


@dataclass
class TrainConfig:
    learning_rate: float
    batch_size: int
    loss: nn.LossKind = "mae"
    shuffle_seed: int = 0


@dataclass
class EpochMetrics:
    """Per-epoch train metrics, with validation metrics when a split exists."""

    epoch: int
    train_mse: float
    train_mae: float
    val_mse: float | None = None
    val_mae: float | None = None


def _validate_spec(spec: ModelSpec) -> None:
    if spec.cell_type not in ("lstm", "gru"):
        raise InvalidSpecError(f"cell_type must be 'lstm' or 'gru', got {spec.cell_type!r}")
    if len(spec.hidden_dims) != 2 or any(h < 1 for h in spec.hidden_dims):
        raise InvalidSpecError(f"hidden_dims must be two positive ints, got {spec.hidden_dims}")
    if spec.output_dim != 1:
        raise InvalidSpecError("output layer is 1 neuron wide")
    if spec.window_len < 1 or spec.n_features < 1:
        raise InvalidSpecError("window_len and n_features must be positive")


def build_model(spec: ModelSpec) -> Model:
    """Deterministically initialize a model under spec.init_seed."""
    _validate_spec(spec)
    rng = np.random.default_rng(spec.init_seed % _SEED_MOD)
    init_cell = nn.init_lstm if spec.cell_type == "lstm" else nn.init_gru
    h1, h2 = spec.hidden_dims
    layer1 = init_cell(spec.n_features, h1, rng)
    layer2 = init_cell(h1, h2, rng)
    dense = nn.init_dense(h2, spec.output_dim, rng)
    return Model(spec=spec, layer1=layer1, layer2=layer2, dense=dense,
                 adam=nn.AdamState.for_params(_named_tensors(layer1, layer2, dense)))


def clone_model(m: Model) -> Model:
    """Deep copy; training the clone never touches the original."""
    return Model(
        spec=m.spec,
        layer1=m.layer1.copy(),
        layer2=m.layer2.copy(),
        dense=m.dense.copy(),
        adam=m.adam.copy(),
        epochs_trained=m.epochs_trained,
        version=m.version,
    )


def _named_tensors(layer1, layer2, dense) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for prefix, bag in (("layer1", layer1), ("layer2", layer2), ("dense", dense)):
        for name, arr in bag.tensors():
            out[f"{prefix}.{name}"] = arr
    return out


def named_params(m: Model) -> dict[str, np.ndarray]:
    """Live parameter tensors in the fixed serialization order."""
    return _named_tensors(m.layer1, m.layer2, m.dense)


@dataclass
class ModelCache:
    layer1: nn.LstmCache | nn.GruCache
    layer2: nn.LstmCache | nn.GruCache
    dense: nn.DenseCache
    version: int


def _check_batch(m: Model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != m.spec.window_len or X.shape[2] != m.spec.n_features:
        raise nn.ShapeMismatchError(
            f"expected (batch, {m.spec.window_len}, {m.spec.n_features}) input, got {X.shape}"
        )
    return X


def forward_batch(m: Model, X: np.ndarray) -> tuple[np.ndarray, ModelCache]:
    """Predictions (batch,) for windows X (batch, window_len, n_features)."""
    X = _check_batch(m, X)
    fwd = nn.lstm_forward if m.spec.cell_type == "lstm" else nn.gru_forward
    h1_seq, c1 = fwd(m.layer1, X, return_sequences=True)
    h2, c2 = fwd(m.layer2, h1_seq, return_sequences=False)
    out, cd = nn.dense_relu_forward(m.dense, h2)
    return out[:, 0], ModelCache(layer1=c1, layer2=c2, dense=cd, version=m.version)


def backward_batch(m: Model, cache: ModelCache, d_pred: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every parameter given d(loss)/d(prediction)."""
    if cache.version != m.version:
        raise nn.StaleCacheError("forward cache predates a parameter update")
    bwd = nn.lstm_backward if m.spec.cell_type == "lstm" else nn.gru_backward
    g_dense, dh2 = nn.dense_relu_backward(m.dense, cache.dense, np.asarray(d_pred)[:, None])
    B = dh2.shape[0]
    T = cache.layer1.seq.shape[1]
    # layer2 only emitted its final hidden state
    d_h2seq = np.zeros((B, T, m.spec.hidden_dims[1]))
    d_h2seq[:, -1] = dh2
    g2, d_h1seq = bwd(m.layer2, cache.layer2, d_h2seq)
    g1, _ = bwd(m.layer1, cache.layer1, d_h1seq)
    grads: dict[str, np.ndarray] = {}
    for prefix, bag in (("layer1", g1), ("layer2", g2), ("dense", g_dense)):
        for name, arr in bag.tensors():
            grads[f"{prefix}.{name}"] = arr
    return grads


def train_epoch(m: Model, train: WindowedDataset, cfg: TrainConfig) -> EpochMetrics:
    """One shuffled pass over the training sequences with Adam updates.

    The shuffle seed advances with the model's epoch counter so repeated
    epochs see different batch orders yet whole runs reproduce exactly.
    Reported metrics are means over every batch's pre-update predictions.
    """
    n = len(train)
    if n == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if cfg.batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {cfg.batch_size}")
    rng = np.random.default_rng((cfg.shuffle_seed + m.epochs_trained) % _SEED_MOD)
    order = rng.permutation(n)
    sq_sum = 0.0
    abs_sum = 0.0
    params = named_params(m)
    for start in range(0, n, cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        preds, cache = forward_batch(m, train.X[idx])
        diff = preds - train.y[idx]
        sq_sum += float(np.sum(diff * diff))
        abs_sum += float(np.sum(np.abs(diff)))
        _, d_pred = nn.loss(cfg.loss, preds, train.y[idx])
        grads = backward_batch(m, cache, d_pred)
        nn.adam_step(m.adam, params, grads, cfg.learning_rate)
        m.version += 1
    m.epochs_trained += 1
    return EpochMetrics(epoch=m.epochs_trained, train_mse=sq_sum / n, train_mae=abs_sum / n)


def evaluate(m: Model, data: WindowedDataset, batch_size: int = 512) -> tuple[float, float]:
    """(mse, mae) over all sequences; never mutates the model."""
    if len(data) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    preds = predict_batch(m, data.X, batch_size=batch_size)
    return nn.regression_metrics(preds, data.y)


def predict_batch(m: Model, X: np.ndarray, batch_size: int = 512) -> np.ndarray:
    X = _check_batch(m, X)
    chunks = [forward_batch(m, X[i : i + batch_size])[0] for i in range(0, X.shape[0], batch_size)]
    return np.concatenate(chunks) if chunks else np.empty(0)


def predict(m: Model, seq: np.ndarray) -> float:
    """Normalized RUL (>= 0) for a single window (window_len, n_features)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise nn.ShapeMismatchError(f"expected a single (window_len, n_features) window, got {seq.shape}")
    preds, _ = forward_batch(m, seq[None])
    return float(preds[0])


def save_model(m: Model, path: str | Path) -> None:
    """Write the model as a text header plus raw little-endian float64 tensors.

    Tensor order is the named_params order: layer1, layer2, dense, each
    bag's dataclass field order. Optimizer moments are not stored; a loaded
    model starts with a fresh Adam state.
    """
    lines = [
        MODEL_MAGIC,
        f"cell_type={m.spec.cell_type}",
        f"n_features={m.spec.n_features}",
        "hidden_dims=" + ",".join(str(h) for h in m.spec.hidden_dims),
        f"output_dim={m.spec.output_dim}",
        f"window_len={m.spec.window_len}",
        f"init_seed={m.spec.init_seed}",
        f"epochs_trained={m.epochs_trained}",
        "---",
    ]
    header = ("\n".join(lines) + "\n").encode("ascii")
    blobs = [arr.astype("<f8", copy=False).tobytes() for arr in named_params(m).values()]
    Path(path).write_bytes(header + b"".join(blobs))


def load_model(path: str | Path) -> Model:
    raw = Path(path).read_bytes()
    sep = raw.index(b"---\n")
    header = raw[: sep].decode("ascii").splitlines()
    body = raw[sep + 4 :]
    if not header or header[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a {MODEL_MAGIC} model file")
    kv = dict(line.split("=", 1) for line in header[1:])
    spec = ModelSpec(
        cell_type=kv["cell_type"],
        hidden_dims=tuple(int(h) for h in kv["hidden_dims"].split(",")),
        output_dim=int(kv["output_dim"]),
        window_len=int(kv["window_len"]),
        n_features=int(kv["n_features"]),
        init_seed=int(kv["init_seed"]),
    )
    model = build_model(spec)
    model.epochs_trained = int(kv["epochs_trained"])
    offset = 0
    for name, arr in named_params(model).items():
        count = arr.size
        chunk = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
        arr[...] = chunk.reshape(arr.shape)
        offset += count * 8
    if offset != len(body):
        raise ValueError(f"{path}: trailing bytes after parameter tensors")
    return model


def _check_windows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"X must have shape (n_samples, window_len, n_features), got {X.shape}")
    return X


class RulRegressor(BaseEstimator, RegressorMixin):
    """Recurrent RUL regressor with the estimator API.

    fit(X, y) expects X of shape (n_samples, window_len, n_features) and
    normalized targets y in [0, 1]; predict returns non-negative normalized
    RUL values. Training history is kept in `history_` (one EpochMetrics per
    epoch, with validation metrics when validation_data is passed to fit).
    """

    def __init__(
        self,
        cell_type: CellType = "lstm",
        hidden_dims: Sequence[int] = (64, 64),
        epochs: int = 10,
        learning_rate: float = 1e-3,
        batch_size: int = 64,
        loss: nn.LossKind = "mae",
        seed: int = 0,
    ):
        self.cell_type = cell_type
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.loss = loss
        self.seed = seed

    def fit(self, X, y, validation_data: tuple[np.ndarray, np.ndarray] | None = None):
        X = _check_windows(X)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y shape {y.shape} does not match X ({X.shape[0]} samples)")
        if X.shape[0] == 0:
            raise EmptyDatasetError("cannot fit on an empty dataset")
        spec = ModelSpec(
            cell_type=self.cell_type,
            hidden_dims=tuple(self.hidden_dims),
            window_len=X.shape[1],
            n_features=X.shape[2],
            init_seed=self.seed,
        )
        self.model_ = build_model(spec)
        train = WindowedDataset(X=X, y=y, window_len=X.shape[1], n_features=X.shape[2],
                                rul_denominator=1.0)
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            loss=self.loss,
            shuffle_seed=self.seed,
        )
        val = None
        if validation_data is not None:
            Xv = _check_windows(validation_data[0])
            yv = np.asarray(validation_data[1], dtype=np.float64)
            val = WindowedDataset(X=Xv, y=yv, window_len=Xv.shape[1], n_features=Xv.shape[2],
                                  rul_denominator=1.0)
        self.history_ = []
        for _ in range(self.epochs):
            metrics = train_epoch(self.model_, train, cfg)
            if val is not None:
                metrics.val_mse, metrics.val_mae = evaluate(self.model_, val)
            self.history_.append(metrics)
        self.n_features_in_ = X.shape[2]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return predict_batch(self.model_, _check_windows(X))
