"""Minimal recurrent neural-network math on float64 numpy arrays.

LSTM and GRU cell forward passes with cached activations, full
backpropagation through time, a dense output layer with ReLU, MSE/MAE
losses, and the Adam update rule. Everything here is a pure function of its
inputs; only adam_step mutates (the parameter and state arrays it is given).

Cell equations (batch row-major; x_t is the input row, h the hidden state):

    LSTM:  i = sigmoid(W_i x + U_i h + b_i)      GRU:  z = sigmoid(W_z x + U_z h + b_z)
           f = sigmoid(W_f x + U_f h + b_f)            r = sigmoid(W_r x + U_r h + b_r)
           o = sigmoid(W_o x + U_o h + b_o)            hc = tanh(W_h x + U_h (r*h) + b_h)
           g = tanh(W_c x + U_c h + b_c)               h' = (1 - z)*h + z*hc
           c' = f*c + i*g
           h' = o * tanh(c')
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Literal

import numpy as np

LossKind = Literal["mse", "mae"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ShapeMismatchError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


class EmptyBatchError(ValueError):
    pass


class NonFiniteGradientError(FloatingPointError):
    """A gradient contains NaN/Inf; the update step is refused."""


class StaleCacheError(RuntimeError):
    """Backward called with a cache from a different forward pass."""


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids exp overflow for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class _TensorBag:
    """Shared helpers for the parameter dataclasses below."""

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def zeros_like(self):
        return type(self)(**{name: np.zeros_like(arr) for name, arr in self.tensors()})

    def copy(self):
        return type(self)(**{name: arr.copy() for name, arr in self.tensors()})


@dataclass
class LstmParams(_TensorBag):
    """Gate weights for one LSTM layer. W_* (hidden, input), U_* (hidden, hidden), b_* (hidden,)."""

    W_i: np.ndarray
    U_i: np.ndarray
    b_i: np.ndarray
    W_f: np.ndarray
    U_f: np.ndarray
    b_f: np.ndarray
    W_o: np.ndarray
    U_o: np.ndarray
    b_o: np.ndarray
    W_c: np.ndarray
    U_c: np.ndarray
    b_c: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_i.shape[0]


@dataclass
class GruParams(_TensorBag):
    """Update/reset/candidate weights for one GRU layer."""

    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_z.shape[0]


@dataclass
class DenseParams(_TensorBag):
    """W (out, in) and b (out,)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def output_dim(self) -> int:
        return self.W.shape[0]


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmParams:
    """Uniform [-k, k] init with k = 1/sqrt(fan_in); forget-gate bias 1."""
    kw = 1.0 / np.sqrt(input_dim)
    ku = 1.0 / np.sqrt(hidden_dim)
    def w():
        return rng.uniform(-kw, kw, size=(hidden_dim, input_dim))
    def u():
        return rng.uniform(-ku, ku, size=(hidden_dim, hidden_dim))
    # draw order fixed (gates i, f, o, c; W before U) so seeds reproduce exactly
    W_i, U_i = w(), u()
    W_f, U_f = w(), u()
    W_o, U_o = w(), u()
    W_c, U_c = w(), u()
    z = lambda: np.zeros(hidden_dim)
    return LstmParams(
        W_i=W_i, U_i=U_i, b_i=z(),
        W_f=W_f, U_f=U_f, b_f=np.ones(hidden_dim),
        W_o=W_o, U_o=U_o, b_o=z(),
        W_c=W_c, U_c=U_c, b_c=z(),
    )


def init_gru(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> GruParams:
    """Uniform [-k, k] init with k = 1/sqrt(fan_in); zero biases."""
    kw = 1.0 / np.sqrt(input_dim)
    ku = 1.0 / np.sqrt(hidden_dim)
    def w():
        return rng.uniform(-kw, kw, size=(hidden_dim, input_dim))
    def u():
        return rng.uniform(-ku, ku, size=(hidden_dim, hidden_dim))
    W_z, U_z = w(), u()
    W_r, U_r = w(), u()
    W_h, U_h = w(), u()
    z = lambda: np.zeros(hidden_dim)
    return GruParams(W_z=W_z, U_z=U_z, b_z=z(), W_r=W_r, U_r=U_r, b_r=z(), W_h=W_h, U_h=U_h, b_h=z())


def init_dense(input_dim: int, output_dim: int, rng: np.random.Generator) -> DenseParams:
    k = 1.0 / np.sqrt(input_dim)
    return DenseParams(W=rng.uniform(-k, k, size=(output_dim, input_dim)), b=np.zeros(output_dim))


def _check_seq(params, seq: np.ndarray) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 3:
        raise ShapeMismatchError(f"expected (batch, time, features) input, got shape {seq.shape}")
    if seq.shape[1] == 0:
        raise ShapeMismatchError("empty sequence")
    if seq.shape[2] != params.input_dim:
        raise ShapeMismatchError(
            f"sequence feature dim {seq.shape[2]} != layer input dim {params.input_dim}"
        )
    return seq


@dataclass
class LstmCache:
    seq: np.ndarray      # (B, T, F)
    h_prev: np.ndarray   # (T, B, H) hidden state entering each step
    c_prev: np.ndarray   # (T, B, H) cell state entering each step
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray        # candidate cell values tanh(...)
    c: np.ndarray        # post-step cell state
    tanh_c: np.ndarray


@dataclass
class GruCache:
    seq: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    hc: np.ndarray       # candidate state tanh(...)


def lstm_forward(
    params: LstmParams, seq: np.ndarray, return_sequences: bool = False
) -> tuple[np.ndarray, LstmCache]:
    """Run an LSTM layer over seq (batch, time, features); h_0 = c_0 = 0.

    Returns (hidden outputs, cache). Outputs are (B, T, H) when
    return_sequences else (B, H); the cache holds every per-step gate
    activation for the backward pass.
    """
    seq = _check_seq(params, seq)
    B, T, _ = seq.shape
    H = params.hidden_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    shape = (T, B, H)
    cache = LstmCache(
        seq=seq,
        h_prev=np.empty(shape), c_prev=np.empty(shape),
        i=np.empty(shape), f=np.empty(shape), o=np.empty(shape), g=np.empty(shape),
        c=np.empty(shape), tanh_c=np.empty(shape),
    )
    outputs = np.empty((B, T, H))
    for t in range(T):
        x = seq[:, t]
        i = _sigmoid(x @ params.W_i.T + h @ params.U_i.T + params.b_i)
        f = _sigmoid(x @ params.W_f.T + h @ params.U_f.T + params.b_f)
        o = _sigmoid(x @ params.W_o.T + h @ params.U_o.T + params.b_o)
        g = np.tanh(x @ params.W_c.T + h @ params.U_c.T + params.b_c)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.h_prev[t], cache.c_prev[t] = h, c
        cache.i[t], cache.f[t], cache.o[t], cache.g[t] = i, f, o, g
        cache.c[t], cache.tanh_c[t] = c_new, tc
        h = o * tc
        c = c_new
        outputs[:, t] = h
    return (outputs if return_sequences else outputs[:, -1].copy()), cache


def lstm_backward(
    params: LstmParams, cache: LstmCache, d_out: np.ndarray
) -> tuple[LstmParams, np.ndarray]:
    """BPTT through one LSTM layer.

    d_out is the upstream gradient per step, shape (B, T, H); pass zeros at
    steps without upstream signal. Returns (parameter gradients, gradient
    w.r.t. the input sequence).
    """
    seq = cache.seq
    B, T, _ = seq.shape
    H = params.hidden_dim
    if d_out.shape != (B, T, H):
        raise ShapeMismatchError(f"d_out shape {d_out.shape} != {(B, T, H)}")
    grads = params.zeros_like()
    d_seq = np.zeros_like(seq)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        i, f, o, g = cache.i[t], cache.f[t], cache.o[t], cache.g[t]
        tc = cache.tanh_c[t]
        dh = d_out[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dg = dc * i
        di = dc * g
        df = dc * cache.c_prev[t]
        # through the gate nonlinearities to the pre-activations
        d_ai = di * i * (1.0 - i)
        d_af = df * f * (1.0 - f)
        d_ao = do * o * (1.0 - o)
        d_ac = dg * (1.0 - g * g)
        x = seq[:, t]
        h_prev = cache.h_prev[t]
        grads.W_i += d_ai.T @ x
        grads.U_i += d_ai.T @ h_prev
        grads.b_i += d_ai.sum(axis=0)
        grads.W_f += d_af.T @ x
        grads.U_f += d_af.T @ h_prev
        grads.b_f += d_af.sum(axis=0)
        grads.W_o += d_ao.T @ x
        grads.U_o += d_ao.T @ h_prev
        grads.b_o += d_ao.sum(axis=0)
        grads.W_c += d_ac.T @ x
        grads.U_c += d_ac.T @ h_prev
        grads.b_c += d_ac.sum(axis=0)
        d_seq[:, t] = d_ai @ params.W_i + d_af @ params.W_f + d_ao @ params.W_o + d_ac @ params.W_c
        dh_next = d_ai @ params.U_i + d_af @ params.U_f + d_ao @ params.U_o + d_ac @ params.U_c
        dc_next = dc * f
    return grads, d_seq


def gru_forward(
    params: GruParams, seq: np.ndarray, return_sequences: bool = False
) -> tuple[np.ndarray, GruCache]:
    """Run a GRU layer over seq (batch, time, features); h_0 = 0."""
    seq = _check_seq(params, seq)
    B, T, _ = seq.shape
    H = params.hidden_dim
    h = np.zeros((B, H))
    shape = (T, B, H)
    cache = GruCache(
        seq=seq,
        h_prev=np.empty(shape),
        z=np.empty(shape), r=np.empty(shape), hc=np.empty(shape),
    )
    outputs = np.empty((B, T, H))
    for t in range(T):
        x = seq[:, t]
        z = _sigmoid(x @ params.W_z.T + h @ params.U_z.T + params.b_z)
        r = _sigmoid(x @ params.W_r.T + h @ params.U_r.T + params.b_r)
        hc = np.tanh(x @ params.W_h.T + (r * h) @ params.U_h.T + params.b_h)
        cache.h_prev[t] = h
        cache.z[t], cache.r[t], cache.hc[t] = z, r, hc
        h = (1.0 - z) * h + z * hc
        outputs[:, t] = h
    return (outputs if return_sequences else outputs[:, -1].copy()), cache


def gru_backward(
    params: GruParams, cache: GruCache, d_out: np.ndarray
) -> tuple[GruParams, np.ndarray]:
    """BPTT through one GRU layer; see lstm_backward for conventions."""
    seq = cache.seq
    B, T, _ = seq.shape
    H = params.hidden_dim
    if d_out.shape != (B, T, H):
        raise ShapeMismatchError(f"d_out shape {d_out.shape} != {(B, T, H)}")
    grads = params.zeros_like()
    d_seq = np.zeros_like(seq)
    dh_next = np.zeros((B, H))
    for t in reversed(range(T)):
        z, r, hc = cache.z[t], cache.r[t], cache.hc[t]
        h_prev = cache.h_prev[t]
        dh = d_out[:, t] + dh_next
        dz = dh * (hc - h_prev)
        dhc = dh * z
        dh_prev = dh * (1.0 - z)
        d_ah = dhc * (1.0 - hc * hc)
        # the candidate sees h_prev only through r*h_prev
        d_rh = d_ah @ params.U_h
        dr = d_rh * h_prev
        dh_prev += d_rh * r
        d_az = dz * z * (1.0 - z)
        d_ar = dr * r * (1.0 - r)
        x = seq[:, t]
        grads.W_z += d_az.T @ x
        grads.U_z += d_az.T @ h_prev
        grads.b_z += d_az.sum(axis=0)
        grads.W_r += d_ar.T @ x
        grads.U_r += d_ar.T @ h_prev
        grads.b_r += d_ar.sum(axis=0)
        grads.W_h += d_ah.T @ x
        grads.U_h += d_ah.T @ (r * h_prev)
        grads.b_h += d_ah.sum(axis=0)
        d_seq[:, t] = d_az @ params.W_z + d_ar @ params.W_r + d_ah @ params.W_h
        dh_next = dh_prev + d_az @ params.U_z + d_ar @ params.U_r
    return grads, d_seq


@dataclass
class DenseCache:
    x: np.ndarray
    z: np.ndarray  # pre-activation Wx + b


def dense_relu_forward(params: DenseParams, x: np.ndarray) -> tuple[np.ndarray, DenseCache]:
    """out = max(0, x W^T + b) for a batch of rows x (B, in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeMismatchError(f"input shape {x.shape} incompatible with W {params.W.shape}")
    z = x @ params.W.T + params.b
    return np.maximum(z, 0.0), DenseCache(x=x, z=z)


def dense_relu_backward(
    params: DenseParams, cache: DenseCache, d_out: np.ndarray
) -> tuple[DenseParams, np.ndarray]:
    dz = d_out * (cache.z > 0.0)
    grads = DenseParams(W=dz.T @ cache.x, b=dz.sum(axis=0))
    return grads, dz @ params.W


def loss(kind: LossKind, predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Scalar loss and its gradient w.r.t. each prediction.

    mse: mean((p-y)^2), gradient 2(p-y)/n.
    mae: mean(|p-y|), subgradient sign(p-y)/n (0 where p == y).
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise LengthMismatchError(f"predictions shape {p.shape} != targets shape {y.shape}")
    n = p.size
    if n == 0:
        raise EmptyBatchError("empty batch")
    diff = p - y
    if kind == "mse":
        return float(np.mean(diff * diff)), 2.0 * diff / n
    if kind == "mae":
        return float(np.mean(np.abs(diff))), np.sign(diff) / n
    raise ValueError(f"unknown loss kind {kind!r}")


def regression_metrics(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
    """(mse, mae) of predictions against targets."""
    diff = np.asarray(predictions, dtype=np.float64) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))


@dataclass
class AdamState:
    """First/second moment estimates per named parameter plus the step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.items()},
            v={name: np.zeros_like(arr) for name, arr in params.items()},
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            t=self.t, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place on params and state.

    Refuses the whole step (raising NonFiniteGradientError, nothing mutated)
    if any gradient entry is NaN/Inf. lr = 0 is allowed and leaves the
    parameters (but not the moments) untouched.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name}")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
