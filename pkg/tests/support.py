"""Shared helpers: synthetic engine data, file writers, a gradient checker."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from rulkit import EngineSeries, ModelSpec, build_model
from rulkit import model as model_mod
from rulkit import nn

N_FEATURES = 24


def make_synthetic_series(
    n_engines: int = 20,
    t_range: tuple[int, int] = (60, 120),
    noise: float = 0.02,
    seed: int = 101,
    n_constant_sensors: int = 3,
) -> list[EngineSeries]:
    """Run-to-failure engines whose sensors degrade linearly over their life.

    Sensor j reads alpha_j + offset_engine + beta_j * (1 - t/T) + N(0, noise):
    linear degradation from health (wear t/T = 0) to failure (wear 1), with
    per-dataset alpha/beta so the signal is consistent across engines and a
    small per-engine offset so single rows do not give the answer away. The
    last `n_constant_sensors` sensors are constant to exercise degenerate
    normalization; settings are constants plus noise.
    """
    rng = np.random.default_rng(seed)
    n_linear = 21 - n_constant_sensors
    alpha = rng.uniform(0.0, 0.2, size=n_linear)
    beta = rng.uniform(0.15, 0.4, size=n_linear) * rng.choice([-1.0, 1.0], size=n_linear)
    series = []
    for unit in range(1, n_engines + 1):
        total = int(rng.integers(t_range[0], t_range[1] + 1))
        wear = np.arange(1, total + 1) / total
        rows = np.empty((total, N_FEATURES))
        for j in range(3):
            rows[:, j] = 0.5 + 0.1 * j + rng.normal(0.0, noise, size=total)
        for j in range(n_linear):
            offset = rng.normal(0.0, 0.05)
            rows[:, 3 + j] = alpha[j] + offset + beta[j] * (1.0 - wear) + rng.normal(0.0, noise, size=total)
        for j in range(n_constant_sensors):
            rows[:, 3 + n_linear + j] = 7.0 + j
        series.append(EngineSeries(unit_id=unit, rows=rows))
    return series


def write_cmapss_file(series: list[EngineSeries], path: Path) -> None:
    """Serialize engine series in the 26-column CMAPSS text layout."""
    lines = []
    for s in series:
        for t in range(1, s.total_cycles + 1):
            values = " ".join(repr(float(v)) for v in s.rows[t - 1])
            lines.append(f"{s.unit_id} {t} {values}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def randomized_model(cell_type: str, input_dim: int, hidden: tuple[int, int],
                     window_len: int, seed: int):
    """Model with all parameters redrawn uniformly; dense bias lifted so the
    ReLU output is strictly active (gradient checks must not sit on the kink)."""
    spec = ModelSpec(cell_type=cell_type, hidden_dims=hidden,
                     window_len=window_len, n_features=input_dim, init_seed=seed)
    m = build_model(spec)
    rng = np.random.default_rng(seed + 1000)
    for p in model_mod.named_params(m).values():
        p[...] = rng.uniform(-0.6, 0.6, size=p.shape)
    return m


def _lift_output(m, X) -> None:
    # shift the single output bias so every pre-activation clears the kink
    _, cache = model_mod.forward_batch(m, X)
    z_min = cache.dense.z.min()
    if z_min < 1e-3:
        m.dense.b += 1e-3 - z_min
    m.version += 1


def max_gradient_error(cell_type: str, seed: int, step: float = 1e-5) -> float:
    """Max relative error between BPTT and central finite differences.

    Uses a small random configuration (input_dim <= 4, hidden_dim <= 5,
    T <= 6) with MSE loss. The numeric side re-runs the full forward pass
    per perturbed coordinate and never touches the analytic code path.
    """
    rng = np.random.default_rng(seed)
    input_dim = int(rng.integers(1, 5))
    hidden = (int(rng.integers(1, 6)), int(rng.integers(1, 6)))
    window_len = int(rng.integers(1, 7))
    batch = int(rng.integers(1, 4))
    m = randomized_model(cell_type, input_dim, hidden, window_len, seed)
    X = rng.normal(size=(batch, window_len, input_dim))
    y = rng.uniform(size=batch)
    _lift_output(m, X)

    preds, cache = model_mod.forward_batch(m, X)
    _, d_pred = nn.loss("mse", preds, y)
    grads = model_mod.backward_batch(m, cache, d_pred)

    def loss_at() -> float:
        return nn.loss("mse", model_mod.predict_batch(m, X), y)[0]

    worst = 0.0
    for name, p in model_mod.named_params(m).items():
        analytic = grads[name]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            upper = loss_at()
            p[idx] = orig - step
            lower = loss_at()
            p[idx] = orig
            numeric = (upper - lower) / (2.0 * step)
            rel = abs(numeric - analytic[idx]) / max(abs(numeric), abs(analytic[idx]), 1e-8)
            worst = max(worst, rel)
    return worst
