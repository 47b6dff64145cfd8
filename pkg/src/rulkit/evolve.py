"""Genetic tuning of learning rate and batch size.

Each generation every individual trains one epoch with its own
hyper-parameters; fitness is the change in validation MAE across the
generation (delta = current - previous, most negative is best). The top
individuals pass to the next generation untouched, the remaining slots are
children: a 4-combination crossover of two random parents followed by a
+-10% learning-rate mutation with probability 2/3. Child models clone the
better-ranked parent so lineages keep training instead of restarting.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .data import WindowedDataset, train_val_split
from .model import (
    CellType,
    EpochMetrics,
    Model,
    ModelSpec,
    TrainConfig,
    build_model,
    clone_model,
    evaluate,
    predict_batch,
    train_epoch,
)

DEFAULT_LR_POOL = (1e-2, 5e-3, 1e-3, 5e-4, 1e-4)
DEFAULT_BATCH_POOL = (32, 64, 128, 256, 512)

_SEED_MOD = 2 ** 63
# stream tags keep the init / per-individual training / reproduction draws independent
_STREAM_INIT = 0
_STREAM_TRAIN = 1
_STREAM_REPRO = 2


class InvalidConfigError(ValueError):
    pass


class UnevaluatedPopulationError(RuntimeError):
    pass


class InsufficientParentsError(ValueError):
    pass


@dataclass(frozen=True)
class Genome:
    """The evolved hyper-parameters."""

    learning_rate: float
    batch_size: int


@dataclass
class Individual:
    """A genome bound to a model plus its loss trajectory."""

    genome: Genome
    model: Model
    loss_prev: float = 0.0
    loss_current: float | None = None
    delta_loss: float | None = None
    metrics: EpochMetrics | None = None  # train/val metrics of the last epoch


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 10
    elite_count: int = 2
    generations: int = 10
    lr_pool: tuple[float, ...] = DEFAULT_LR_POOL
    batch_pool: tuple[int, ...] = DEFAULT_BATCH_POOL
    seed: int = 0


@dataclass(frozen=True)
class IndividualReport:
    individual: int  # 1-based position in the generation
    learning_rate: float
    batch_size: int
    train_mse: float
    train_mae: float
    val_mse: float
    val_mae: float
    delta_loss: float


@dataclass(frozen=True)
class GenerationReport:
    generation: int  # 1-based
    individuals: tuple[IndividualReport, ...]
    best_index: int  # 1-based, lowest validation MAE


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed % _SEED_MOD, *key])


def _validate_config(cfg: GAConfig) -> None:
    if cfg.population_size < 1:
        raise InvalidConfigError(f"population_size must be >= 1, got {cfg.population_size}")
    if not 0 <= cfg.elite_count < cfg.population_size:
        raise InvalidConfigError(
            f"elite_count must be in [0, population_size), got {cfg.elite_count}"
        )
    if cfg.generations < 1:
        raise InvalidConfigError(f"generations must be >= 1, got {cfg.generations}")
    if not cfg.lr_pool or any(lr <= 0 for lr in cfg.lr_pool):
        raise InvalidConfigError("lr_pool must be nonempty positive reals")
    if not cfg.batch_pool or any(b < 1 for b in cfg.batch_pool):
        raise InvalidConfigError("batch_pool must be nonempty positive ints")


def init_population(base: Model, cfg: GAConfig) -> list[Individual]:
    """Clone the base model per slot and draw genomes from the pools.

    Every individual starts from identical weights so no genome gets a head
    start; generation-1 previous losses are all 0.
    """
    _validate_config(cfg)
    rng = _stream(cfg.seed, _STREAM_INIT)
    population = []
    for _ in range(cfg.population_size):
        genome = Genome(
            learning_rate=float(cfg.lr_pool[rng.integers(len(cfg.lr_pool))]),
            batch_size=int(cfg.batch_pool[rng.integers(len(cfg.batch_pool))]),
        )
        population.append(Individual(genome=genome, model=clone_model(base), loss_prev=0.0))
    return population


def evaluate_generation(
    population: list[Individual],
    train: WindowedDataset,
    val: WindowedDataset,
    cfg: GAConfig,
    generation: int,
) -> list[Individual]:
    """Train every individual one epoch and score its delta loss.

    loss_current is the post-epoch validation MAE; delta_loss =
    loss_current - loss_prev. Each individual shuffles with its own stream
    derived from (cfg.seed, generation, index) so parallel training cannot
    change results.
    """
    for index, ind in enumerate(population):
        shuffle_seed = int(_stream(cfg.seed, _STREAM_TRAIN, generation, index).integers(_SEED_MOD))
        train_cfg = TrainConfig(
            learning_rate=ind.genome.learning_rate,
            batch_size=ind.genome.batch_size,
            loss="mae",
            shuffle_seed=shuffle_seed,
        )
        metrics = train_epoch(ind.model, train, train_cfg)
        metrics.val_mse, metrics.val_mae = evaluate(ind.model, val)
        ind.metrics = metrics
        ind.loss_current = metrics.val_mae
        ind.delta_loss = ind.loss_current - ind.loss_prev
    return population


def select(population: list[Individual], elite_count: int) -> tuple[list[Individual], list[Individual]]:
    """Rank by delta loss ascending (ties keep population order).

    Returns (elites, full ranked list); the ranked list is the parent pool.
    """
    if any(ind.delta_loss is None for ind in population):
        raise UnevaluatedPopulationError("population has unevaluated individuals")
    order = sorted(range(len(population)), key=lambda i: (population[i].delta_loss, i))
    ranked = [population[i] for i in order]
    return ranked[:elite_count], ranked


def crossover(parent_a: Genome, parent_b: Genome, rng: np.random.Generator) -> Genome:
    """One of the four (lr, batch) combinations of the parents, uniformly."""
    lr = (parent_a if rng.integers(2) == 0 else parent_b).learning_rate
    batch = (parent_a if rng.integers(2) == 0 else parent_b).batch_size
    return Genome(learning_rate=lr, batch_size=batch)


def mutate(genome: Genome, rng: np.random.Generator, factor: int | None = None) -> Genome:
    """Scale the learning rate by a factor of the draw {-1, 0, +1} tenths.

    lr <- lr + factor * lr/10, i.e. exactly lr, 0.9*lr or 1.1*lr. The
    `factor` argument overrides the draw (test hook). Batch size never
    mutates.
    """
    if factor is None:
        factor = int(rng.integers(-1, 2))
    if factor == 0:
        return genome
    new_lr = genome.learning_rate * (1.0 + factor * 0.1)
    assert new_lr > 0.0
    return replace(genome, learning_rate=new_lr)


def next_generation(
    population: list[Individual], cfg: GAConfig, rng: np.random.Generator
) -> list[Individual]:
    """Elites pass unchanged; the rest are crossover + mutation children.

    A child's model is a clone of the better-ranked of its two parents and
    its previous loss continues from that parent, so delta loss keeps
    measuring learning progress along the lineage.
    """
    if len(population) < 2:
        raise InsufficientParentsError("need at least two individuals to mate")
    elites, _ = select(population, cfg.elite_count)
    new_population = [
        Individual(genome=e.genome, model=e.model, loss_prev=e.loss_current)
        for e in elites
    ]
    for _ in range(cfg.population_size - cfg.elite_count):
        ia, ib = rng.choice(len(population), size=2, replace=False)
        pa, pb = population[ia], population[ib]
        child_genome = mutate(crossover(pa.genome, pb.genome, rng), rng)
        better = pa if (pa.delta_loss, ia) <= (pb.delta_loss, ib) else pb
        new_population.append(
            Individual(
                genome=child_genome,
                model=clone_model(better.model),
                loss_prev=better.loss_current,
            )
        )
    return new_population


def _report(generation: int, population: list[Individual]) -> GenerationReport:
    rows = []
    for i, ind in enumerate(population, start=1):
        m = ind.metrics
        rows.append(
            IndividualReport(
                individual=i,
                learning_rate=ind.genome.learning_rate,
                batch_size=ind.genome.batch_size,
                train_mse=m.train_mse,
                train_mae=m.train_mae,
                val_mse=m.val_mse,
                val_mae=m.val_mae,
                delta_loss=ind.delta_loss,
            )
        )
    best = min(range(len(population)), key=lambda i: (population[i].loss_current, i))
    return GenerationReport(generation=generation, individuals=tuple(rows), best_index=best + 1)


def run_evolution(
    base_spec: ModelSpec,
    cfg: GAConfig,
    train: WindowedDataset,
    val: WindowedDataset,
) -> tuple[list[GenerationReport], Individual]:
    """Full evolution loop: evaluate -> select -> reproduce, cfg.generations times.

    Returns the per-generation reports and the best individual of the final
    generation (lowest validation MAE, ties to the lower index).
    """
    _validate_config(cfg)
    base = build_model(base_spec)
    population = init_population(base, cfg)
    reports = []
    for generation in range(1, cfg.generations + 1):
        evaluate_generation(population, train, val, cfg, generation)
        reports.append(_report(generation, population))
        if generation < cfg.generations:
            rng = _stream(cfg.seed, _STREAM_REPRO, generation)
            population = next_generation(population, cfg, rng)
    best = min(range(len(population)), key=lambda i: (population[i].loss_current, i))
    return reports, population[best]


class GeneticTuner(BaseEstimator, RegressorMixin):
    """Estimator wrapper around the evolution loop.

    fit(X, y) evolves (learning rate, batch size) over `generations`
    generations of `population_size` individuals and keeps the best final
    individual's model for predict. Unless validation_data is passed, a
    deterministic `val_fraction` split of (X, y) provides the fitness set.
    """

    def __init__(
        self,
        cell_type: CellType = "lstm",
        hidden_dims: Sequence[int] = (64, 64),
        population_size: int = 10,
        elite_count: int = 2,
        generations: int = 10,
        lr_pool: Sequence[float] = DEFAULT_LR_POOL,
        batch_pool: Sequence[int] = DEFAULT_BATCH_POOL,
        val_fraction: float = 0.2,
        seed: int = 0,
    ):
        self.cell_type = cell_type
        self.hidden_dims = hidden_dims
        self.population_size = population_size
        self.elite_count = elite_count
        self.generations = generations
        self.lr_pool = lr_pool
        self.batch_pool = batch_pool
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y, validation_data: tuple[np.ndarray, np.ndarray] | None = None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 3 or y.shape != (X.shape[0],):
            raise ValueError("X must be (n, window_len, n_features) with matching y")
        dataset = WindowedDataset(X=X, y=y, window_len=X.shape[1], n_features=X.shape[2],
                                  rul_denominator=1.0)
        if validation_data is None:
            train, val = train_val_split(dataset, self.val_fraction, self.seed)
        else:
            Xv = np.asarray(validation_data[0], dtype=np.float64)
            yv = np.asarray(validation_data[1], dtype=np.float64)
            train = dataset
            val = WindowedDataset(X=Xv, y=yv, window_len=Xv.shape[1], n_features=Xv.shape[2],
                                  rul_denominator=1.0)
        spec = ModelSpec(
            cell_type=self.cell_type,
            hidden_dims=tuple(self.hidden_dims),
            window_len=X.shape[1],
            n_features=X.shape[2],
            init_seed=self.seed,
        )
        cfg = GAConfig(
            population_size=self.population_size,
            elite_count=self.elite_count,
            generations=self.generations,
            lr_pool=tuple(self.lr_pool),
            batch_pool=tuple(self.batch_pool),
            seed=self.seed,
        )
        self.reports_, best = run_evolution(spec, cfg, train, val)
        self.best_model_ = best.model
        self.best_genome_ = best.genome
        self.n_features_in_ = X.shape[2]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "best_model_")
        return predict_batch(self.best_model_, np.asarray(X, dtype=np.float64))
