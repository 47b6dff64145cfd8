"""Command-line entry point.

Subcommands: preprocess, train, evolve, predict, compare. Flag values
override config-file values (`key=value` lines, `ga.`-dotted keys for the
evolution block); the effective configuration is echoed to
`<output-dir>/run_manifest.txt`. `RUL_SEED` provides the seed when neither
a flag nor the config file does.

Exit codes: 0 success, 2 I/O or data-format failure, 3 domain error
(unknown engine, bad config), 4 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import nn
from .data import (
    DuplicateCycleError,
    EmptyInputError,
    MalformedRowError,
    MissingCycleError,
    NonNumericFieldError,
    build_windows,
    default_rul_denominator,
    fit_normalizer,
    load_engine_series,
    load_normalizer,
    save_normalizer,
    train_val_split,
)
from .evolve import DEFAULT_BATCH_POOL, DEFAULT_LR_POOL, GAConfig, InvalidConfigError, run_evolution
from .model import ModelSpec, TrainConfig, build_model, evaluate, load_model, save_model, train_epoch
from .report import ModelScore, emit_comparison, emit_epoch_table, emit_generation_table, emit_prediction_trace

EXIT_OK = 0
EXIT_IO = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4

NORMALIZER_FILE = "normalizer.txt"
MANIFEST_FILE = "run_manifest.txt"


class UnknownEngineError(ValueError):
    pass


@dataclass
class RunConfig:
    data_path: str | None = None
    output_dir: str = "."
    cell_type: str = "lstm"
    window_len: int = 20
    val_fraction: float = 0.2
    epochs: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0
    ga_population_size: int = 10
    ga_elite_count: int = 2
    ga_generations: int = 10
    ga_lr_pool: tuple[float, ...] = DEFAULT_LR_POOL
    ga_batch_pool: tuple[int, ...] = DEFAULT_BATCH_POOL


def _parse_float_pool(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_int_pool(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


# config-file key -> (RunConfig attribute, parser)
_CONFIG_KEYS = {
    "data_path": ("data_path", str),
    "output_dir": ("output_dir", str),
    "cell_type": ("cell_type", str),
    "window_len": ("window_len", int),
    "val_fraction": ("val_fraction", float),
    "epochs": ("epochs", int),
    "learning_rate": ("learning_rate", float),
    "batch_size": ("batch_size", int),
    "seed": ("seed", int),
    "ga.population_size": ("ga_population_size", int),
    "ga.elite_count": ("ga_elite_count", int),
    "ga.generations": ("ga_generations", int),
    "ga.lr_pool": ("ga_lr_pool", _parse_float_pool),
    "ga.batch_pool": ("ga_batch_pool", _parse_int_pool),
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < command-line flags; RUL_SEED backs the seed."""
    cfg = RunConfig()
    seed_set = False
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise InvalidConfigError(f"unknown config key {key!r}")
            attr, parse = _CONFIG_KEYS[key]
            try:
                setattr(cfg, attr, parse(raw))
            except ValueError:
                raise InvalidConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
            if attr == "seed":
                seed_set = True
    flag_to_attr = {
        "data": "data_path",
        "output_dir": "output_dir",
        "cell": "cell_type",
        "window_len": "window_len",
        "val_fraction": "val_fraction",
        "epochs": "epochs",
        "learning_rate": "learning_rate",
        "batch_size": "batch_size",
        "seed": "seed",
        "population": "ga_population_size",
        "elites": "ga_elite_count",
        "generations": "ga_generations",
        "lr_pool": "ga_lr_pool",
        "batch_pool": "ga_batch_pool",
    }
    for flag, attr in flag_to_attr.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
            if attr == "seed":
                seed_set = True
    if not seed_set and os.environ.get("RUL_SEED"):
        cfg.seed = int(os.environ["RUL_SEED"])
    return cfg


def write_manifest(cfg: RunConfig, outdir: Path) -> None:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        key = f.name.replace("ga_", "ga.", 1) if f.name.startswith("ga_") else f.name
        lines.append(f"{key}={value}")
    (outdir / MANIFEST_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require_data(cfg: RunConfig) -> str:
    if not cfg.data_path:
        raise InvalidConfigError("no data path given (use --data or a config file)")
    return cfg.data_path


def _prepare(cfg: RunConfig):
    series = load_engine_series(_require_data(cfg))
    stats = fit_normalizer(series)
    denominator = default_rul_denominator(series)
    dataset = build_windows(series, stats, denominator, cfg.window_len)
    return series, stats, denominator, dataset


def _outdir(cfg: RunConfig) -> Path:
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    outdir = _outdir(cfg)
    series, stats, denominator, dataset = _prepare(cfg)
    save_normalizer(stats, denominator, outdir / NORMALIZER_FILE)
    write_manifest(cfg, outdir)
    print(f"engines={len(series)}")
    print(f"sequences={len(dataset)}")
    print(f"n_features={dataset.n_features}")
    print(f"window_len={dataset.window_len}")
    print(f"rul_denominator={denominator!r}")
    print(f"normalizer={outdir / NORMALIZER_FILE}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    outdir = _outdir(cfg)
    _, stats, denominator, dataset = _prepare(cfg)
    train, val = train_val_split(dataset, cfg.val_fraction, cfg.seed)
    spec = ModelSpec(
        cell_type=cfg.cell_type,
        window_len=cfg.window_len,
        n_features=dataset.n_features,
        init_seed=cfg.seed,
    )
    model = build_model(spec)
    train_cfg = TrainConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        loss="mae",
        shuffle_seed=cfg.seed,
    )
    history = []
    for _ in range(cfg.epochs):
        metrics = train_epoch(model, train, train_cfg)
        metrics.val_mse, metrics.val_mae = evaluate(model, val)
        history.append(metrics)
    metrics_path = outdir / f"{cfg.cell_type}_metrics.csv"
    model_path = outdir / f"{cfg.cell_type}.model"
    emit_epoch_table(history, metrics_path)
    save_model(model, model_path)
    save_normalizer(stats, denominator, outdir / NORMALIZER_FILE)
    write_manifest(cfg, outdir)
    last = history[-1]
    print(f"metrics={metrics_path}")
    print(f"model={model_path}")
    print(f"final_val_mse={last.val_mse!r}")
    print(f"final_val_mae={last.val_mae!r}")
    return EXIT_OK


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    outdir = _outdir(cfg)
    _, stats, denominator, dataset = _prepare(cfg)
    train, val = train_val_split(dataset, cfg.val_fraction, cfg.seed)
    spec = ModelSpec(
        cell_type=cfg.cell_type,
        window_len=cfg.window_len,
        n_features=dataset.n_features,
        init_seed=cfg.seed,
    )
    ga_cfg = GAConfig(
        population_size=cfg.ga_population_size,
        elite_count=cfg.ga_elite_count,
        generations=cfg.ga_generations,
        lr_pool=cfg.ga_lr_pool,
        batch_pool=cfg.ga_batch_pool,
        seed=cfg.seed,
    )
    reports, best = run_evolution(spec, ga_cfg, train, val)
    generations_path = outdir / "generations.csv"
    final_path = outdir / "final_generation.csv"
    model_path = outdir / "ga_best.model"
    genome_path = outdir / "ga_best_genome.txt"
    emit_generation_table(reports, generations_path)
    emit_generation_table(reports[-1:], final_path)
    save_model(best.model, model_path)
    genome_path.write_text(
        f"learning_rate={best.genome.learning_rate!r}\nbatch_size={best.genome.batch_size}\n",
        encoding="utf-8",
    )
    save_normalizer(stats, denominator, outdir / NORMALIZER_FILE)
    write_manifest(cfg, outdir)
    print(f"generations={generations_path}")
    print(f"final_generation={final_path}")
    print(f"best_model={model_path}")
    print(f"best_genome={genome_path}")
    print(f"best_lr={best.genome.learning_rate!r}")
    print(f"best_batch_size={best.genome.batch_size}")
    print(f"best_val_mae={best.loss_current!r}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    outdir = _outdir(cfg)
    model = load_model(args.model)
    normalizer_path = args.normalizer or outdir / NORMALIZER_FILE
    stats, denominator = load_normalizer(normalizer_path)
    series = load_engine_series(_require_data(cfg))
    matches = [s for s in series if s.unit_id == args.engine]
    if not matches:
        raise UnknownEngineError(f"engine {args.engine} not present in {cfg.data_path}")
    trace_path = outdir / f"engine_{args.engine}_trace.csv"
    text = emit_prediction_trace(model, matches[0], stats, denominator, trace_path)
    print(f"trace={trace_path}")
    print(f"rows={len(text.splitlines()) - 1}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    outdir = _outdir(cfg)
    _, _, _, dataset = _prepare(cfg)
    _, val = train_val_split(dataset, cfg.val_fraction, cfg.seed)
    scores = []
    for path in args.models:
        model = load_model(path)
        if model.spec.window_len != dataset.window_len or model.spec.n_features != dataset.n_features:
            raise InvalidConfigError(
                f"{path}: model expects ({model.spec.window_len}, {model.spec.n_features}) windows, "
                f"data yields ({dataset.window_len}, {dataset.n_features})"
            )
        mse, mae = evaluate(model, val)
        scores.append(ModelScore(label=Path(path).stem, val_mse=mse, val_mae=mae))
    comparison_path = outdir / "comparison.csv"
    text = emit_comparison(scores, comparison_path)
    write_manifest(cfg, outdir)
    print(f"comparison={comparison_path}")
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulkit", description="RUL model training toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--data", help="CMAPSS-format data file")
        p.add_argument("--output-dir", help="directory for all outputs")
        p.add_argument("--seed", type=int)
        p.add_argument("--window-len", type=int)
        p.add_argument("--val-fraction", type=float)

    def add_training(p: argparse.ArgumentParser) -> None:
        p.add_argument("--cell", choices=["lstm", "gru"])

    p = sub.add_parser("preprocess", help="fit the normalizer and report dataset shape")
    add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a fixed-hyper-parameter baseline")
    add_common(p)
    add_training(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evolve", help="genetically tune learning rate and batch size")
    add_common(p)
    add_training(p)
    p.add_argument("--population", type=int)
    p.add_argument("--elites", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--lr-pool", type=_parse_float_pool)
    p.add_argument("--batch-pool", type=_parse_int_pool)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("predict", help="trace predicted vs actual RUL for one engine")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--engine", type=int, required=True)
    p.add_argument("--normalizer", help="stats file (default <output-dir>/normalizer.txt)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="score saved models on the validation split")
    add_common(p)
    p.add_argument("models", nargs="+", help="model files; labels are the file stems")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        OSError,
        MalformedRowError,
        NonNumericFieldError,
        DuplicateCycleError,
        MissingCycleError,
        EmptyInputError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except nn.NonFiniteGradientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
