"""Flat ``key = value`` run configuration with layered overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import ModelConfig
from .pruning import PruneConfig
from .training import TrainConfig

THREADS_ENV = "LAYERGCN_THREADS"


def _int_list(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _optional_str(text: str):
    return None if text.strip().lower() in ("", "none") else text.strip()


# key -> (parser, default); file keys and CLI flags share these names
FIELDS = {
    "data": (_optional_str, None),
    "seed": (int, 0),
    "threads": (int, 1),
    "variant": (str, "layergcn"),
    "layers": (int, 4),
    "epsilon": (float, 1e-8),
    "lambda": (float, 1e-3),
    "dropout_strategy": (str, "degree"),
    "dropout_ratio": (float, 0.1),
    "dropout_seed": (_optional_int, None),
    "lr": (float, 1e-3),
    "batch_size": (int, 2048),
    "embedding_dim": (int, 64),
    "max_epochs": (int, 1000),
    "patience": (int, 50),
    "valid_k": (int, 20),
    "topk": (_int_list, (10, 20, 50)),
    "dtype": (str, "float64"),
}


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    data: str | None = None
    threads: int = 1
    topk: tuple = (10, 20, 50)

    @property
    def seed(self) -> int:
        return self.train.seed


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Collects every problem."""
    values, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELDS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        try:
            values[key] = FIELDS[key][0](value)
        except ValueError:
            problems.append(f"{source}:{lineno}: bad value for {key}: {value!r}")
    if problems:
        raise ConfigError(problems)
    return values


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from exc
    return parse_config_text(text, str(path))


def resolve(file_values: dict | None = None, overrides: dict | None = None,
            env: dict | None = None) -> RunConfig:
    """Merge defaults < config file < environment < explicit overrides, then validate.

    The environment only supplies ``threads`` (via ``LAYERGCN_THREADS``).
    """
    merged = {key: default for key, (_, default) in FIELDS.items()}
    merged.update(file_values or {})
    env = os.environ if env is None else env
    problems = []
    if env.get(THREADS_ENV):
        try:
            merged["threads"] = int(env[THREADS_ENV])
        except ValueError:
            problems.append(f"{THREADS_ENV} must be an integer, got {env[THREADS_ENV]!r}")
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    if merged["threads"] < 1:
        problems.append(f"threads must be >= 1, got {merged['threads']}")
    if not merged["topk"] or min(merged["topk"]) < 1:
        problems.append(f"topk must be a non-empty list of positive integers, got {merged['topk']}")
    train = TrainConfig(
        batch_size=merged["batch_size"], lr=merged["lr"], reg=merged["lambda"],
        max_epochs=merged["max_epochs"], patience=merged["patience"], seed=merged["seed"],
        embedding_dim=merged["embedding_dim"], valid_k=merged["valid_k"], dtype=merged["dtype"],
        eval_threads=max(1, merged["threads"]),
        model=ModelConfig(merged["variant"], merged["layers"], merged["epsilon"]),
        prune=PruneConfig(merged["dropout_strategy"], merged["dropout_ratio"], merged["dropout_seed"]),
    )
    try:
        train.validate()
    except ConfigError as exc:
        problems = exc.problems + problems
    if problems:
        raise ConfigError(problems)
    return RunConfig(train, merged["data"], merged["threads"], tuple(merged["topk"]))


def to_values(cfg: RunConfig) -> dict:
    t = cfg.train
    return {
        "data": cfg.data, "seed": t.seed, "threads": cfg.threads,
        "variant": t.model.variant, "layers": t.model.n_layers, "epsilon": t.model.epsilon,
        "lambda": t.reg, "dropout_strategy": t.prune.strategy, "dropout_ratio": t.prune.ratio,
        "dropout_seed": t.prune.seed, "lr": t.lr, "batch_size": t.batch_size,
        "embedding_dim": t.embedding_dim, "max_epochs": t.max_epochs, "patience": t.patience,
        "valid_k": t.valid_k, "topk": cfg.topk, "dtype": t.dtype,
    }


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(cfg: RunConfig) -> str:
    """Canonical config file text; ``parse_config_text`` inverts it."""
    return "".join(f"{key} = {_format(value)}\n" for key, value in to_values(cfg).items())
