"""Run configuration: YAML file, environment overrides for the endpoint, CLI flags on top."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .llm import ModelConfig
from .typology import Typology

ENV_ENDPOINT = "INFOTYPES_ENDPOINT"
ENV_API_KEY = "INFOTYPES_API_KEY"
ENV_MODEL = "INFOTYPES_MODEL"


@dataclass
class TaskConfig:
    min_helpful_votes: int = 9
    min_unhelpful_votes: int = 3
    positive_ratings: tuple[int, ...] = (4, 5)
    tertile_borders: tuple[float, float] | None = None  # None = derive from the train file
    cv_iterations: int = 50
    train_fraction: float = 0.7
    svm_lambda: float = 0.01
    svm_epochs: int = 200
    ridge: float = 1e-6
    bootstrap_resamples: int = 1000
    bootstrap_alpha: float = 0.025
    benchmark_iterations: int = 50
    benchmark_train_fraction: float = 0.8
    benchmark_train_size: int | None = None
    benchmark_method: str = "youden"  # or "grid"
    min_visible: float = 0.2


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    seed: int = 0
    n_repetitions: int = 10
    cache: str | None = None
    replay: str | None = None
    out: str = "out"
    questions_file: str | None = None
    categories_file: str | None = None
    categories: dict[str, str] = field(default_factory=dict)
    subsets: list[str] = field(default_factory=lambda: ["all"])

    def typology(self) -> Typology:
        try:
            base = Typology.from_files(self.questions_file, self.categories_file)
            return Typology({k.value: v for k, v in base.questions.items()},
                            {**base.categories, **self.categories})
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad typology override: {exc}") from None

    def snapshot(self) -> dict[str, Any]:
        """Effective configuration, minus credentials."""
        d = dataclasses.asdict(self)
        d["model"].pop("api_key", None)
        d["task"]["positive_ratings"] = list(self.task.positive_ratings)
        if self.task.tertile_borders is not None:
            d["task"]["tertile_borders"] = list(self.task.tertile_borders)
        return d

    def write_snapshot(self, directory: str | Path) -> Path:
        path = Path(directory) / "effective_config.yaml"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.snapshot(), sort_keys=True), encoding="utf-8")
        return path


def _build(cls, data: dict[str, Any], where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {where} section: {exc}") from None


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
    raw = dict(raw)
    model = dict(raw.pop("model", None) or {})
    task = dict(raw.pop("task", None) or {})
    if env.get(ENV_ENDPOINT):
        model["endpoint_url"] = env[ENV_ENDPOINT]
    if env.get(ENV_API_KEY):
        model["api_key"] = env[ENV_API_KEY]
    if env.get(ENV_MODEL):
        model["model_id"] = env[ENV_MODEL]
    if "positive_ratings" in task:
        task["positive_ratings"] = tuple(task["positive_ratings"])
    if task.get("tertile_borders") not in (None, "auto"):
        lo, hi = task["tertile_borders"]
        task["tertile_borders"] = (float(lo), float(hi))
    else:
        task["tertile_borders"] = None
    cfg = _build(RunConfig, raw, "config")
    cfg.model = _build(ModelConfig, model, "model")
    cfg.task = _build(TaskConfig, task, "task")
    if cfg.n_repetitions < 1:
        raise ConfigError("n_repetitions must be >= 1")
    if cfg.task.benchmark_method not in ("youden", "grid"):
        raise ConfigError("task.benchmark_method must be 'youden' or 'grid'")
    return cfg


def with_overrides(cfg: RunConfig, **kw: Any) -> RunConfig:
    """Apply CLI flags; None means 'not given'."""
    model_kw = {k: kw.pop(k) for k in ("endpoint_url",) if kw.get(k) is not None}
    if model_kw:
        cfg.model = dataclasses.replace(cfg.model, **model_kw)
    for k, v in kw.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg
