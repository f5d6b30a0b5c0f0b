"""Engine configuration: one structured YAML document with dataset,
encoder, model, training, and evaluation sections. Everything is
validated up front so commands fail before touching any output."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import yaml

from .data import GeneratorSpec
from .errors import ConfigError
from .model import ARCHITECTURES, POOL_MODES
from .training import TrainConfig

ENCODER_MODES = ("hashing", "store")
EVAL_SPLITS = ("train", "val", "test")


def _check_keys(section: str, mapping: dict, allowed) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{section} section must be a mapping")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {section} section: {', '.join(unknown)}")


def _field_names(cls):
    return tuple(f.name for f in dataclasses.fields(cls))


@dataclass(frozen=True)
class DatasetSettings:
    """Where the corpus comes from and how it is partitioned.

    When both a path and a generator are present, commands that read a
    corpus prefer the file; `generate` always uses the generator and
    writes to the path unless --out overrides it.
    """
    path: Optional[str] = None
    generator: Optional[GeneratorSpec] = None
    generator_seed: int = 0
    fractions: tuple = (0.6, 0.2, 0.2)
    downsample: bool = True
    downsample_seed: Optional[int] = None
    split_seed: Optional[int] = None
    max_posts: Optional[int] = None

    def validate(self):
        if self.path is None and self.generator is None:
            raise ConfigError(
                "dataset section needs a path or a generator block")
        if self.generator is not None:
            self.generator.validate()
        if self.generator_seed < 0:
            raise ConfigError("generator_seed must be non-negative")
        if len(self.fractions) != 3:
            raise ConfigError(
                f"fractions must have 3 entries, got {len(self.fractions)}")
        if any(f < 0 for f in self.fractions):
            raise ConfigError("fractions must be non-negative")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(
                f"fractions must sum to 1, got {sum(self.fractions)!r}")
        if self.max_posts is not None and self.max_posts < 1:
            raise ConfigError("max_posts must be >= 1")
        for name in ("downsample_seed", "split_seed"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be non-negative")
        return self


@dataclass(frozen=True)
class EncoderSettings:
    mode: str = "hashing"
    d_text: int = 64
    hash_seed: int = 0
    store_path: Optional[str] = None

    def validate(self):
        if self.mode not in ENCODER_MODES:
            raise ConfigError(
                f"encoder mode must be one of {ENCODER_MODES}, got {self.mode!r}")
        if self.mode == "hashing" and self.d_text < 8:
            raise ConfigError(f"d_text must be >= 8, got {self.d_text}")
        if self.mode == "store" and not self.store_path:
            raise ConfigError("store encoder mode needs store_path")
        return self


@dataclass(frozen=True)
class ModelSettings:
    architecture: str = "EmoLSTMTd"
    hidden_size: int = 64
    dropout_rate: Optional[float] = None
    pool: str = "mean"
    init_seed: Optional[int] = None

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(
                f"unknown architecture {self.architecture!r}; expected one of "
                f"{', '.join(sorted(ARCHITECTURES))}")
        if self.hidden_size < 1:
            raise ConfigError("hidden_size must be >= 1")
        if self.dropout_rate is not None and not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.pool not in POOL_MODES:
            raise ConfigError(f"pool must be one of {POOL_MODES}, got {self.pool!r}")
        if self.init_seed is not None and self.init_seed < 0:
            raise ConfigError("init_seed must be non-negative")
        return self


@dataclass(frozen=True)
class TrainingSettings:
    epochs: int = 10
    batch_size: int = 32
    initial_lr: float = 0.001
    schedule: str = "constant"
    schedule_factor: float = 0.5
    schedule_every: int = 2
    clip_norm: Optional[float] = 5.0
    seed: int = 0
    checkpoint_path: str = "model.ckpt"
    history_path: str = "history.json"

    def to_train_config(self, run_seed: int, checkpoint_path=None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            initial_lr=self.initial_lr, schedule=self.schedule,
            schedule_factor=self.schedule_factor,
            schedule_every=self.schedule_every, clip_norm=self.clip_norm,
            seed=run_seed,
            checkpoint_path=(checkpoint_path if checkpoint_path is not None
                             else self.checkpoint_path)).validate()

    def validate(self):
        self.to_train_config(self.seed)
        if not self.checkpoint_path:
            raise ConfigError("checkpoint_path must not be empty")
        if not self.history_path:
            raise ConfigError("history_path must not be empty")
        return self


@dataclass(frozen=True)
class EvaluationSettings:
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    architectures: tuple = ()
    split: str = "test"
    metric: str = "f1"
    top_k: Optional[int] = None
    workers: int = 1
    metrics_path: str = "metrics.json"
    metrics_csv: str = "metrics.csv"
    comparison_path: str = "comparison.csv"
    attention_path: str = "attention.jsonl"

    def validate(self):
        if not self.seeds:
            raise ConfigError("evaluation seeds must not be empty")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        for arch in self.architectures:
            if arch not in ARCHITECTURES:
                raise ConfigError(f"unknown architecture {arch!r} in comparison list")
        if self.split not in EVAL_SPLITS:
            raise ConfigError(
                f"evaluation split must be one of {EVAL_SPLITS}, got {self.split!r}")
        from .metrics import SeedAggregate
        if self.metric not in SeedAggregate.METRIC_FIELDS:
            raise ConfigError(f"unknown comparison metric {self.metric!r}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


_SECTION_TYPES = {
    "dataset": DatasetSettings,
    "encoder": EncoderSettings,
    "model": ModelSettings,
    "training": TrainingSettings,
    "evaluation": EvaluationSettings,
}


@dataclass(frozen=True)
class EngineConfig:
    dataset: DatasetSettings = DatasetSettings()
    encoder: EncoderSettings = EncoderSettings()
    model: ModelSettings = ModelSettings()
    training: TrainingSettings = TrainingSettings()
    evaluation: EvaluationSettings = EvaluationSettings()

    def validate(self):
        self.dataset.validate()
        self.encoder.validate()
        self.model.validate()
        self.training.validate()
        self.evaluation.validate()
        return self

    @classmethod
    def from_dict(cls, document) -> "EngineConfig":
        if document is None:
            document = {}
        _check_keys("top-level config", document, _SECTION_TYPES)
        sections = {}
        for name, section_cls in _SECTION_TYPES.items():
            raw = document.get(name, {})
            _check_keys(name, raw, _field_names(section_cls))
            raw = dict(raw)
            if name == "dataset" and raw.get("generator") is not None:
                _check_keys("dataset.generator", raw["generator"],
                            _field_names(GeneratorSpec))
                raw["generator"] = GeneratorSpec(**raw["generator"])
            if name == "dataset" and "fractions" in raw:
                fractions = raw["fractions"]
                if not isinstance(fractions, (list, tuple)):
                    raise ConfigError("fractions must be a list of 3 numbers")
                raw["fractions"] = tuple(float(f) for f in fractions)
            if name == "evaluation":
                for key in ("seeds", "architectures"):
                    if key in raw:
                        if not isinstance(raw[key], (list, tuple)):
                            raise ConfigError(f"evaluation {key} must be a list")
                        raw[key] = tuple(raw[key])
            sections[name] = section_cls(**raw)
        return cls(**sections).validate()

    @classmethod
    def from_yaml(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}")
        if document is not None and not isinstance(document, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return cls.from_dict(document)
