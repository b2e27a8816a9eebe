"""Run configuration: one YAML file with palette/dataset/model/train/eval/serve.

Parsing is strict: unknown keys anywhere are rejected so a typo cannot
silently fall back to a default. The echoed form (--print-config) parses
back to an identical configuration.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ConfigError
from .nn.model import ModelConfig
from .palette import ClassPalette, default_palette
from .synth import SynthConfig
from .training import TrainConfig


@dataclass(frozen=True)
class SynthSection:
    grid: int = 64
    min_rooms: int = 3
    max_rooms: int = 6
    wall_px: int = 2
    count: int = 16
    seed: int = 0

    def to_synth_config(self) -> SynthConfig:
        return SynthConfig(self.grid, self.min_rooms, self.max_rooms, self.wall_px)


@dataclass(frozen=True)
class DatasetSection:
    manifest: Optional[str] = None
    image_size: int = 64
    val_ratio: float = 0.0
    split_seed: int = 0
    threshold: float = 0.5
    synth: SynthSection = field(default_factory=SynthSection)


@dataclass(frozen=True)
class ModelSection:
    stages: int = 4
    base_width: int = 32
    gcn_layers: int = 3
    gcn_hidden: int = 64
    graph_channels: int = 32
    norm_groups: int = 8

    def to_model_config(self, palette: ClassPalette) -> ModelConfig:
        return ModelConfig(classes=palette.num_classes, **asdict(self))


@dataclass(frozen=True)
class TrainSection:
    steps: int = 500
    batch_size: int = 4
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    class_weights: Optional[tuple[float, ...]] = None
    loss_mask_mode: str = "all_pixels"
    seed: int = 0
    checkpoint_every: int = 100
    eval_every: int = 50
    lr_schedule: str = "constant"

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(**asdict(self))


@dataclass(frozen=True)
class EvalSection:
    manifest: Optional[str] = None
    aggregation: str = "micro"

    def __post_init__(self):
        if self.aggregation not in ("micro", "macro"):
            raise ConfigError(f"eval.aggregation must be micro or macro, got {self.aggregation!r}")


@dataclass(frozen=True)
class ServeSection:
    host: str = "127.0.0.1"
    port: int = 8080
    max_concurrent: int = 2
    cors_origins: tuple[str, ...] = ("*",)


@dataclass(frozen=True)
class RunConfig:
    palette: ClassPalette
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    serve: ServeSection = field(default_factory=ServeSection)

    def model_config(self) -> ModelConfig:
        cfg = self.model.to_model_config(self.palette)
        div = 1 << cfg.stages
        if self.dataset.image_size % div:
            raise ConfigError(
                f"dataset.image_size {self.dataset.image_size} not divisible by 2^{cfg.stages}"
            )
        if self.dataset.synth.grid % div:
            raise ConfigError(
                f"dataset.synth.grid {self.dataset.synth.grid} not divisible by 2^{cfg.stages}"
            )
        return cfg


def default_run_config() -> RunConfig:
    return RunConfig(palette=default_palette())


_SCALARS = {int, float, str, bool}


def _build_section(cls, doc: Any, where: str):
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(doc).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(doc) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in doc.items():
        if name == "synth":
            kwargs[name] = _build_section(SynthSection, value, f"{where}.synth")
        elif name == "class_weights":
            kwargs[name] = None if value is None else tuple(float(v) for v in value)
        elif name == "cors_origins":
            kwargs[name] = tuple(str(v) for v in value)
        elif name == "manifest":
            kwargs[name] = None if value is None else str(value)
        else:
            expected = type(getattr(cls(), name))
            if expected in (int, float) and isinstance(value, bool):
                raise ConfigError(f"{where}.{name}: expected {expected.__name__}")
            if expected is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, expected):
                raise ConfigError(
                    f"{where}.{name}: expected {expected.__name__}, got {type(value).__name__}"
                )
            kwargs[name] = value
    return cls(**kwargs)


def run_config_from_dict(doc: dict) -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(doc) - {"palette", "dataset", "model", "train", "eval", "serve"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    palette = (
        ClassPalette.from_dict(doc["palette"]) if doc.get("palette") else default_palette()
    )
    cfg = RunConfig(
        palette=palette,
        dataset=_build_section(DatasetSection, doc.get("dataset"), "dataset"),
        model=_build_section(ModelSection, doc.get("model"), "model"),
        train=_build_section(TrainSection, doc.get("train"), "train"),
        eval=_build_section(EvalSection, doc.get("eval"), "eval"),
        serve=_build_section(ServeSection, doc.get("serve"), "serve"),
    )
    cfg.model_config()  # cross-section validation happens up front
    cfg.train.to_train_config()
    return cfg


def load_run_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return default_run_config()
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}")
    return run_config_from_dict(doc)


def run_config_to_dict(cfg: RunConfig) -> dict:
    def clean(obj):
        if isinstance(obj, tuple):
            return [clean(v) for v in obj]
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        return obj

    return {
        "palette": cfg.palette.to_dict(),
        "dataset": clean(asdict(cfg.dataset)),
        "model": clean(asdict(cfg.model)),
        "train": clean(asdict(cfg.train)),
        "eval": clean(asdict(cfg.eval)),
        "serve": clean(asdict(cfg.serve)),
    }


def run_config_to_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(run_config_to_dict(cfg), sort_keys=False)


def apply_overrides(cfg: RunConfig, seed: Optional[int] = None, port: Optional[int] = None) -> RunConfig:
    if seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=seed), dataset=replace(cfg.dataset, synth=replace(cfg.dataset.synth, seed=seed)))
    if port is not None:
        cfg = replace(cfg, serve=replace(cfg.serve, port=port))
    return cfg
