"""Experiment configuration: nested dataclasses with a YAML round trip.

File grammar: a YAML mapping whose top-level keys are the fields of
``ExperimentConfig``. Nested sections (``schedule``, ``plan``, ``model``,
``data``, ``autoencoder``, ``stage1``, ``stage2``, ``ablation``) are mappings
of their dataclass fields. Omitted keys take their defaults; unknown keys are
rejected. Ranges are two-element lists. ``null`` maps to None.

The only environment override is ``TRUNCSR_OUTPUT_DIR``, which replaces
``output_dir`` when set.
"""

from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .data import KINDS, DegradationParams
from .schedule import build_linear_schedule, build_nonuniform_plan, build_uniform_plan
from .train import Stage2Config, TrainConfig

OUTPUT_ENV = "TRUNCSR_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class ScheduleConfig:
    T: int = 45
    beta_start: float | None = None
    beta_end: float | None = None

    def build(self):
        return build_linear_schedule(self.T, self.beta_start, self.beta_end)


@dataclass
class PlanConfig:
    t_max_frac: float = 2 / 3
    t_min_frac: float = 1 / 3
    total_evals: int = 15


@dataclass
class ModelConfig:
    """``codec`` is "autoencoder" (latent diffusion) or "identity" (pixel space).
    ``output`` selects the denoiser head ("v" or "eps")."""

    codec: str = "autoencoder"
    patch: int = 8
    latent_dim: int = 16
    hidden: int = 128
    depth: int = 2
    time_dim: int = 32
    output: str = "v"
    ae_hidden: int = 128
    disc_hidden: int = 128

    def __post_init__(self):
        if self.codec not in ("autoencoder", "identity"):
            raise ConfigError(f"unknown codec {self.codec!r}")
        if self.output not in ("eps", "v"):
            raise ConfigError(f"unknown output head {self.output!r}")


@dataclass
class DataConfig:
    kind: str = "textures2d"
    size: int = 64
    n_train: int = 256
    n_test: int = 50
    seed: int = 1
    blur_sigma: tuple[float, float] = (0.8, 1.6)
    factor: int = 4
    noise_sigma: tuple[float, float] = (0.0, 0.02)
    quant_levels: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("dataset sizes must be positive")
        self.blur_sigma = tuple(self.blur_sigma)
        self.noise_sigma = tuple(self.noise_sigma)

    def degradation(self) -> DegradationParams:
        return DegradationParams(self.blur_sigma, self.factor, self.noise_sigma, self.quant_levels)


@dataclass
class AutoEncoderConfig:
    steps: int = 3000
    batch_size: int = 128
    lr: float = 1e-3
    kl_weight: float = 1e-6
    seed: int = 0


@dataclass
class AblationConfig:
    """``nutl`` toggles the jump-consistency losses; ``decoder_finetune``
    toggles stage 2; ``baseline`` swaps in plain DDPM training and the
    uniform full-length posterior chain at the same evaluation budget."""

    nutl: bool = True
    decoder_finetune: bool = True
    baseline: bool = False


@dataclass
class ExperimentConfig:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    autoencoder: AutoEncoderConfig = field(default_factory=AutoEncoderConfig)
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    n_runs: int = 10
    root_seed: int = 0
    workers: int = 1
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        # the ablation switches own the stage-1 training mode
        self.stage1.nutl = self.ablation.nutl and not self.ablation.baseline
        self.stage1.timesteps = "uniform" if self.ablation.baseline else "nonuniform"
        self.stage1.t_max_frac = self.plan.t_max_frac
        self.stage1.t_min_frac = self.plan.t_min_frac
        self.stage1.total_evals = self.plan.total_evals

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def build_schedule(self):
        return self.schedule.build()

    def build_plan(self, schedule=None):
        schedule = schedule or self.build_schedule()
        if self.ablation.baseline:
            return build_uniform_plan(schedule, self.plan.total_evals)
        return build_nonuniform_plan(schedule, self.plan.t_max_frac, self.plan.t_min_frac,
                                     self.plan.total_evals)

    @property
    def transition(self) -> str:
        return "posterior" if self.ablation.baseline else "renoise"

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return _build(cls, data or {}, "config")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        data = yaml.safe_load(text)
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_yaml())

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level or dotted (``"plan.total_evals"``) overrides."""
        data = self.to_dict()
        for key, value in changes.items():
            node = data
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[leaf] = value
        return self.from_dict(data)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value or {}, f"{where}.{name}")
        elif typing.get_origin(hint) is tuple and value is not None:
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


PRESETS = {
    "default": {},
    # stage learning rates of the full-scale setting
    "low-lr": {"stage1.lr": 1e-4, "stage2.lr": 5e-6},
    "smoke": {
        "data.size": 32, "data.n_train": 8, "data.n_test": 2,
        "model.hidden": 32, "model.ae_hidden": 32, "model.disc_hidden": 32,
        "model.time_dim": 8, "autoencoder.steps": 100, "stage1.steps": 200,
        "stage1.log_every": 20, "stage2.steps": 20, "stage2.log_every": 5,
        "n_runs": 2,
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return ExperimentConfig().replace(**PRESETS[name])


def load_config(path=None, preset_name: str | None = None,
                env: typing.Mapping[str, str] | None = None) -> ExperimentConfig:
    """Load a config file (or a preset), then apply the output-dir override."""
    env = os.environ if env is None else env
    if path is not None:
        try:
            cfg = ExperimentConfig.from_yaml(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        cfg = preset(preset_name or "default")
    if env.get(OUTPUT_ENV):
        cfg = cfg.replace(output_dir=env[OUTPUT_ENV])
    return cfg
