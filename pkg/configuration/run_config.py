"""
Модуль схемы конфигурации запуска.

RunConfig читается из JSON-файла, неизвестные ключи отклоняются с указанием
имени ключа. Раздел архитектуры канонически хешируется: хеш записывается в
контрольную точку и сверяется при загрузке.
"""
import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from grid.models import SplitSpec
from utils.exceptions import ConfigError, MissingInputError, SplitError


class TrainMode(str, Enum):
    crps = "crps"
    mse = "mse"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArchitectureConfig(_Section):
    """
    Ширины каналов по уровням разрешения и размерность латентного пространства.
    """
    widths: list[int] = Field([8, 16, 32, 64, 64], description="Channel widths w0..w4, finest to coarsest")
    latent_dim: int = Field(64, gt=0, description="Latent dimension D_z")
    noise_levels: list[bool] = Field(
        [True, True, True, True],
        description="Noise injection per decoder stage, coarsest to finest (upsampling block and its DoubleConvNeXt)",
    )
    layer_norm_eps: float = Field(1e-6, gt=0)

    @field_validator("widths")
    @classmethod
    def _check_widths(cls, value: list[int]) -> list[int]:
        if len(value) != 5 or any(width <= 0 for width in value):
            raise ValueError("widths must list 5 positive channel counts")
        return value

    @field_validator("noise_levels")
    @classmethod
    def _check_noise(cls, value: list[bool]) -> list[bool]:
        if len(value) != 4:
            raise ValueError("noise_levels must have one flag per decoder stage (4)")
        return value

    @classmethod
    def full_scale(cls) -> "ArchitectureConfig":
        return cls(widths=[16, 32, 64, 128, 256], latent_dim=1000)

    @property
    def downsample_factor(self) -> int:
        return 16

    def hash(self) -> str:
        """
        sha256 канонического JSON раздела (ключи отсортированы).
        """
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TrainConfig(_Section):
    """
    Параметры предобучения и сквозного обучения.
    """
    mode: TrainMode = TrainMode.crps
    max_lr: float = Field(1e-4, gt=0)
    micro_batch: int = Field(2, gt=0)
    accumulation_steps: int = Field(2, gt=0)
    beta_max: float = Field(0.01, ge=0)
    anneal_epochs: int = Field(10, ge=0)
    early_stop_buffer: int = Field(10, gt=0)
    max_epochs: int = Field(200, ge=0)
    pretrain_epochs: int = Field(60, ge=0)
    posterior_samples: int = Field(1, gt=0, description="N, posterior draws per item")
    decodes_per_sample: int = Field(10, gt=0, description="M, stochastic decodes per latent draw")
    decoder_noise_variance: float = Field(1.0, gt=0, description="Constant decoder variance of the MSE mode")
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    seed: int = 0

    @property
    def effective_batch(self) -> int:
        return self.micro_batch * self.accumulation_steps


class SynthConfig(_Section):
    """
    Параметры генератора синтетической правды и смещенных прогнозов.
    """
    height: int = Field(64, gt=0)
    width: int = Field(64, gt=0)
    start_year: int = 1990
    end_year: int = 2023
    init_months: list[int] = Field([1, 4, 7, 10], description="Calendar initialisation months")
    members: int = Field(5, gt=0)
    leads: int = Field(4, gt=0, le=12)
    edge_radius: float = Field(0.55, gt=0, description="Mean ice-edge distance from the pole, in half-widths")
    seasonal_amplitude: float = Field(0.2, gt=0, description="Seasonal ice-edge excursion, in half-widths")
    sharpness: float = Field(12.0, gt=0, description="Logistic steepness across the edge")
    trend_per_year: float = Field(-0.003, description="Yearly ice-edge shift, in half-widths")
    correlation_length: float = Field(4.0, gt=0, description="Anomaly lag (cells) at which autocorrelation falls to 1/e")
    anomaly_std: float = Field(1.2, ge=0, description="Anomaly standard deviation in logit units")
    persistence: float = Field(0.7, ge=0, lt=1, description="Month-to-month AR(1) coefficient of the anomaly")
    bias_amplitude: float = Field(0.08, ge=0, description="Seasonal amplitude of the hindcast bias b(m, l)")
    drift_per_lead: float = Field(0.02, description="Bias growth per lead month")
    skill_decay: float = Field(0.2, ge=0, description="alpha(l) = exp(-skill_decay * l), l = 1-based lead")
    deflation: float = Field(0.6, gt=0, le=1, description="Member-noise deflation (underdispersion)")
    coarse_sigma: float = Field(1.0, ge=0, description="Hindcast smoothing (cells), emulates a coarser model")
    corner_radius: float = Field(1.2, gt=0, description="Cells beyond this distance from the pole are land")
    n_islands: int = Field(5, ge=0)
    island_radius: float = Field(1.5, gt=0)
    seed: int = 7

    @field_validator("init_months")
    @classmethod
    def _check_months(cls, value: list[int]) -> list[int]:
        if not value or any(not 1 <= month <= 12 for month in value) or sorted(set(value)) != value:
            raise ValueError("init_months must be sorted distinct months in 1..12")
        return value

    @model_validator(mode="after")
    def _check_years(self):
        if self.end_year < self.start_year:
            raise ValueError("end_year must not precede start_year")
        return self


class CalibrationConfig(_Section):
    candidates: list[float] = Field([1.0 + 0.25 * i for i in range(17)], description="Prior std scaling candidates")
    members: int = Field(200, gt=0)
    seed: int = 11

    @field_validator("candidates")
    @classmethod
    def _check_candidates(cls, value: list[float]) -> list[float]:
        if any(candidate <= 0 for candidate in value):
            raise ValueError("candidates must be positive")
        return value


class EvaluationConfig(_Section):
    members: int = Field(10, gt=0, description="Ensemble size used for fair comparison")
    marginal_lo: float = Field(0.15, ge=0, le=1)
    marginal_hi: float = Field(0.90, ge=0, le=1)
    edge_threshold: float = Field(0.15, ge=0, le=1)
    rank_seed: int = 0
    iiee_max_radius: float | None = Field(None, gt=0, description="Restrict IIEE to cells within this distance from the pole")

    @model_validator(mode="after")
    def _check_marginal_zone(self):
        if self.marginal_lo >= self.marginal_hi:
            raise ValueError("marginal_lo must be below marginal_hi")
        return self


class PathsConfig(_Section):
    data_root: Path | None = None
    run_dir: Path | None = None


class RunConfig(_Section):
    """
    Полная конфигурация запуска (версия схемы 1).
    """
    schema_version: Literal[1] = 1
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    split: SplitSpec = Field(default_factory=lambda: SplitSpec(train_range=(1990, 2015)))
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    seed: int = 0
    paths: PathsConfig = Field(default_factory=PathsConfig)


def load_run_config(path: Path | str | None) -> RunConfig:
    """
    Загружает RunConfig из JSON (без пути возвращает значения по умолчанию).

    Args:
        path: Путь к JSON-файлу конфигурации

    Returns:
        RunConfig: Проверенная конфигурация
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return RunConfig.model_validate(raw)
    except SplitError as exc:
        raise ConfigError(f"split: {exc}") from exc
    except ValidationError as exc:
        problems = []
        for error in exc.errors():
            location = ".".join(str(part) for part in error["loc"])
            if error["type"] == "extra_forbidden":
                problems.append(f"unknown key '{location}'")
            else:
                problems.append(f"{location}: {error['msg']}")
        raise ConfigError("; ".join(problems)) from exc
