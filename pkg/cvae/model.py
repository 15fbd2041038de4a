"""
Модуль модели cVAE-CRPS.

Объединяет кодировщик q_φ(z | y, x̄), априорную сеть p_ω(z | x̄, ỹ),
генератор G_θ с инъекцией шума, детерминированную сеть и общий выходной
блок. Все поля на входе имеют форму [B, H, W] с нулями на суше; выходы
маскируются маской океана набора данных.
"""
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict

from autodiff import Tensor, functional as F
from configuration.base import derive_rng
from configuration.run_config import ArchitectureConfig, TrainMode
from cvae.conditioning import ConditionBatch, conditioning_channels
from cvae.networks import DeterministicNet, GaussianNet, Generator
from grid.models import GridSpec
from layers import MaskState, Module, NoiseSource, OutputBlock
from utils.exceptions import ModeMismatchError, ShapeMismatchError


ENCODER_CHANNELS = 5
DETERMINISTIC_CHANNELS = 4


class LatentSource(str, Enum):
    posterior = "posterior"
    prior = "prior"
    scaled_prior = "scaled_prior"


class GaussianParams(BaseModel):
    """
    Диагональная гауссиана: μ и log σ² формы [B, D_z].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean: Tensor
    logvar: Tensor

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar.data)


class LatentSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: Tensor
    source: LatentSource
    scale: float = 1.0


class DeterministicEstimate(BaseModel):
    """
    Детерминированная оценка ỹ [B, H, W] и предпоследняя активация [B, w0, H, W].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    field: Tensor
    features: Tensor


class CVAEModel(Module):
    """
    Все обучаемые сети cVAE на одной сетке и одной конфигурации архитектуры.

    Args:
        arch: Конфигурация архитектуры
        grid: Сетка набора данных (размеры кратны 16)
        seed: Зерно инициализации весов
        mode: Режим обучения (crps или mse), фиксированный для модели
    """

    def __init__(self, arch: ArchitectureConfig, grid: GridSpec, seed: int = 0, mode: TrainMode = TrainMode.crps):
        super().__init__()
        factor = arch.downsample_factor
        if grid.height % factor or grid.width % factor:
            raise ShapeMismatchError(f"grid {grid.shape} must be divisible by {factor} for this architecture")
        self.arch = arch
        self.grid = grid
        self.seed = seed
        self.mode = TrainMode(mode)
        self.pretrained = False
        self.trained = False
        self.checkpoint_id: str | None = None
        self.masks = MaskState.from_ocean(grid.ocean_mask, depth=4)
        self._ocean = grid.ocean_mask.astype(float)

        self.encoder = self.child("encoder", GaussianNet(derive_rng(seed, 1), ENCODER_CHANNELS, arch))
        self.prior_net = self.child("prior", GaussianNet(derive_rng(seed, 2), ENCODER_CHANNELS, arch))
        self.generator = self.child("generator", Generator(derive_rng(seed, 3), arch, grid.shape))
        self.deterministic = self.child("deterministic", DeterministicNet(derive_rng(seed, 4), DETERMINISTIC_CHANNELS, arch))
        self.output_block = self.child("output", OutputBlock(derive_rng(seed, 5), arch.widths[0], arch.layer_norm_eps))

    def _to_field(self, features: Tensor) -> Tensor:
        out, _ = self.output_block(features, self.masks.full)
        out = F.reshape(out, (*out.shape[:-3], *out.shape[-2:]))
        return F.mul(out, self._ocean)

    def deterministic_parameters(self) -> list[Tensor]:
        """
        Параметры детерминированной сети вместе с общим выходным блоком.
        """
        return self.deterministic.parameters() + self.output_block.parameters()

    def deterministic_estimate(self, batch: ConditionBatch) -> DeterministicEstimate:
        """
        ỹ и предпоследняя активация детерминированной сети по x̄ и временным каналам.
        """
        features, _ = self.deterministic(conditioning_channels(None, batch), self.masks)
        return DeterministicEstimate(field=self._to_field(features), features=features)

    def encode(self, y: Tensor | np.ndarray, batch: ConditionBatch) -> GaussianParams:
        """
        Параметры апостериорного распределения q_φ(z | y, x̄).
        """
        mean, logvar = self.encoder(conditioning_channels(y, batch), self.masks)
        return GaussianParams(mean=mean, logvar=logvar)

    def prior(self, batch: ConditionBatch, y_tilde: Tensor | np.ndarray) -> GaussianParams:
        """
        Параметры условного априорного распределения p_ω(z | x̄, ỹ).
        """
        mean, logvar = self.prior_net(conditioning_channels(y_tilde, batch), self.masks)
        return GaussianParams(mean=mean, logvar=logvar)

    def generate(
        self,
        z: Tensor,
        estimate: DeterministicEstimate,
        rng: np.random.Generator | None,
        members: int,
        clamp: bool = False,
    ) -> Tensor:
        """
        M стохастических декодирований каждого латентного вектора.

        Члены отличаются только инъецированным шумом. Предпоследняя активация
        детерминированной сети прибавляется перед общим выходным блоком.

        Args:
            z: Латентные векторы [B, D_z]
            estimate: Детерминированная оценка того же пакета
            rng: Генератор шума (None - нулевой шум)
            members: Число декодирований M
            clamp: Ограничить выход отрезком [0, 1] (только при инференсе)

        Returns:
            Tensor: Поля [M, B, H, W]
        """
        if members < 1:
            raise ShapeMismatchError("generate requires at least one member (M >= 1)")
        if z.shape[-1] != self.arch.latent_dim:
            raise ShapeMismatchError(f"latent dimension {z.shape[-1]} != {self.arch.latent_dim}")
        z = F.mul(z, np.ones((members, 1, 1)))
        features, _ = self.generator(z, self.masks, NoiseSource(rng))
        out = self._to_field(F.add(features, estimate.features))
        return F.clamp(out, 0.0, 1.0) if clamp else out

    def gaussian_decode(self, z: Tensor, estimate: DeterministicEstimate, disable_noise: bool = False) -> Tensor:
        """
        Среднее гауссова декодера: генератор с выключенной инъекцией шума.

        Args:
            z: Латентные векторы [B, D_z]
            estimate: Детерминированная оценка
            disable_noise: Явное разрешение для модели, обученной в режиме crps

        Returns:
            Tensor: Поля [B, H, W]
        """
        if self.mode == TrainMode.crps and not disable_noise:
            raise ModeMismatchError("gaussian_decode on a CRPS-mode generator requires disable_noise=True")
        out = self.generate(z, estimate, rng=None, members=1)
        return F.reshape(out, out.shape[1:])


def reparameterize(g: GaussianParams, rng: np.random.Generator, scale: float = 1.0, source: LatentSource = LatentSource.posterior) -> LatentSample:
    """
    z = μ + s·σ⊙ε, ε ~ N(0, I); градиент проходит к μ и log σ².

    Args:
        g: Параметры гауссианы
        rng: Генератор ε
        scale: Множитель стандартного отклонения s
        source: Распределение, из которого берется выборка

    Returns:
        LatentSample: Латентная выборка
    """
    eps = rng.standard_normal(g.mean.shape)
    std = F.exp(F.mul(g.logvar, 0.5))
    z = F.add(g.mean, F.mul(std, eps * scale))
    if source == LatentSource.prior and scale != 1.0:
        source = LatentSource.scaled_prior
    return LatentSample(z=z, source=source, scale=scale)
