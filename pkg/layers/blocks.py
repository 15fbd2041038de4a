"""
Модуль составных блоков сети поверх примитивов autodiff.

Все пространственные блоки принимают тензор [..., C, H, W] и маску
допустимых ячеек [H, W] и возвращают пару (тензор, обновленная маска).
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff import Tensor, functional as F
from layers.masks import MaskState, or_pool2x2
from layers.module import Module, truncated_normal
from utils.exceptions import ShapeMismatchError


class NoiseSource:
    """
    Источник каналов стандартного нормального шума для генератора.

    Без генератора (или при enabled=False) выдает нулевые каналы.
    """

    def __init__(self, rng: np.random.Generator | None, enabled: bool = True):
        self.rng = rng
        self.enabled = enabled and rng is not None

    def draw(self, shape: tuple[int, ...]) -> np.ndarray:
        if not self.enabled:
            return np.zeros(shape)
        return self.rng.standard_normal(shape)


def _noise_channel(x: Tensor, noise: NoiseSource | None) -> Tensor:
    shape = (*x.shape[:-3], 1, *x.shape[-2:])
    return Tensor(noise.draw(shape) if noise is not None else np.zeros(shape))


def _window_count(mask: np.ndarray, k: int, pad_value: float) -> np.ndarray:
    pad = k // 2
    padded = np.pad(mask.astype(float), pad, constant_values=pad_value)
    return sliding_window_view(padded, (k, k)).sum(axis=(-2, -1))


def partial_conv2d(x: Tensor, mask: np.ndarray, weight: Tensor, bias: Tensor) -> tuple[Tensor, np.ndarray]:
    """
    Частичная свертка с перенормировкой по числу допустимых ячеек под ядром.

    out = conv(x⊙m)·(k²/Σm) + b в ячейках с хотя бы одной допустимой ячейкой
    под ядром; остальные ячейки дают 0 и становятся недопустимыми. Нулевое
    дополнение за границей сетки считается допустимым при перенормировке, но не
    делает ячейку допустимой.

    Args:
        x: Вход [..., C, H, W]
        mask: Маска допустимых ячеек [H, W]
        weight: Ядро [O, C, k, k]
        bias: Смещение [O]

    Returns:
        tuple: (выход [..., O, H, W], обновленная маска)
    """
    if x.shape[-3] != weight.shape[1]:
        raise ShapeMismatchError(f"partial_conv2d: input has {x.shape[-3]} channels, kernel expects {weight.shape[1]}")
    if mask.shape != x.shape[-2:]:
        raise ShapeMismatchError(f"partial_conv2d: mask shape {mask.shape} != spatial shape {x.shape[-2:]}")
    k = weight.shape[-1]
    update = _window_count(mask, k, pad_value=0.0) > 0
    valid_with_padding = _window_count(mask, k, pad_value=1.0)
    ratio = np.where(update, k * k / np.maximum(valid_with_padding, 1.0), 0.0)
    out = F.mul(F.conv2d(F.mul(x, mask.astype(float)), weight), ratio)
    out = F.add(out, F.mul(F.reshape(bias, (-1, 1, 1)), update.astype(float)))
    return out, update


def downsample(x: Tensor, mask: np.ndarray) -> tuple[Tensor, np.ndarray]:
    """
    Max-pool 2×2 по допустимым ячейкам; маска сворачивается логическим OR.
    """
    return F.max_pool2x2(x, mask), or_pool2x2(mask)


class PartialConv2d(Module):
    def __init__(self, rng: np.random.Generator, in_channels: int, out_channels: int, kernel: int):
        super().__init__()
        self.weight = self.param("weight", truncated_normal(rng, (out_channels, in_channels, kernel, kernel), in_channels * kernel * kernel))
        self.bias = self.param("bias", np.zeros(out_channels))

    def __call__(self, x: Tensor, mask: np.ndarray) -> tuple[Tensor, np.ndarray]:
        return partial_conv2d(x, mask, self.weight, self.bias)


class LayerNorm(Module):
    """
    Нормализация по каналам в каждой пространственной точке.
    """

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.eps = eps
        self.gamma = self.param("gamma", np.ones((channels, 1, 1)))
        self.beta = self.param("beta", np.zeros((channels, 1, 1)))

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, axis=-3, eps=self.eps)


class Dense(Module):
    def __init__(self, rng: np.random.Generator, in_features: int, out_features: int):
        super().__init__()
        self.weight = self.param("weight", truncated_normal(rng, (in_features, out_features), in_features))
        self.bias = self.param("bias", np.zeros(out_features))

    def __call__(self, x: Tensor) -> Tensor:
        return F.add(F.matmul(x, self.weight), self.bias)


class ConvNeXtSubBlock(Module):
    """
    [шум] -> частичная свертка 3×3 -> LayerNorm -> GELU -> частичная свертка 1×1 (+ остаток).
    """

    def __init__(self, rng: np.random.Generator, in_channels: int, out_channels: int, noise: bool = False, eps: float = 1e-6):
        super().__init__()
        self.noise = noise
        self.residual = in_channels == out_channels
        self.conv3 = self.child("conv3", PartialConv2d(rng, in_channels + int(noise), out_channels, 3))
        self.norm = self.child("norm", LayerNorm(out_channels, eps))
        self.conv1 = self.child("conv1", PartialConv2d(rng, out_channels, out_channels, 1))

    def __call__(self, x: Tensor, mask: np.ndarray, noise: NoiseSource | None = None) -> tuple[Tensor, np.ndarray]:
        h = F.concat([x, _noise_channel(x, noise)], axis=-3) if self.noise else x
        h, updated = self.conv3(h, mask)
        h = F.gelu(self.norm(h))
        h, updated = self.conv1(h, updated)
        if self.residual:
            h = F.add(h, x)
        return h, updated


class DoubleConvNeXtBlock(Module):
    """
    Два последовательных остаточных под-блока; смена числа каналов в первом.
    """

    def __init__(self, rng: np.random.Generator, in_channels: int, out_channels: int, noise: bool = False, eps: float = 1e-6):
        super().__init__()
        self.first = self.child("first", ConvNeXtSubBlock(rng, in_channels, out_channels, noise, eps))
        self.second = self.child("second", ConvNeXtSubBlock(rng, out_channels, out_channels, noise, eps))

    def __call__(self, x: Tensor, mask: np.ndarray, noise: NoiseSource | None = None) -> tuple[Tensor, np.ndarray]:
        x, mask = self.first(x, mask, noise)
        return self.second(x, mask, noise)


class UpsampleBlock(Module):
    """
    Билинейное увеличение ×2, [шум], частичная свертка 3×3 на маске более тонкого уровня.
    """

    def __init__(self, rng: np.random.Generator, channels: int, noise: bool = False):
        super().__init__()
        self.noise = noise
        self.conv = self.child("conv", PartialConv2d(rng, channels + int(noise), channels, 3))

    def __call__(self, x: Tensor, masks: MaskState, level: int, noise: NoiseSource | None = None) -> tuple[Tensor, np.ndarray]:
        finer = masks.at(level)
        h = F.upsample_bilinear2x(x)
        if finer.shape != h.shape[-2:]:
            raise ShapeMismatchError(f"stored mask {finer.shape} does not match upsampled shape {h.shape[-2:]}")
        if self.noise:
            h = F.concat([h, _noise_channel(h, noise)], axis=-3)
        h, _ = self.conv(h, finer)
        return h, finer


class OutputBlock(Module):
    """
    LayerNorm -> ReLU -> частичная свертка 1×1 в одно поле.
    """

    def __init__(self, rng: np.random.Generator, channels: int, eps: float = 1e-6):
        super().__init__()
        self.norm = self.child("norm", LayerNorm(channels, eps))
        self.conv = self.child("conv", PartialConv2d(rng, channels, 1, 1))

    def __call__(self, x: Tensor, mask: np.ndarray) -> tuple[Tensor, np.ndarray]:
        return self.conv(F.relu(self.norm(x)), mask)
