"""
Модуль сетей cVAE: кодировщик и априорная сеть (гауссовы головы), генератор
и детерминированная сеть.
"""
import numpy as np

from autodiff import Tensor, functional as F
from configuration.run_config import ArchitectureConfig
from layers import Dense, DoubleConvNeXtBlock, LayerNorm, MaskState, Module, NoiseSource, PartialConv2d, UpsampleBlock, downsample


class EncoderBody(Module):
    """
    Вход -> pconv 3×3 (w0) -> LN -> DCN(w1) -> pool -> DCN(w2) -> pool -> DCN(w3) -> pool -> DCN(w4) -> pool -> DCN(w4).
    """

    def __init__(self, rng: np.random.Generator, in_channels: int, arch: ArchitectureConfig):
        super().__init__()
        w = arch.widths
        eps = arch.layer_norm_eps
        self.stem = self.child("stem", PartialConv2d(rng, in_channels, w[0], 3))
        self.stem_norm = self.child("stem_norm", LayerNorm(w[0], eps))
        self.stages = [
            self.child(f"stage{i}", DoubleConvNeXtBlock(rng, w[i], w[i + 1], eps=eps))
            for i in range(4)
        ]
        self.bottom = self.child("bottom", DoubleConvNeXtBlock(rng, w[4], w[4], eps=eps))

    def __call__(self, x: Tensor, masks: MaskState) -> tuple[Tensor, np.ndarray]:
        h, mask = self.stem(x, masks.full)
        h = self.stem_norm(h)
        for stage in self.stages:
            h, mask = stage(h, mask)
            h, mask = downsample(h, mask)
        return self.bottom(h, mask)


class GaussianNet(Module):
    """
    Тело кодировщика -> LN -> среднее по допустимым ячейкам -> Dense(2·D_z) = (μ, log σ²).
    """

    def __init__(self, rng: np.random.Generator, in_channels: int, arch: ArchitectureConfig):
        super().__init__()
        self.latent_dim = arch.latent_dim
        self.body = self.child("body", EncoderBody(rng, in_channels, arch))
        self.norm = self.child("norm", LayerNorm(arch.widths[4], arch.layer_norm_eps))
        self.head = self.child("head", Dense(rng, arch.widths[4], 2 * arch.latent_dim))

    def __call__(self, x: Tensor, masks: MaskState) -> tuple[Tensor, Tensor]:
        h, mask = self.body(x, masks)
        h = self.norm(h)
        weights = mask.astype(float) / max(mask.sum(), 1)
        pooled = F.sum(F.mul(h, weights), axis=(-2, -1))
        out = self.head(pooled)
        return out[..., :self.latent_dim], out[..., self.latent_dim:]


class DecoderBody(Module):
    """
    {Upsampling(+шум) -> DCN(+шум)} × 4 от разрешения H/16 к полному.
    """

    def __init__(self, rng: np.random.Generator, arch: ArchitectureConfig, noise_levels: list[bool]):
        super().__init__()
        w = arch.widths
        eps = arch.layer_norm_eps
        self.ups = []
        self.blocks = []
        for stage in range(4):
            width_in, width_out = w[4 - stage], w[3 - stage]
            noise = noise_levels[stage]
            self.ups.append(self.child(f"up{stage}", UpsampleBlock(rng, width_in, noise)))
            self.blocks.append(self.child(f"block{stage}", DoubleConvNeXtBlock(rng, width_in, width_out, noise, eps)))

    def __call__(self, h: Tensor, masks: MaskState, noise: NoiseSource | None = None) -> tuple[Tensor, np.ndarray]:
        for stage, (up, block) in enumerate(zip(self.ups, self.blocks)):
            h, mask = up(h, masks, 3 - stage, noise)
            h, _ = block(h, mask, noise)
        return h, masks.full


class Generator(Module):
    """
    Латентный вектор -> Dense(w4·H/16·W/16) -> тело декодера с инъекцией шума.
    """

    def __init__(self, rng: np.random.Generator, arch: ArchitectureConfig, shape: tuple[int, int]):
        super().__init__()
        factor = arch.downsample_factor
        self.coarse_shape = (arch.widths[4], shape[0] // factor, shape[1] // factor)
        self.dense = self.child("dense", Dense(rng, arch.latent_dim, int(np.prod(self.coarse_shape))))
        self.decoder = self.child("decoder", DecoderBody(rng, arch, arch.noise_levels))

    def __call__(self, z: Tensor, masks: MaskState, noise: NoiseSource | None = None) -> tuple[Tensor, np.ndarray]:
        h = F.reshape(self.dense(z), (*z.shape[:-1], *self.coarse_shape))
        return self.decoder(h, masks, noise)


class DeterministicNet(Module):
    """
    Тело кодировщика и тело декодера без латентного пространства и шума.
    """

    def __init__(self, rng: np.random.Generator, in_channels: int, arch: ArchitectureConfig):
        super().__init__()
        self.encoder = self.child("encoder", EncoderBody(rng, in_channels, arch))
        self.decoder = self.child("decoder", DecoderBody(rng, arch, [False] * 4))

    def __call__(self, x: Tensor, masks: MaskState) -> tuple[Tensor, np.ndarray]:
        h, _ = self.encoder(x, masks)
        return self.decoder(h, masks)
