"""
Модуль составных блоков сети с распространением маски суши.
"""
from layers.blocks import (
    ConvNeXtSubBlock,
    Dense,
    DoubleConvNeXtBlock,
    LayerNorm,
    NoiseSource,
    OutputBlock,
    PartialConv2d,
    UpsampleBlock,
    downsample,
    partial_conv2d,
)
from layers.masks import MaskState, or_pool2x2
from layers.module import Module, truncated_normal
