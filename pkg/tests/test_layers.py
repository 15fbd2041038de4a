import numpy as np
import pytest

from autodiff import Tensor, functional as F, grad_check
from layers import (
    Dense,
    DoubleConvNeXtBlock,
    MaskState,
    NoiseSource,
    OutputBlock,
    UpsampleBlock,
    downsample,
    or_pool2x2,
    partial_conv2d,
)
from utils.exceptions import ShapeMismatchError


def _reference_partial_conv(x: np.ndarray, mask: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Поклеточная реализация правила перенормировки.
    """
    out_channels, _, k, _ = weight.shape
    pad = k // 2
    height, width = mask.shape
    out = np.zeros((out_channels, height, width))
    updated = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            inside_valid = outside = 0
            acc = np.zeros(out_channels)
            for di in range(k):
                for dj in range(k):
                    r, c = i + di - pad, j + dj - pad
                    if not (0 <= r < height and 0 <= c < width):
                        outside += 1
                        continue
                    if mask[r, c]:
                        inside_valid += 1
                        acc += weight[:, :, di, dj] @ x[:, r, c]
            if inside_valid == 0:
                continue
            updated[i, j] = True
            out[:, i, j] = acc * k * k / (inside_valid + outside) + bias
    return out, updated


def test_partial_conv_identity_kernel_on_valid_mask():
    x = np.random.default_rng(0).normal(size=(1, 6, 6))
    weight = np.zeros((1, 1, 3, 3))
    weight[0, 0, 1, 1] = 1.0
    out, mask = partial_conv2d(Tensor(x), np.ones((6, 6), dtype=bool), Tensor(weight), Tensor(np.zeros(1)))
    np.testing.assert_allclose(out.data, x, atol=1e-12)
    assert mask.all()


def test_partial_conv_all_invalid_mask():
    x = np.random.default_rng(1).normal(size=(2, 4, 4))
    weight = np.random.default_rng(2).normal(size=(3, 2, 3, 3))
    out, mask = partial_conv2d(Tensor(x), np.zeros((4, 4), dtype=bool), Tensor(weight), Tensor(np.ones(3)))
    np.testing.assert_array_equal(out.data, 0.0)
    assert not mask.any()


def test_partial_conv_matches_reference_with_island():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 7, 7))
    mask = rng.uniform(size=(7, 7)) > 0.4
    mask[3:5, 3:5] = False
    mask[0, :] = True
    weight = rng.normal(size=(3, 2, 3, 3))
    bias = rng.normal(size=3)
    out, updated = partial_conv2d(Tensor(x), mask, Tensor(weight), Tensor(bias))
    expected, expected_mask = _reference_partial_conv(x, mask, weight, bias)
    np.testing.assert_allclose(out.data, expected, atol=1e-12)
    np.testing.assert_array_equal(updated, expected_mask)


def test_partial_conv_rejects_wrong_channels():
    with pytest.raises(ShapeMismatchError):
        partial_conv2d(Tensor(np.ones((2, 4, 4))), np.ones((4, 4), dtype=bool), Tensor(np.ones((1, 3, 3, 3))), Tensor(np.zeros(1)))


def test_double_block_with_zero_weights_is_residual():
    block = DoubleConvNeXtBlock(np.random.default_rng(4), 3, 3)
    for _, tensor in block.named_parameters():
        tensor.data = np.zeros(tensor.shape)
    x = Tensor(np.random.default_rng(5).normal(size=(2, 3, 4, 4)))
    out, _ = block(x, np.ones((4, 4), dtype=bool))
    np.testing.assert_allclose(out.data, x.data, atol=1e-12)


def test_noise_block_is_deterministic_per_seed():
    block = DoubleConvNeXtBlock(np.random.default_rng(6), 2, 3, noise=True)
    x = Tensor(np.random.default_rng(7).normal(size=(1, 2, 4, 4)))
    mask = np.ones((4, 4), dtype=bool)
    first, _ = block(x, mask, NoiseSource(np.random.default_rng(8)))
    again, _ = block(x, mask, NoiseSource(np.random.default_rng(8)))
    other, _ = block(x, mask, NoiseSource(np.random.default_rng(9)))
    np.testing.assert_array_equal(first.data, again.data)
    assert not np.allclose(first.data, other.data)


def test_noise_enters_the_first_convolution_of_each_sub_block():
    block = DoubleConvNeXtBlock(np.random.default_rng(6), 2, 3, noise=True)
    shapes = {name: value.shape for name, value in block.state_dict().items()}
    assert shapes["first.conv3.weight"] == (3, 3, 3, 3)
    assert shapes["second.conv3.weight"] == (3, 4, 3, 3)
    assert shapes["first.conv1.weight"] == shapes["second.conv1.weight"] == (3, 3, 1, 1)
    quiet = DoubleConvNeXtBlock(np.random.default_rng(6), 2, 3)
    assert quiet.state_dict()["first.conv3.weight"].shape == (3, 2, 3, 3)


def test_disabled_noise_source_draws_zeros():
    assert not NoiseSource(None).draw((2, 3)).any()
    assert not NoiseSource(np.random.default_rng(0), enabled=False).draw((2, 3)).any()


def test_double_block_gradient():
    rng = np.random.default_rng(10)
    block = DoubleConvNeXtBlock(rng, 2, 3)
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = False
    x = Tensor(rng.normal(size=(1, 2, 4, 4)), requires_grad=True)
    target = rng.normal(size=(1, 3, 4, 4))
    params = [tensor for _, tensor in block.named_parameters()][:3]

    def f(*_):
        out, _ = block(x, mask)
        return F.sum(F.mul(out, target))

    report = grad_check(f, [x, *params], tol=1e-4, n_coords=8, rng=np.random.default_rng(11))
    assert report.passed, report


def test_downsample_constant_and_single_valid_cell():
    out, mask = downsample(Tensor(np.full((2, 4, 4), 0.3)), np.ones((4, 4), dtype=bool))
    np.testing.assert_allclose(out.data, 0.3)
    assert mask.shape == (2, 2) and mask.all()

    x = np.random.default_rng(12).normal(size=(4, 4))
    valid = np.ones((4, 4), dtype=bool)
    valid[0, 1] = valid[1, 0] = valid[1, 1] = False
    out, mask = downsample(Tensor(x), valid)
    assert out.data[0, 0] == x[0, 0]
    assert mask[0, 0]


def test_downsample_matches_patch_loop():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(6, 6))
    valid = rng.uniform(size=(6, 6)) > 0.3
    out, mask = downsample(Tensor(x), valid)
    for i in range(3):
        for j in range(3):
            patch = x[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            patch_valid = valid[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            expected = patch[patch_valid].max() if patch_valid.any() else 0.0
            assert out.data[i, j] == expected
            assert mask[i, j] == patch_valid.any()


def test_mask_pyramid():
    ocean = np.zeros((16, 16), dtype=bool)
    ocean[5, 6] = True
    masks = MaskState.from_ocean(ocean)
    assert [level.shape for level in masks.levels] == [(16, 16), (8, 8), (4, 4), (2, 2), (1, 1)]
    assert masks.at(1)[2, 3] and masks.at(1).sum() == 1
    assert masks.coarsest.all()
    with pytest.raises(ShapeMismatchError):
        masks.at(5)
    with pytest.raises(ShapeMismatchError):
        or_pool2x2(np.ones((3, 4), dtype=bool))


def test_upsample_block_constant_field_and_stored_mask():
    block = UpsampleBlock(np.random.default_rng(14), 1)
    weight = np.zeros((1, 1, 3, 3))
    weight[0, 0, 1, 1] = 1.0
    block.conv.weight.data = weight
    masks = MaskState.from_ocean(np.ones((8, 8), dtype=bool), depth=1)
    out, mask = block(Tensor(np.full((1, 1, 4, 4), 0.6)), masks, level=0)
    assert mask is masks.at(0)
    np.testing.assert_allclose(out.data, 0.6, atol=1e-12)
    with pytest.raises(ShapeMismatchError):
        block(Tensor(np.ones((1, 1, 2, 2))), masks, level=0)


def test_upsample_block_gradient():
    rng = np.random.default_rng(15)
    block = UpsampleBlock(rng, 2, noise=True)
    masks = MaskState.from_ocean(np.ones((8, 8), dtype=bool), depth=1)
    x = Tensor(rng.normal(size=(1, 2, 4, 4)), requires_grad=True)
    target = rng.normal(size=(1, 2, 8, 8))

    def f(a):
        out, _ = block(a, masks, 0, NoiseSource(np.random.default_rng(0)))
        return F.sum(F.mul(out, target))

    assert grad_check(f, x, n_coords=10).passed


def test_output_block_negative_preactivation_gives_zero():
    block = OutputBlock(np.random.default_rng(16), 3)
    block.norm.gamma.data = np.zeros((3, 1, 1))
    block.norm.beta.data = np.full((3, 1, 1), -1.0)
    out, _ = block(Tensor(np.random.default_rng(17).normal(size=(2, 3, 4, 4))), np.ones((4, 4), dtype=bool))
    np.testing.assert_array_equal(out.data, 0.0)
    assert out.shape == (2, 1, 4, 4)


def test_dense_layer():
    rng = np.random.default_rng(18)
    dense = Dense(rng, 3, 3)
    x = rng.normal(size=(4, 3))
    dense.weight.data = np.zeros((3, 3))
    dense.bias.data = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(dense(Tensor(x)).data, np.tile([1.0, 2.0, 3.0], (4, 1)))
    dense.weight.data = np.eye(3)
    dense.bias.data = np.zeros(3)
    np.testing.assert_allclose(dense(Tensor(x)).data, x)
    weight = rng.normal(size=(3, 3))
    dense.weight.data = weight
    expected = np.array([[sum(x[b, i] * weight[i, o] for i in range(3)) for o in range(3)] for b in range(4)])
    np.testing.assert_allclose(dense(Tensor(x)).data, expected, atol=1e-12)


def test_state_dict_round_trip_and_name_check():
    block = DoubleConvNeXtBlock(np.random.default_rng(19), 2, 2)
    state = block.state_dict()
    assert "first.conv3.weight" in state
    other = DoubleConvNeXtBlock(np.random.default_rng(20), 2, 2)
    other.load_state_dict(state)
    for name, tensor in other.named_parameters():
        np.testing.assert_array_equal(tensor.data, state[name])
    with pytest.raises(ShapeMismatchError):
        other.load_state_dict({"first.conv3.weight": state["first.conv3.weight"]})
