import numpy as np
import pytest

from autodiff import Graph, Tensor, backward, functional as F, grad_check, no_grad, strict_finite
from utils.exceptions import NonFiniteError, ShapeMismatchError


def test_square_derivative():
    x = Tensor(3.0, requires_grad=True)
    (x * x).backward()
    assert x.grad == pytest.approx(6.0)


def test_relu_backward_at_negative_input():
    x = Tensor([-2.0, 1.5], requires_grad=True)
    F.sum(F.relu(x)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_sum_of_leaf_gives_ones_and_disconnected_leaf_gives_zeros():
    a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    b = Tensor(np.ones(4), requires_grad=True)
    grad_a, grad_b = backward(F.sum(a), leaves=[a, b])
    np.testing.assert_array_equal(grad_a, np.ones((2, 3)))
    np.testing.assert_array_equal(grad_b, np.zeros(4))


def test_shared_node_gradients_are_summed():
    x = Tensor(2.0, requires_grad=True)
    y = F.exp(x)
    loss = y * y + y
    graph = Graph(loss)
    assert sum(node is y for node in graph.order) == 1
    (grad,) = backward(loss, leaves=[x])
    assert grad == pytest.approx(2 * np.exp(4.0) + np.exp(2.0))


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeMismatchError):
        backward(x * 2.0)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = F.mul(x, 2.0)
    assert not y.requires_grad
    assert y.is_leaf


def test_strict_finite_raises_on_non_finite_result():
    with strict_finite():
        with pytest.raises(NonFiniteError):
            F.log(Tensor([0.0, 1.0]))
    assert np.isneginf(F.log(Tensor([0.0])).data).all()


def test_broadcast_mismatch_is_rejected():
    with pytest.raises(ShapeMismatchError):
        F.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_linear_function_has_machine_precision_gradient():
    w = np.random.default_rng(0).normal(size=5)
    report = grad_check(lambda x: F.sum(F.mul(x, w)), Tensor(np.ones(5), requires_grad=True))
    assert report.passed
    assert report.max_abs_error < 1e-9


def test_abs_away_from_zero():
    assert grad_check(lambda x: F.sum(F.abs(x)), Tensor(1.0, requires_grad=True)).passed


def test_random_composition_matches_finite_differences():
    rng = np.random.default_rng(1)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    c = Tensor(rng.uniform(1.0, 2.0, size=(3, 2)), requires_grad=True)

    def f(a, b, c):
        h = F.gelu(F.matmul(a, b))
        h = F.div(F.exp(F.mul(h, 0.5)), c)
        h = F.sub(h, F.log(c))
        return F.mean(F.mul(h, h))

    report = grad_check(f, [a, b, c], tol=1e-4)
    assert report.passed, report


def test_layer_norm_gradient():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(2, 3, 4, 4)), requires_grad=True)
    gamma = Tensor(rng.normal(size=(3, 1, 1)), requires_grad=True)
    beta = Tensor(rng.normal(size=(3, 1, 1)), requires_grad=True)
    target = rng.normal(size=(2, 3, 4, 4))

    def f(x, gamma, beta):
        return F.sum(F.mul(F.layer_norm(x, gamma, beta), target))

    assert grad_check(f, [x, gamma, beta], tol=1e-4).passed


def test_conv2d_matches_loop_and_gradient():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    out = F.conv2d(Tensor(x), Tensor(w)).data
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    expected = np.zeros((3, 5, 5))
    for o in range(3):
        for i in range(5):
            for j in range(5):
                expected[o, i, j] = (padded[:, i:i + 3, j:j + 3] * w[o]).sum()
    np.testing.assert_allclose(out, expected, atol=1e-12)

    target = rng.normal(size=(3, 5, 5))
    xt, wt = Tensor(x, requires_grad=True), Tensor(w, requires_grad=True)
    assert grad_check(lambda a, b: F.sum(F.mul(F.conv2d(a, b), target)), [xt, wt]).passed


def test_conv2d_rejects_even_kernel():
    with pytest.raises(ShapeMismatchError):
        F.conv2d(Tensor(np.ones((1, 4, 4))), Tensor(np.ones((1, 1, 2, 2))))


def test_pooling_and_upsampling_gradients():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(2, 4, 4)), requires_grad=True)
    valid = np.ones((4, 4), dtype=bool)
    valid[0, :2] = False
    target = rng.normal(size=(2, 2, 2))
    assert grad_check(lambda a: F.sum(F.mul(F.max_pool2x2(a, valid), target)), x).passed
    assert grad_check(lambda a: F.sum(F.mul(F.avg_pool2x2_masked(a, valid)[0], target)), x).passed
    up_target = rng.normal(size=(2, 8, 8))
    assert grad_check(lambda a: F.sum(F.mul(F.upsample_bilinear2x(a), up_target)), x).passed


def test_avg_pool_masked_values():
    x = np.arange(16.0).reshape(4, 4)
    valid = np.ones((4, 4), dtype=bool)
    valid[0, 0] = False
    valid[2:, 2:] = False
    pooled, pooled_valid = F.avg_pool2x2_masked(Tensor(x), valid)
    assert pooled.data[0, 0] == pytest.approx((1 + 4 + 5) / 3)
    assert pooled.data[1, 1] == 0.0
    np.testing.assert_array_equal(pooled_valid, [[True, True], [True, False]])


def test_bilinear_upsampling_of_ramp_is_exact_in_interior():
    ramp = np.tile(np.arange(4.0), (4, 1))
    out = F.upsample_bilinear2x(Tensor(ramp)).data
    expected = (np.arange(8) + 0.5) / 2.0 - 0.5
    np.testing.assert_allclose(out[:, 1:-1], np.tile(expected[1:-1], (8, 1)), atol=1e-12)


def test_concat_reshape_and_fancy_index_gradients():
    rng = np.random.default_rng(5)
    a = Tensor(rng.normal(size=(1, 2, 3, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(1, 1, 3, 3)), requires_grad=True)
    rows = np.array([0, 1, 2, 2])[:, None]
    cols = np.array([0, 1, 2, 2])[None, :]
    target = rng.normal(size=(1, 3, 4, 4))

    def f(a, b):
        joined = F.concat([a, b], axis=-3)
        picked = F.getitem(joined, (Ellipsis, rows, cols))
        return F.sum(F.mul(F.reshape(picked, (3, 4, 4)), target[0]))

    assert grad_check(f, [a, b]).passed


def test_clamp_passes_gradient_inside_only():
    x = Tensor([-0.5, 0.5, 1.5], requires_grad=True)
    F.sum(F.clamp(x, 0.0, 1.0)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])
