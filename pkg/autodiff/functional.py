"""
Модуль примитивов автоматического дифференцирования.

Каждый примитив считает прямой проход на numpy и регистрирует функцию
обратного прохода, возвращающую градиенты по всем входам. Тензоры
пространственных данных имеют форму [..., C, H, W]; ведущие оси служат
пакетной размерностью.
"""
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from autodiff.tensor import Tensor, as_tensor
from utils.exceptions import ShapeMismatchError


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """
    Сворачивает градиент, полученный после broadcasting, обратно к форме входа.
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatchError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc


# Арифметика

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data

    def backward(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return Tensor.from_op(out, (a, b), backward, "div")


def matmul(a, b) -> Tensor:
    """
    Произведение [..., D] @ [D, O] -> [..., O].
    """
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        grad_a = g @ b.data.T
        grad_b = a.data.reshape(-1, b.shape[0]).T @ g.reshape(-1, b.shape[1])
        return grad_a, grad_b

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


# Свертка, пулинг, интерполяция

def conv2d(x, w) -> Tensor:
    """
    Двумерная свертка (кросс-корреляция) с шагом 1 и нулевым дополнением "same".

    Args:
        x: Вход [..., C, H, W]
        w: Ядро [O, C, k, k], k нечетное

    Returns:
        Tensor: Выход [..., O, H, W]
    """
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 4 or w.shape[-1] != w.shape[-2] or w.shape[-1] % 2 == 0:
        raise ShapeMismatchError(f"conv2d: kernel must be [O, C, k, k] with odd k, got {w.shape}")
    if x.ndim < 3 or x.shape[-3] != w.shape[1]:
        raise ShapeMismatchError(f"conv2d: input channels {x.shape[-3:-2]} != kernel channels {w.shape[1]}")
    lead = x.shape[:-3]
    channels, height, width = x.shape[-3:]
    k = w.shape[-1]
    pad = k // 2
    x4 = x.data.reshape(-1, channels, height, width)
    padded = np.pad(x4, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (k, k), axis=(-2, -1)) # [B, C, H, W, k, k]
    out = np.einsum("bchwij,ocij->bohw", windows, w.data, optimize=True)

    def backward(g):
        g4 = g.reshape(-1, w.shape[0], height, width)
        grad_w = np.einsum("bohw,bchwij->ocij", g4, windows, optimize=True)
        g_windows = sliding_window_view(np.pad(g4, ((0, 0), (0, 0), (pad, pad), (pad, pad))), (k, k), axis=(-2, -1))
        grad_x = np.einsum("bohwij,ocij->bchw", g_windows, w.data[:, :, ::-1, ::-1], optimize=True)
        return grad_x.reshape(x.shape), grad_w

    return Tensor.from_op(out.reshape(*lead, w.shape[0], height, width), (x, w), backward, "conv2d")


def _patches(array: np.ndarray) -> np.ndarray:
    """
    [..., H, W] -> [..., H/2, W/2, 4]
    """
    *lead, height, width = array.shape
    n = len(lead)
    blocks = array.reshape(*lead, height // 2, 2, width // 2, 2)
    perm = list(range(n)) + [n, n + 2, n + 1, n + 3]
    return blocks.transpose(perm).reshape(*lead, height // 2, width // 2, 4)


def _unpatches(array: np.ndarray) -> np.ndarray:
    *lead, half_h, half_w, _ = array.shape
    n = len(lead)
    blocks = array.reshape(*lead, half_h, half_w, 2, 2)
    perm = list(range(n)) + [n, n + 2, n + 1, n + 3]
    return blocks.transpose(perm).reshape(*lead, half_h * 2, half_w * 2)


def max_pool2x2(x, valid: np.ndarray | None = None) -> Tensor:
    """
    Max-pool 2×2 по допустимым ячейкам.

    Максимум берется только по ячейкам, где valid истинно; если в окне нет ни
    одной допустимой ячейки, выход равен 0. Градиент уходит в ячейку-максимум.

    Args:
        x: Вход [..., H, W] с четными H и W
        valid: Маска допустимых ячеек [H, W] (по умолчанию все допустимы)

    Returns:
        Tensor: Выход [..., H/2, W/2]
    """
    x = as_tensor(x)
    height, width = x.shape[-2:]
    if height % 2 or width % 2:
        raise ShapeMismatchError(f"max_pool2x2 requires even spatial dims, got {(height, width)}")
    if valid is None:
        valid = np.ones((height, width), dtype=bool)
    if valid.shape != (height, width):
        raise ShapeMismatchError(f"max_pool2x2: mask shape {valid.shape} != {(height, width)}")
    blocks = _patches(x.data)
    valid_blocks = _patches(valid)
    index = np.argmax(np.where(valid_blocks, blocks, -np.inf), axis=-1)[..., None]
    any_valid = valid_blocks.any(axis=-1)
    out = np.where(any_valid, np.take_along_axis(blocks, index, axis=-1)[..., 0], 0.0)

    def backward(g):
        grad_blocks = np.zeros(blocks.shape)
        np.put_along_axis(grad_blocks, index, np.where(any_valid, g, 0.0)[..., None], axis=-1)
        return (_unpatches(grad_blocks),)

    return Tensor.from_op(out, (x,), backward, "max_pool2x2")


def avg_pool2x2_masked(x, valid: np.ndarray) -> tuple[Tensor, np.ndarray]:
    """
    Среднее 2×2 только по допустимым ячейкам; окна без допустимых ячеек дают 0.

    Returns:
        tuple: (Tensor [..., H/2, W/2], маска окон с хотя бы одной допустимой ячейкой)
    """
    x = as_tensor(x)
    height, width = x.shape[-2:]
    if height % 2 or width % 2:
        raise ShapeMismatchError(f"avg_pool2x2_masked requires even spatial dims, got {(height, width)}")
    valid_blocks = _patches(valid).astype(x.data.dtype)
    counts = valid_blocks.sum(axis=-1)
    pooled_valid = counts > 0
    scale = np.where(pooled_valid, 1.0 / np.maximum(counts, 1.0), 0.0)
    out = (_patches(x.data) * valid_blocks).sum(axis=-1) * scale

    def backward(g):
        return (_unpatches((g * scale)[..., None] * valid_blocks),)

    return Tensor.from_op(out, (x,), backward, "avg_pool2x2_masked"), pooled_valid


@lru_cache(maxsize=32)
def bilinear_matrix(n: int) -> np.ndarray:
    """
    Матрица [2n, n] двукратной билинейной интерполяции с выравниванием по центрам ячеек.
    """
    matrix = np.zeros((2 * n, n))
    for p in range(2 * n):
        source = (p + 0.5) / 2.0 - 0.5
        low = int(np.floor(source))
        frac = source - low
        matrix[p, min(max(low, 0), n - 1)] += 1.0 - frac
        matrix[p, min(max(low + 1, 0), n - 1)] += frac
    matrix.setflags(write=False)
    return matrix


def upsample_bilinear2x(x) -> Tensor:
    """
    Билинейное увеличение разрешения в 2 раза: U_H · x · U_Wᵀ по двум последним осям.
    """
    x = as_tensor(x)
    rows = bilinear_matrix(x.shape[-2])
    cols = bilinear_matrix(x.shape[-1])

    def backward(g):
        return (rows.T @ g @ cols,)

    return Tensor.from_op(rows @ x.data @ cols.T, (x,), backward, "upsample_bilinear2x")


# Формы

def concat(tensors, axis: int = -3) -> Tensor:
    """
    Конкатенация по оси (по умолчанию по каналам).
    """
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatchError(f"concat: {[t.shape for t in tensors]} along axis {axis}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.from_op(out, tuple(tensors), backward, "concat")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatchError(f"reshape: cannot reshape {x.shape} to {shape}") from exc

    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor.from_op(out, (x,), backward, "reshape")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(item is None or item is Ellipsis or isinstance(item, (slice, int, np.integer)) for item in items)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    basic = _is_basic_index(index)

    def backward(g):
        if basic:
            grad = np.zeros(x.shape)
            grad[index] += g
            return (grad,)
        # Повторяющиеся индексы: вклады складываются по плоским номерам
        flat = np.arange(x.size).reshape(x.shape)[index]
        grad = np.bincount(flat.ravel(), weights=np.broadcast_to(g, flat.shape).ravel(), minlength=x.size)
        return (grad.reshape(x.shape),)

    return Tensor.from_op(x.data[index], (x,), backward, "getitem")


# Нормализация и активации

def layer_norm(x, gamma, beta, axis: int = -3, eps: float = 1e-6) -> Tensor:
    """
    Нормализация по оси каналов в каждой пространственной точке.

    Args:
        x: Вход [..., C, H, W] (или [..., C] при axis=-1)
        gamma: Масштаб, совместимый по broadcasting (например [C, 1, 1])
        beta: Сдвиг той же формы
        axis: Ось нормализации
        eps: Добавка к дисперсии

    Returns:
        Tensor: Нормализованный вход
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[axis]
    centered = x.data - x.data.mean(axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=axis, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gamma.data + beta.data

    def backward(g):
        g_normed = g * gamma.data
        grad_x = inv_std / n * (
            n * g_normed
            - g_normed.sum(axis=axis, keepdims=True)
            - normed * (g_normed * normed).sum(axis=axis, keepdims=True)
        )
        return grad_x, _unbroadcast(g * normed, gamma.shape), _unbroadcast(g, beta.shape)

    return Tensor.from_op(out, (x, gamma, beta), backward, "layer_norm")


def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0

    def backward(g):
        return (g * positive,)

    return Tensor.from_op(np.where(positive, x.data, 0.0), (x,), backward, "relu")


def gelu(x) -> Tensor:
    """
    Точная GELU: x·Φ(x).
    """
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data ** 2)
        return (g * (cdf + x.data * pdf),)

    return Tensor.from_op(x.data * cdf, (x,), backward, "gelu")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return Tensor.from_op(out, (x,), backward, "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def backward(g):
        return (g / x.data,)

    return Tensor.from_op(out, (x,), backward, "log")


def abs(x) -> Tensor:
    """
    |x| с субградиентом 0 в нуле.
    """
    x = as_tensor(x)

    def backward(g):
        return (g * np.sign(x.data),)

    return Tensor.from_op(np.abs(x.data), (x,), backward, "abs")


def clamp(x, low: float | None = None, high: float | None = None) -> Tensor:
    """
    Ограничение значений отрезком [low, high]; градиент пропускается внутри отрезка.
    """
    x = as_tensor(x)
    out = np.clip(x.data, low, high)
    inside = np.ones(x.shape, dtype=bool)
    if low is not None:
        inside &= x.data >= low
    if high is not None:
        inside &= x.data <= high

    def backward(g):
        return (g * inside,)

    return Tensor.from_op(out, (x,), backward, "clamp")


# Редукции

def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(out, (x,), backward, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    out = x.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return Tensor.from_op(out, (x,), backward, "mean")


def square(x) -> Tensor:
    return mul(x, x)
