"""
Модуль тензора с записью графа вычислений.

Tensor хранит массив значений двойной точности, флаг requires_grad и ссылки
на родительские узлы вместе с функцией обратного прохода. Операторы Python
делегируются примитивам из autodiff.functional.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Sequence

import numpy as np

from configuration.base import DTYPE
from configuration.settings import settings
from utils.exceptions import NonFiniteError


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_strict_finite: ContextVar[bool] = ContextVar("strict_finite", default=settings.SEAICE_STRICT_FINITE)


@contextmanager
def no_grad():
    """
    Контекст без записи графа (инференс, валидация, численные производные).
    """
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


@contextmanager
def strict_finite(enabled: bool = True):
    """
    Контекст, в котором любой примитив с неконечным результатом вызывает NonFiniteError.
    """
    token = _strict_finite.set(enabled)
    try:
        yield
    finally:
        _strict_finite.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Tensor:
    """
    N-мерный массив, участвующий в записанном графе вычислений.
    """
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op", "name")
    __array_priority__ = 1000 # Чтобы ndarray + Tensor уходил в Tensor.__radd__

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: np.ndarray = np.array(data, dtype=DTYPE, copy=True) if requires_grad else np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple["Tensor", ...] = ()
        self.backward_fn: BackwardFn | None = None
        self.op = "leaf"
        self.name = name

    @classmethod
    def from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward_fn: BackwardFn, op: str) -> "Tensor":
        """
        Создает результат примитива и, если нужно, записывает его в граф.

        Args:
            data: Значения результата
            parents: Входные тензоры примитива
            backward_fn: Отображение градиента результата в градиенты входов
            op: Имя примитива

        Returns:
            Tensor: Узел графа
        """
        out = cls(data)
        if _strict_finite.get() and not np.isfinite(out.data).all():
            raise NonFiniteError(f"non-finite values produced by '{op}'")
        out.op = op
        if _grad_enabled.get() and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out.parents = parents
            out.backward_fn = backward_fn
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        """
        Обратный проход от скалярного тензора; градиенты листьев накапливаются в .grad.
        """
        from autodiff.graph import backward
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return F.add(self, other)

    def __radd__(self, other):
        return F.add(other, self)

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(other, self)

    def __mul__(self, other):
        return F.mul(self, other)

    def __rmul__(self, other):
        return F.mul(other, self)

    def __truediv__(self, other):
        return F.div(self, other)

    def __rtruediv__(self, other):
        return F.div(other, self)

    def __neg__(self):
        return F.mul(self, -1.0)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __getitem__(self, index):
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return F.reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)


def as_tensor(value) -> Tensor:
    """
    Оборачивает число или массив в константный тензор.
    """
    return value if isinstance(value, Tensor) else Tensor(value)


from autodiff import functional as F  # noqa: E402
