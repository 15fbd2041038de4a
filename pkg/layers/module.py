"""
Модуль базового класса обучаемых блоков.

Параметры и вложенные блоки регистрируются явно и адресуются стабильным
путем имен через точку (например, "encoder.stage1.first.conv3.weight").
"""
from typing import Iterator

import numpy as np
from scipy.stats import truncnorm

from autodiff import Tensor
from utils.exceptions import ShapeMismatchError


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """
    Усеченное (±2σ) нормальное распределение с σ = 1/√fan_in.
    """
    std = 1.0 / np.sqrt(max(fan_in, 1))
    return truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=std, size=shape, random_state=rng)


class Module:
    """
    Блок с именованными параметрами и вложенными блоками.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, "Module"] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        """
        Все параметры блока и вложенных блоков; общие экземпляры выдаются один раз.
        """
        seen: set[int] = set()
        for name, tensor in self._named_parameters(prefix):
            if id(tensor) not in seen:
                seen.add(id(tensor))
                yield name, tensor

    def _named_parameters(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for name, tensor in self._params.items():
            yield f"{prefix}{name}", tensor
        for name, module in self._children.items():
            yield from module._named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [tensor for _, tensor in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        Загружает значения параметров по именам; набор имен и формы должны совпадать.
        """
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise ShapeMismatchError(f"parameter names differ: missing={missing[:5]} unexpected={extra[:5]}")
        for name, tensor in own.items():
            value = np.asarray(state[name], dtype=tensor.data.dtype)
            if value.shape != tensor.shape:
                raise ShapeMismatchError(f"parameter '{name}' has shape {value.shape}, expected {tensor.shape}")
            tensor.data = value.copy()

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.grad = None
