"""
Модуль оптимизации: Adam, косинусный шаг обучения, отжиг β и накопление градиентов.
"""
import math

import numpy as np

from autodiff import Tensor
from utils.exceptions import NonFiniteError, ShapeMismatchError


class OptimState:
    """
    Моменты Adam по именам параметров и счетчик шагов.
    """

    def __init__(self, shapes: dict[str, tuple[int, ...]], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.v = {name: np.zeros(shape) for name, shape in shapes.items()}

    @classmethod
    def for_parameters(cls, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "OptimState":
        return cls({name: tensor.shape for name, tensor in params.items()}, beta1, beta2, eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"m/{name}": value for name, value in self.m.items()}
        arrays.update({f"v/{name}": value for name, value in self.v.items()})
        arrays["step"] = np.array(self.step)
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name in self.m:
            self.m[name] = np.array(arrays[f"m/{name}"], dtype=float)
            self.v[name] = np.array(arrays[f"v/{name}"], dtype=float)
        self.step = int(arrays["step"])


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: OptimState, lr: float) -> OptimState:
    """
    Один шаг Adam с коррекцией смещения моментов; параметры обновляются на месте.

    Args:
        params: Параметры по именам
        grads: Градиенты по тем же именам
        state: Состояние оптимизатора
        lr: Шаг обучения

    Returns:
        OptimState: Обновленное состояние
    """
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, tensor in params.items():
        grad = grads[name]
        if grad.shape != tensor.shape:
            raise ShapeMismatchError(f"gradient of '{name}' has shape {grad.shape}, expected {tensor.shape}")
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * grad * grad
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


def cosine_lr(step: int, total_steps: int, max_lr: float) -> float:
    """
    lr = max_lr·½(1 + cos(π·step/total)).
    """
    if total_steps <= 0:
        return max_lr
    progress = min(max(step, 0), total_steps) / total_steps
    return max_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def beta_schedule(epoch: int, beta_max: float, anneal_epochs: int) -> float:
    """
    Линейный рост β от 0 до beta_max за anneal_epochs эпох (счет с 0), далее константа.
    """
    if anneal_epochs <= 0:
        return beta_max
    return beta_max * min(epoch / anneal_epochs, 1.0)


def collect_gradients(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """
    Градиенты параметров после обратного прохода; несвязанные параметры дают нули.
    """
    grads = {}
    for name, tensor in params.items():
        grad = np.zeros(tensor.shape) if tensor.grad is None else tensor.grad
        if not np.isfinite(grad).all():
            raise NonFiniteError(f"non-finite gradient for '{name}'")
        grads[name] = grad
    return grads


def accumulate_gradients(micro_batches: list[dict[str, np.ndarray]], weights: list[float] | None = None) -> dict[str, np.ndarray]:
    """
    Среднее градиентов микропакетов (с весами по числу элементов).

    Args:
        micro_batches: Градиенты каждого микропакета
        weights: Веса микропакетов (по умолчанию равные)

    Returns:
        dict: Усредненные градиенты
    """
    if not micro_batches:
        raise ShapeMismatchError("no micro-batches to accumulate")
    weights = np.ones(len(micro_batches)) if weights is None else np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    return {
        name: sum(weight * grads[name] for weight, grads in zip(weights, micro_batches))
        for name in micro_batches[0]
    }
