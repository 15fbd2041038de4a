"""
Модуль проверки градиентов центральными конечными разностями.
"""
from typing import Callable

import numpy as np
from pydantic import BaseModel, Field

from autodiff.graph import backward
from autodiff.tensor import Tensor, no_grad


class GradCheckReport(BaseModel):
    """
    Результат сравнения аналитических и численных градиентов.
    """
    max_rel_error: float = Field(..., description="Max |a - n| / max(|a|, |n|, floor)")
    max_abs_error: float
    n_checked: int = Field(..., description="Number of compared coordinates")
    tol: float
    passed: bool


def grad_check(
    f: Callable[..., Tensor],
    inputs: Tensor | list[Tensor],
    tol: float = 1e-4,
    step: float = 1e-5,
    n_coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-5,
) -> GradCheckReport:
    """
    Сравнивает градиент скалярной функции с центральными разностями.

    Args:
        f: Функция от входов, возвращающая скалярный тензор
        inputs: Листья, по которым проверяется градиент (requires_grad=True)
        tol: Допустимая относительная ошибка
        step: Шаг конечной разности
        n_coords: Число случайно выбранных координат на каждый вход (по умолчанию все)
        rng: Генератор для выбора координат
        floor: Нижняя граница знаменателя относительной ошибки

    Returns:
        GradCheckReport: Отчет с максимальной ошибкой и признаком успеха
    """
    inputs = [inputs] if isinstance(inputs, Tensor) else list(inputs)
    rng = rng or np.random.default_rng(0)
    for x in inputs:
        x.data = np.array(x.data, copy=True)
    analytic = backward(f(*inputs), leaves=inputs)

    max_rel = max_abs = 0.0
    n_checked = 0
    for x, grad in zip(inputs, analytic):
        flat = x.data.reshape(-1)
        coords = np.arange(flat.size)
        if n_coords is not None and n_coords < flat.size:
            coords = rng.choice(flat.size, size=n_coords, replace=False)
        for i in coords:
            original = flat[i]
            with no_grad():
                flat[i] = original + step
                plus = f(*inputs).item()
                flat[i] = original - step
                minus = f(*inputs).item()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * step)
            exact = grad.reshape(-1)[i]
            abs_error = abs(exact - numeric)
            max_abs = max(max_abs, abs_error)
            max_rel = max(max_rel, abs_error / max(abs(exact), abs(numeric), floor))
            n_checked += 1
    return GradCheckReport(max_rel_error=max_rel, max_abs_error=max_abs, n_checked=n_checked, tol=tol, passed=max_rel < tol)
