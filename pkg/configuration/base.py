"""
Модуль для конфигурации числовой среды.

Все вычисления ведутся в двойной точности, а независимые потоки случайных
чисел выводятся из корневого зерна и набора целочисленных ключей.
"""
import numpy as np


DTYPE = np.float64 # Рабочий тип всех вычислений
STORAGE_DTYPE = np.dtype("<f4") # Тип хранения массивов на диске (little-endian float32)

LAND_SENTINEL: float = float("nan") # Значение-заглушка в ячейках суши


def derive_rng(root_seed: int, *keys: int) -> np.random.Generator:
    """
    Создает независимый генератор случайных чисел для набора ключей.

    Args:
        root_seed: Корневое зерно запуска
        *keys: Целочисленные ключи потока (например, t, l, участник, кандидат)

    Returns:
        np.random.Generator: Генератор, однозначно определяемый ключами
    """
    sequence = np.random.SeedSequence([int(root_seed), *(int(key) for key in keys)])
    return np.random.default_rng(sequence)
