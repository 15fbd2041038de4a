"""
Модуль CRPS ансамбля.

Для верификации CRPS считается на numpy через отсортированных участников,
для обучения - на тензорах через попарные разности, чтобы градиент
проходил к каждому участнику ансамбля.
"""
import numpy as np

from autodiff import Tensor, as_tensor, functional as F
from utils.exceptions import GridMismatchError, ShapeMismatchError


def crps_ensemble_array(y: np.ndarray, members: np.ndarray) -> np.ndarray:
    """
    CRPS ансамбля по первой оси members для каждой точки y.

    (1/M)Σ|x_k − y| − (1/(2M²))ΣΣ|x_k − x_k'|; двойная сумма считается через
    порядковые статистики: (1/M²)Σ x_(k)(2k − M − 1).

    Args:
        y: Наблюдения [...]
        members: Участники [M, ...]

    Returns:
        np.ndarray: CRPS [...]
    """
    members = np.asarray(members, dtype=float)
    if members.shape[0] == 0:
        raise ShapeMismatchError("CRPS of an empty ensemble is undefined")
    n = members.shape[0]
    spread_weights = (2.0 * np.arange(1, n + 1) - n - 1).reshape((n,) + (1,) * (members.ndim - 1))
    skill = np.abs(members - y).mean(axis=0)
    spread = (np.sort(members, axis=0) * spread_weights).sum(axis=0) / n ** 2
    return skill - spread


def crps_ensemble(y: float, members) -> float:
    """
    CRPS одного наблюдения относительно M скалярных участников.
    """
    return float(crps_ensemble_array(np.asarray(y, dtype=float), np.asarray(members, dtype=float).reshape(-1)))


def crps_cells(y, ensemble: Tensor) -> Tensor:
    """
    Поклеточный CRPS на тензорах.

    Args:
        y: Наблюдения [..., H, W]
        ensemble: Участники [M, ..., H, W]

    Returns:
        Tensor: CRPS [..., H, W]
    """
    y, ensemble = as_tensor(y), as_tensor(ensemble)
    n = ensemble.shape[0]
    if n == 0:
        raise ShapeMismatchError("CRPS of an empty ensemble is undefined")
    if ensemble.shape[1:] != y.shape:
        raise GridMismatchError(f"ensemble shape {ensemble.shape[1:]} != observation shape {y.shape}")
    skill = F.mean(F.abs(F.sub(ensemble, y)), axis=0)
    rest = ensemble.shape[1:]
    pairwise = F.abs(F.sub(F.reshape(ensemble, (n, 1, *rest)), F.reshape(ensemble, (1, n, *rest))))
    spread = F.mul(F.sum(pairwise, axis=(0, 1)), 1.0 / (2.0 * n ** 2))
    return F.sub(skill, spread)


def _masked_mean(values: Tensor, mask: np.ndarray) -> Tensor:
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise GridMismatchError("no valid cells to average over")
    batch = int(np.prod(values.shape[:-2])) if values.ndim > 2 else 1
    return F.mul(F.sum(F.mul(values, mask.astype(float))), 1.0 / (n_valid * batch))


def crps_field(y, ensemble, mask: np.ndarray) -> Tensor:
    """
    Поклеточный CRPS, усредненный без весов по допустимым ячейкам (и по пакету).

    Args:
        y: Наблюдения [..., H, W]
        ensemble: Участники [M, ..., H, W]
        mask: Допустимые ячейки [H, W]

    Returns:
        Tensor: Скаляр
    """
    y = as_tensor(y)
    if mask.shape != y.shape[-2:]:
        raise GridMismatchError(f"mask shape {mask.shape} != field shape {y.shape[-2:]}")
    return _masked_mean(crps_cells(y, ensemble), mask)


def _pad_to_even(x: Tensor, mask: np.ndarray) -> tuple[Tensor, np.ndarray]:
    height, width = mask.shape
    rows = np.r_[np.arange(height), [height - 1] * (height % 2)]
    cols = np.r_[np.arange(width), [width - 1] * (width % 2)]
    if len(rows) == height and len(cols) == width:
        return x, mask
    return F.getitem(x, (Ellipsis, rows[:, None], cols[None, :])), mask[np.ix_(rows, cols)]


def crps_pooled(y, ensemble, mask: np.ndarray) -> Tensor:
    """
    CRPS полей, усредненных окнами 2×2 по допустимым ячейкам.

    Нечетные размеры дополняются повторением последней строки или столбца.
    """
    y, ensemble = as_tensor(y), as_tensor(ensemble)
    if mask.shape != y.shape[-2:]:
        raise GridMismatchError(f"mask shape {mask.shape} != field shape {y.shape[-2:]}")
    y, padded_mask = _pad_to_even(y, mask)
    ensemble, _ = _pad_to_even(ensemble, mask)
    pooled_y, pooled_mask = F.avg_pool2x2_masked(y, padded_mask)
    pooled_ensemble, _ = F.avg_pool2x2_masked(ensemble, padded_mask)
    return crps_field(pooled_y, pooled_ensemble, pooled_mask)
