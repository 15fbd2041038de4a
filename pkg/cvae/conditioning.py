"""
Модуль сборки условий модели.

Условие пары (t, l) состоит из среднего по ансамблю x̄, наблюдения y (путь
кодировщика) или детерминированной оценки ỹ (путь априорной сети) и трех
временных каналов: sin(2π(m+l)/12), cos(2π(m+l)/12) и l/12, где m -
календарный месяц инициализации. Суша во входных полях заполняется нулем.
"""
import numpy as np

from autodiff import Tensor, functional as F
from grid.models import HindcastSet, ObsSet
from grid.operations import ensemble_mean_array


def time_features(init_months: np.ndarray, leads: np.ndarray) -> np.ndarray:
    """
    Временные признаки [B, 3]: sin и cos фазы (m + l)/12 и l/12.
    """
    init_months = np.asarray(init_months, dtype=float)
    leads = np.asarray(leads, dtype=float)
    phase = 2.0 * np.pi * (init_months + leads) / 12.0
    return np.stack([np.sin(phase), np.cos(phase), leads / 12.0], axis=-1)


class ConditionBatch:
    """
    Пакет условий: поля x̄ (и, при обучении, y) для набора пар (t, l).

    Массивы полей имеют форму [B, H, W]; суша заполнена нулем.
    """

    def __init__(self, x_mean: np.ndarray, init_months: np.ndarray, leads: np.ndarray, y: np.ndarray | None = None, pairs: list[tuple[int, int]] | None = None):
        self.x_mean = np.asarray(x_mean, dtype=float)
        self.init_months = np.asarray(init_months, dtype=int)
        self.leads = np.asarray(leads, dtype=int)
        self.y = None if y is None else np.asarray(y, dtype=float)
        self.pairs = pairs

    def __len__(self) -> int:
        return self.x_mean.shape[0]

    @classmethod
    def from_pairs(
        cls,
        hindcast: HindcastSet,
        pairs: list[tuple[int, int]],
        obs: ObsSet | None = None,
        x_mean: np.ndarray | None = None,
    ) -> "ConditionBatch":
        """
        Собирает пакет из пар (t, l) набора прогнозов.

        Args:
            hindcast: Набор ретроспективных прогнозов
            pairs: Пары (индекс даты инициализации, индекс заблаговременности)
            obs: Наблюдения для пути кодировщика (необязательно)
            x_mean: Предвычисленный массив средних [T, L, H, W]

        Returns:
            ConditionBatch: Пакет условий
        """
        if x_mean is None:
            x_mean = ensemble_mean_array(hindcast)
        ocean = hindcast.grid.ocean_mask
        t_index = np.array([t for t, _ in pairs], dtype=int)
        l_index = np.array([l for _, l in pairs], dtype=int)
        y = None
        if obs is not None:
            y = np.where(ocean, obs.values[t_index, l_index], 0.0)
        return cls(
            x_mean=np.where(ocean, x_mean[t_index, l_index], 0.0),
            init_months=np.array([hindcast.init_times[t][1] for t in t_index], dtype=int),
            leads=np.array([hindcast.leads[l] for l in l_index], dtype=int),
            y=y,
            pairs=list(pairs),
        )

    def time_channels(self) -> np.ndarray:
        """
        Три временных канала [B, 3, H, W], постоянные по сетке.
        """
        features = time_features(self.init_months, self.leads)
        height, width = self.x_mean.shape[-2:]
        return np.broadcast_to(features[:, :, None, None], (len(self), 3, height, width)).copy()


def conditioning_channels(first: Tensor | np.ndarray | None, batch: ConditionBatch) -> Tensor:
    """
    Каналы входа сети: [first], x̄, sin, cos, l/12.

    Для кодировщика first = y, для априорной сети first = ỹ (тензор, градиент
    идет в детерминированную сеть), для детерминированной сети first = None.

    Args:
        first: Первое поле [B, H, W] или None
        batch: Пакет условий

    Returns:
        Tensor: Вход [B, 5, H, W] (или [B, 4, H, W] без first)
    """
    channels = []
    if first is not None:
        first = first if isinstance(first, Tensor) else Tensor(first)
        channels.append(F.reshape(first, (len(batch), 1, *batch.x_mean.shape[-2:])))
    channels.append(Tensor(batch.x_mean[:, None]))
    channels.append(Tensor(batch.time_channels()))
    return F.concat(channels, axis=-3)
