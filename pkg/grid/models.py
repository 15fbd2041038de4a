"""
Модуль пространственно-временной модели данных.

Содержит сетку с маской суши и площадями ячеек, двумерные поля и
индексированные наборы ретроспективных прогнозов и наблюдений. Все объекты
неизменяемы после создания: массивы помечаются только для чтения, а ячейки
суши всегда хранят значение-заглушку.
"""
from datetime import datetime

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, model_validator

from configuration.base import DTYPE, LAND_SENTINEL
from grid.enums import RoleTag, SplitName
from utils.exceptions import EmptyDomainError, GridMismatchError, IndexOutOfRangeError, NonFiniteError, ShapeMismatchError, SplitError


InitTime = tuple[int, int] # (год j, календарный месяц m = 1..12)


def _frozen(array: np.ndarray, dtype=DTYPE) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _with_land_sentinel(values: np.ndarray, land_mask: np.ndarray) -> np.ndarray:
    """
    Проставляет заглушку в ячейки суши и проверяет конечность значений океана.
    """
    values = np.array(values, dtype=DTYPE, copy=True)
    values[..., land_mask] = LAND_SENTINEL
    if not np.isfinite(values[..., ~land_mask]).all():
        raise NonFiniteError("values must be finite at every ocean cell")
    values.setflags(write=False)
    return values


class GridSpec(BaseModel):
    """
    Пространственная сетка: размеры, площади ячеек и маска суши.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    height: int = pydantic.Field(..., gt=0, description="Number of rows")
    width: int = pydantic.Field(..., gt=0, description="Number of columns")
    cell_area: np.ndarray = pydantic.Field(..., description="Per-cell area, km² or unit area")
    land_mask: np.ndarray = pydantic.Field(..., description="True where the cell is land")

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if isinstance(data, dict) and "land_mask" in data and "cell_area" in data:
            data = dict(data)
            data["land_mask"] = np.array(data["land_mask"], dtype=bool, copy=True)
            data["cell_area"] = np.broadcast_to(np.asarray(data["cell_area"], dtype=DTYPE), data["land_mask"].shape)
        return data

    @model_validator(mode="after")
    def _check(self):
        shape = (self.height, self.width)
        if self.land_mask.shape != shape or self.cell_area.shape != shape:
            raise ShapeMismatchError(f"grid arrays must have shape {shape}")
        if not (self.cell_area[~self.land_mask] > 0).all():
            raise ShapeMismatchError("cell_area must be positive at every ocean cell")
        object.__setattr__(self, "land_mask", _frozen(self.land_mask, dtype=bool))
        object.__setattr__(self, "cell_area", _frozen(self.cell_area))
        return self

    @classmethod
    def uniform(cls, height: int, width: int, cell_area: float = 625.0, land_mask: np.ndarray | None = None) -> "GridSpec":
        """
        Сетка с одинаковой площадью ячеек (по умолчанию 25 км × 25 км).
        """
        if land_mask is None:
            land_mask = np.zeros((height, width), dtype=bool)
        return cls(height=height, width=width, cell_area=np.full((height, width), cell_area), land_mask=land_mask)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def ocean_mask(self) -> np.ndarray:
        return ~self.land_mask

    @property
    def n_ocean(self) -> int:
        return int(self.ocean_mask.sum())

    @property
    def ocean_area(self) -> float:
        return float(self.cell_area[self.ocean_mask].sum())

    def same_as(self, other: "GridSpec") -> bool:
        """
        Совпадают ли две сетки (размеры, маска, площади).
        """
        return (
            self.shape == other.shape
            and np.array_equal(self.land_mask, other.land_mask)
            and np.array_equal(self.cell_area, other.cell_area)
        )

    def require_same(self, other: "GridSpec") -> None:
        if not self.same_as(other):
            raise GridMismatchError(f"grid mismatch: {self.shape} vs {other.shape} or differing land mask/areas")

    def require_ocean(self) -> None:
        if self.n_ocean == 0:
            raise EmptyDomainError("grid has no ocean cells")


class Field(BaseModel):
    """
    Двумерное поле на сетке (например, концентрация льда в долях единицы).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    values: np.ndarray

    @model_validator(mode="after")
    def _check(self):
        if np.shape(self.values) != self.grid.shape:
            raise ShapeMismatchError(f"field shape {np.shape(self.values)} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", _with_land_sentinel(self.values, self.grid.land_mask))
        return self

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """
        Значения поля с заполнением суши заданным числом.
        """
        return np.where(self.grid.land_mask, fill, self.values)


class HindcastSet(BaseModel):
    """
    Ансамбль ретроспективных прогнозов x_{kjml}, индексированный (t, k, l).

    Массив values имеет форму [T, K, L, H, W].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    init_times: tuple[InitTime, ...] = pydantic.Field(..., description="Ordered (year, month) initialisation times")
    leads: tuple[int, ...] = pydantic.Field(..., description="Lead months, 1-based")
    values: np.ndarray
    role: RoleTag = RoleTag.hindcast

    @model_validator(mode="after")
    def _check(self):
        expected = (len(self.init_times), None, len(self.leads), *self.grid.shape)
        shape = np.shape(self.values)
        if len(shape) != 5 or shape[0] != expected[0] or shape[2] != expected[2] or shape[3:] != expected[3:]:
            raise ShapeMismatchError(f"hindcast values shape {shape} does not match (T={expected[0]}, K, L={expected[2]}, {self.grid.shape})")
        if shape[1] < 1:
            raise ShapeMismatchError("member axis must not be empty")
        if list(self.init_times) != sorted(self.init_times):
            raise ShapeMismatchError("init_times must be ordered")
        object.__setattr__(self, "values", _with_land_sentinel(self.values, self.grid.land_mask))
        return self

    @property
    def n_members(self) -> int:
        return int(self.values.shape[1])

    def check_index(self, t: int, l: int) -> None:
        if not (0 <= t < len(self.init_times)) or not (0 <= l < len(self.leads)):
            raise IndexOutOfRangeError(f"(t={t}, l={l}) outside index space ({len(self.init_times)}, {len(self.leads)})")

    def field(self, t: int, k: int, l: int) -> Field:
        self.check_index(t, l)
        if not 0 <= k < self.n_members:
            raise IndexOutOfRangeError(f"member {k} outside 0..{self.n_members - 1}")
        return Field(grid=self.grid, values=self.values[t, k, l])

    def select(self, init_indices: list[int] | np.ndarray) -> "HindcastSet":
        """
        Поднабор по индексам дат инициализации (прямоугольность сохраняется).
        """
        init_indices = list(init_indices)
        return self.model_copy(update=dict(
            init_times=tuple(self.init_times[i] for i in init_indices),
            values=_frozen(self.values[init_indices]),
        ))

    def with_members(self, n_members: int) -> "HindcastSet":
        """
        Первые n_members участников (для честного сравнения ансамблей равного размера).
        """
        if not 1 <= n_members <= self.n_members:
            raise IndexOutOfRangeError(f"cannot take {n_members} of {self.n_members} members")
        return self.model_copy(update=dict(values=_frozen(self.values[:, :n_members])))


class Provenance(BaseModel):
    """
    Происхождение скорректированного ансамбля.
    """
    role: RoleTag
    scale: float | None = pydantic.Field(None, description="Prior std scaling factor s")
    root_seed: int | None = pydantic.Field(None, description="Root RNG seed")
    checkpoint_id: str | None = pydantic.Field(None, description="Checkpoint identifier (architecture hash + params digest)")
    clamped: bool = pydantic.Field(True, description="Whether outputs were clamped to [0, 1]")
    notes: str = ""
    created_at: str = pydantic.Field(default_factory=lambda: datetime.now().isoformat())


class AdjustedEnsemble(HindcastSet):
    """
    Скорректированный ансамбль (Nadj или Badj) с описанием происхождения.
    """
    role: RoleTag = RoleTag.adjusted
    provenance: Provenance


class ObsSet(BaseModel):
    """
    Наблюдения y_{tl}, переупорядоченные в структуру прогнозов. Форма values: [T, L, H, W].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    init_times: tuple[InitTime, ...]
    leads: tuple[int, ...]
    values: np.ndarray
    role: RoleTag = RoleTag.obs

    @model_validator(mode="after")
    def _check(self):
        expected = (len(self.init_times), len(self.leads), *self.grid.shape)
        if np.shape(self.values) != expected:
            raise ShapeMismatchError(f"obs values shape {np.shape(self.values)} != {expected}")
        object.__setattr__(self, "values", _with_land_sentinel(self.values, self.grid.land_mask))
        return self

    def field(self, t: int, l: int) -> Field:
        if not (0 <= t < len(self.init_times)) or not (0 <= l < len(self.leads)):
            raise IndexOutOfRangeError(f"(t={t}, l={l}) outside index space")
        return Field(grid=self.grid, values=self.values[t, l])

    def select(self, init_indices: list[int] | np.ndarray) -> "ObsSet":
        init_indices = list(init_indices)
        return self.model_copy(update=dict(
            init_times=tuple(self.init_times[i] for i in init_indices),
            values=_frozen(self.values[init_indices]),
        ))

    def require_aligned(self, hindcast: HindcastSet) -> None:
        """
        Проверяет, что индексное пространство совпадает с набором прогнозов.
        """
        hindcast.grid.require_same(self.grid)
        if tuple(hindcast.init_times) != tuple(self.init_times) or tuple(hindcast.leads) != tuple(self.leads):
            raise GridMismatchError("obs and hindcast index spaces differ")


YearRange = tuple[int, int] # Включительный диапазон лет инициализации


class SplitSpec(BaseModel):
    """
    Разбиение по годам инициализации: обучение < валидация < тест.
    """
    model_config = ConfigDict(extra="forbid")

    train_range: YearRange = (1980, 2015)
    val_range: YearRange = (2016, 2018)
    test_range: YearRange = (2019, 2023)

    @model_validator(mode="after")
    def _check(self):
        ranges = [self.train_range, self.val_range, self.test_range]
        for start, end in ranges:
            if start > end:
                raise SplitError(f"empty split range ({start}, {end})")
        for (_, prev_end), (next_start, _) in zip(ranges, ranges[1:]):
            if next_start <= prev_end:
                raise SplitError(f"split ranges overlap or are out of order: {ranges}")
        return self

    def ranges(self) -> dict[SplitName, YearRange]:
        return {SplitName.train: self.train_range, SplitName.val: self.val_range, SplitName.test: self.test_range}


class SampleSet(BaseModel):
    """
    Согласованная выборка пар (t, l) поверх полных наборов прогнозов и наблюдений.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: SplitName
    hindcast: HindcastSet
    obs: ObsSet
    pairs: tuple[tuple[int, int], ...] = pydantic.Field(..., description="Retained (t index, l index) pairs")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def init_indices(self) -> list[int]:
        return sorted({t for t, _ in self.pairs})


__all__ = [
    "InitTime",
    "GridSpec",
    "Field",
    "HindcastSet",
    "Provenance",
    "AdjustedEnsemble",
    "ObsSet",
    "SplitSpec",
    "SampleSet",
]
