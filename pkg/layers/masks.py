"""
Модуль масок допустимых ячеек на всех разрешениях сети.
"""
import numpy as np

from utils.exceptions import ShapeMismatchError


def or_pool2x2(mask: np.ndarray) -> np.ndarray:
    """
    Окно 2×2 допустимо, если в нем есть хотя бы одна допустимая ячейка.
    """
    height, width = mask.shape
    if height % 2 or width % 2:
        raise ShapeMismatchError(f"cannot pool a mask of shape {mask.shape}")
    return mask.reshape(height // 2, 2, width // 2, 2).any(axis=(1, 3))


class MaskState:
    """
    Пирамида масок: уровень 0 - маска океана набора данных, каждый следующий - OR-пулинг предыдущего.
    """

    def __init__(self, levels: tuple[np.ndarray, ...]):
        self.levels = tuple(np.asarray(level, dtype=bool) for level in levels)
        for level in self.levels:
            level.setflags(write=False)

    @classmethod
    def from_ocean(cls, ocean_mask: np.ndarray, depth: int = 4) -> "MaskState":
        """
        Строит пирамиду глубины depth (depth + 1 уровней) из маски океана.
        """
        levels = [np.asarray(ocean_mask, dtype=bool)]
        for _ in range(depth):
            levels.append(or_pool2x2(levels[-1]))
        return cls(tuple(levels))

    def at(self, level: int) -> np.ndarray:
        if not 0 <= level < len(self.levels):
            raise ShapeMismatchError(f"no stored mask at resolution level {level}")
        return self.levels[level]

    @property
    def full(self) -> np.ndarray:
        return self.levels[0]

    @property
    def coarsest(self) -> np.ndarray:
        return self.levels[-1]
