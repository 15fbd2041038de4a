"""
Модуль для конфигурации перечислений модели данных.
"""
import enum


class RoleTag(enum.Enum):
    obs = "obs"
    hindcast = "hindcast"
    adjusted = "adjusted"
    badj = "badj"


class SplitName(enum.Enum):
    train = "train"
    val = "val"
    test = "test"
