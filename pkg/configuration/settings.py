"""
Модуль для конфигурации env файла.
"""
import logging
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


__env_file__: str = ".env" # Название env файла


class Settings(BaseSettings):
    """
    Класс для конфигурации env файла.
    """
    SEAICE_DATA_ROOT: Path = Path("data")
    SEAICE_LOG_LEVEL: str = "INFO"
    SEAICE_WORKERS: int = 1
    SEAICE_STRICT_FINITE: bool = False

    @property
    def LOG_LEVEL_int(self) -> int:
        """
        Числовой уровень логирования для модуля logging.
        """
        level = logging.getLevelName(self.SEAICE_LOG_LEVEL.upper())
        return level if isinstance(level, int) else logging.INFO

    model_config = SettingsConfigDict(env_file=__env_file__, extra="ignore") # Конфигурация env файла


settings = Settings() # Экземпляр класса Settings


if __name__ == "__main__":
    """
    Основная функция для тестирования конфигурации.
    """
    print(settings.SEAICE_DATA_ROOT)
    print(settings.LOG_LEVEL_int)
