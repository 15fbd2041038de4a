"""
Модуль для конфигурации путей.
"""
from pathlib import Path

from configuration.settings import settings


PATH_TO_ASSETS = Path("assets")
PATH_TO_ASSETS.mkdir(parents=True, exist_ok=True)

PATH_TO_EXCEPTIONS = Path(PATH_TO_ASSETS, "exceptions")
PATH_TO_EXCEPTIONS.mkdir(parents=True, exist_ok=True)

# Корень данных по умолчанию; каталоги запусков создаются командами по требованию
PATH_TO_DATA_ROOT = Path(settings.SEAICE_DATA_ROOT)


def resolve_data_path(path: Path | str | None, default_name: str) -> Path:
    """
    Возвращает путь к артефакту: явный путь или имя внутри корня данных.

    Args:
        path: Явно заданный путь (может быть None)
        default_name: Имя артефакта внутри корня данных

    Returns:
        Path: Итоговый путь
    """
    if path is not None:
        return Path(path)
    return Path(PATH_TO_DATA_ROOT, default_name)
