"""
Модуль абстрактного файлового хранилища.

Наследники реализуют raw_write и raw_read; публичные write и read проверяют
наличие входа, пропускают доменные исключения без изменений и сохраняют
отчет о любых других сбоях ввода-вывода.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Generic, TypeVar

from utils.exception_handler.handler import handle_sync
from utils.exceptions import MissingInputError, SeaIceError
from utils.loggers import logger


T = TypeVar("T")


class AbstractFileRepository(ABC, Generic[T]):
    """Абстрактный класс для хранения объектов в каталогах."""

    manifest_name = "manifest.json"

    @classmethod
    @abstractmethod
    def raw_write(cls, obj: T, path: Path, **kwargs: Any) -> Path:
        """
        Записывает объект в каталог.

        Args:
            obj: Объект для записи
            path: Каталог назначения
        """
        raise NotImplementedError

    @classmethod
    @abstractmethod
    def raw_read(cls, path: Path, **kwargs: Any) -> T:
        """
        Читает объект из каталога.

        Args:
            path: Каталог с манифестом
        """
        raise NotImplementedError

    @classmethod
    def write(cls, obj: T, path: Path | str, **kwargs: Any) -> Path:
        """
        Записывает объект, создавая каталог при необходимости.

        Returns:
            Path: Каталог с записанным объектом
        """
        path = Path(path)
        try:
            path.mkdir(parents=True, exist_ok=True)
            written = cls.raw_write(obj, path, **kwargs)
        except SeaIceError:
            raise
        except Exception as ex_:
            handle_sync(function_category="storage", function=f"{cls.__name__} write", exception=ex_, context={"path": str(path)})
            raise
        logger.debug(f"{cls.__name__}: wrote {path}")
        return written

    @classmethod
    def read(cls, path: Path | str, **kwargs: Any) -> T:
        """
        Читает объект из каталога.

        Returns:
            T: Прочитанный объект
        """
        path = Path(path)
        if not Path(path, cls.manifest_name).is_file():
            raise MissingInputError(f"{cls.__name__}: no {cls.manifest_name} in {path}")
        try:
            return cls.raw_read(path, **kwargs)
        except SeaIceError:
            raise
        except Exception as ex_:
            handle_sync(function_category="storage", function=f"{cls.__name__} read", exception=ex_, context={"path": str(path)})
            raise
