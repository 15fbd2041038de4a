"""
Декоратор для автоматической обработки исключений.

Предоставляет декоратор @handle, который сохраняет отчет о любом
неперехваченном исключении команды и пробрасывает его дальше.
"""

from functools import wraps
from typing import Any, Callable

from utils.exception_handler.handler import handle_sync


def handle(function_category: str = None):
    """
    Декоратор для автоматической обработки исключений в функциях.

    Args:
        function_category: Категория функции для группировки ошибок

    Returns:
        Callable: Декорированная функция с обработкой исключений

    Example:
        @handle("cli")
        def train_command(...):
            ...
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def sync_wrapper(*args, **kwargs) -> Any:
            try:
                return func(*args, **kwargs)
            except Exception as ex_:
                handle_sync(
                    function_category=function_category or func.__module__,
                    function=func.__name__,
                    exception=ex_,
                    context={key: str(value) for key, value in kwargs.items()},
                )
                raise

        return sync_wrapper
    return decorator
