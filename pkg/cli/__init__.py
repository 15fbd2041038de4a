"""
Модуль для конфигурации интерфейса командной строки.
"""
from cli.app import app, error_line
from cli import commands # noqa: F401  регистрирует команды группы
