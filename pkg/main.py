"""
Основной файл для запуска приложения.
"""
from colorama import init
import logging

from cli import app


init()
logging.basicConfig(level=logging.WARNING, format='%(asctime)s | %(levelname)s:%(name)s - %(message)s', datefmt='%d-%m-%Y %H:%M:%S')


if __name__ == "__main__":
    app(prog_name="seaice")
