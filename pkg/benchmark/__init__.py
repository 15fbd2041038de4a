"""
Модуль эталонной коррекции Badj: сдвиг ансамбля на разность климатологий модели и наблюдений.
"""
from benchmark.badj import LeadClimatology, badj_adjust, fit_climatology
