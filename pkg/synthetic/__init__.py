"""
Модуль генерации синтетических наборов данных.
"""
from synthetic.generator import (
    bias_amplitude,
    bias_pattern,
    edge_radius,
    generate_dataset,
    generate_hindcast,
    generate_land_mask,
    generate_truth,
    model_climatology,
    skill,
    synthetic_grid,
)
