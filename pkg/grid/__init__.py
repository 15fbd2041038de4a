"""
Модуль пространственно-временной модели данных, общей для всех остальных модулей.
"""
from grid.enums import RoleTag, SplitName
from grid.models import AdjustedEnsemble, Field, GridSpec, HindcastSet, InitTime, ObsSet, Provenance, SampleSet, SplitSpec
from grid.operations import (
    area_weighted_mean,
    ensemble_mean,
    ensemble_mean_array,
    marginal_mask,
    marginal_mask_array,
    polar_radius,
    temporal_split,
    valid_month_index,
    weighted_mean,
)
