import numpy as np
import pytest

from grid.operations import polar_radius
from metrics import rmse_and_spread, sia
from synthetic import bias_amplitude, edge_radius, generate_dataset, generate_land_mask, skill


def test_dataset_shapes_and_index_space(synth_cfg, dataset):
    hindcast, obs = dataset
    assert hindcast.values.shape == (12, 4, 2, 16, 16)
    assert obs.values.shape == (12, 2, 16, 16)
    assert hindcast.init_times[:3] == ((2000, 1), (2000, 7), (2001, 1))
    assert hindcast.leads == (1, 2)
    obs.require_aligned(hindcast)


def test_values_are_concentrations_stored_at_single_precision(dataset):
    hindcast, obs = dataset
    ocean = hindcast.grid.ocean_mask
    for values in (hindcast.values[..., ocean], obs.values[..., ocean]):
        assert values.min() >= 0.0 and values.max() <= 1.0
        np.testing.assert_array_equal(values, values.astype(np.float32).astype(float))
    assert np.isnan(obs.values[..., hindcast.grid.land_mask]).all()


def test_generation_is_reproducible(synth_cfg, dataset):
    hindcast, obs = generate_dataset(synth_cfg)
    np.testing.assert_array_equal(hindcast.values, dataset[0].values)
    np.testing.assert_array_equal(obs.values, dataset[1].values)
    other, _ = generate_dataset(synth_cfg.model_copy(update={"seed": 4}))
    assert not np.array_equal(other.values, hindcast.values, equal_nan=True)


def test_land_mask_has_corners_and_islands(synth_cfg):
    corners_only = generate_land_mask(synth_cfg.model_copy(update={"n_islands": 0}))
    np.testing.assert_array_equal(corners_only, polar_radius((16, 16)) > synth_cfg.corner_radius)
    assert corners_only[0, 0] and corners_only[-1, -1]
    assert not corners_only[8, 8]
    with_islands = generate_land_mask(synth_cfg.model_copy(update={"n_islands": 3, "island_radius": 2.0}))
    assert with_islands.sum() > corners_only.sum()
    assert (with_islands | ~corners_only).all()


def test_skill_and_bias_terms(synth_cfg):
    assert skill(synth_cfg, 1) == pytest.approx(np.exp(-synth_cfg.skill_decay))
    assert skill(synth_cfg, 1) > skill(synth_cfg, 2) > 0
    expected = synth_cfg.bias_amplitude * np.cos(2 * np.pi * 8 / 12) + synth_cfg.drift_per_lead * 2
    assert bias_amplitude(synth_cfg, 7, 2) == pytest.approx(expected)


def test_ice_edge_seasonality(synth_cfg):
    assert edge_radius(synth_cfg, 3, 2000) == pytest.approx(synth_cfg.edge_radius + synth_cfg.seasonal_amplitude)
    assert edge_radius(synth_cfg, 9, 2000) == pytest.approx(synth_cfg.edge_radius - synth_cfg.seasonal_amplitude)
    later = edge_radius(synth_cfg, 3, 2010)
    assert later == pytest.approx(edge_radius(synth_cfg, 3, 2000) + 10 * synth_cfg.trend_per_year)
    assert edge_radius(synth_cfg, 3, 2010, with_trend=False) == edge_radius(synth_cfg, 3, 2000)


def test_winter_has_more_ice_than_summer(dataset):
    _, obs = dataset
    area = sia(np.where(obs.grid.ocean_mask, obs.values[:, 0], 0.0), obs.grid)
    months = np.array([month for _, month in obs.init_times])
    assert area[months == 1].mean() > area[months == 7].mean()


def test_raw_hindcast_is_underdispersive(dataset):
    rmse, spread = rmse_and_spread(*dataset)
    for error, dispersion in zip(rmse.values, spread.values):
        assert dispersion < error
