import numpy as np
import pytest

from benchmark import badj_adjust, fit_climatology
from grid.enums import RoleTag
from grid.models import GridSpec
from grid.operations import ensemble_mean_array
from utils.exceptions import ClimatologyError, GridMismatchError

from tests.conftest import make_sets


def _biased_sets(grid, bias=0.1, n_times=6, months=(1, 7), members=3, leads=2, seed=0):
    rng = np.random.default_rng(seed)
    obs = rng.uniform(0.2, 0.8, size=(n_times, leads, *grid.shape))
    spread = rng.normal(scale=0.02, size=(n_times, members, leads, *grid.shape))
    spread -= spread.mean(axis=1, keepdims=True)
    values = obs[:, None] + bias + spread
    return make_sets(values, obs, grid, months=months)


def test_constant_bias_is_removed(grid16):
    hindcast, obs = _biased_sets(grid16, bias=0.1)
    adjusted = badj_adjust(hindcast, fit_climatology(hindcast, obs), clamp=False)
    ocean = grid16.ocean_mask
    np.testing.assert_allclose(ensemble_mean_array(adjusted)[..., ocean], obs.values[..., ocean], atol=1e-12)
    assert adjusted.role == RoleTag.badj
    assert not adjusted.provenance.clamped
    assert np.isnan(adjusted.values[..., grid16.land_mask]).all()


def test_training_climatology_of_adjusted_mean_matches_observations(grid16):
    rng = np.random.default_rng(1)
    hindcast, obs = make_sets(rng.uniform(size=(6, 4, 2, 16, 16)), rng.uniform(size=(6, 2, 16, 16)), grid16, months=(1, 7))
    pairs = [(t, l) for t in range(4) for l in range(2)]
    clim = fit_climatology(hindcast, obs, pairs)
    adjusted_mean = ensemble_mean_array(badj_adjust(hindcast, clim, clamp=False))
    ocean = grid16.ocean_mask
    for s, (month, lead) in enumerate(clim.strata):
        times = [t for t in range(4) if hindcast.init_times[t][1] == month]
        l = hindcast.leads.index(lead)
        np.testing.assert_allclose(adjusted_mean[times, l].mean(axis=0)[ocean], clim.obs_mean[s][ocean], atol=1e-12)
    assert clim.counts == (2, 2, 2, 2)
    assert clim.train_span == ((2000, 1), (2001, 7))


def test_member_deviations_are_preserved_without_clamp(grid16):
    hindcast, obs = _biased_sets(grid16, bias=-0.05)
    adjusted = badj_adjust(hindcast, fit_climatology(hindcast, obs), clamp=False)
    ocean = grid16.ocean_mask

    def deviations(values):
        return (values - values.mean(axis=1, keepdims=True))[..., ocean]

    np.testing.assert_allclose(deviations(adjusted.values), deviations(hindcast.values), atol=1e-12)


def test_clamping_keeps_values_in_unit_interval(grid16):
    rng = np.random.default_rng(2)
    obs = np.clip(rng.uniform(-0.2, 1.2, size=(4, 1, 16, 16)), 0.0, 1.0)
    hindcast, obs_set = make_sets(np.full((4, 2, 1, 16, 16), 0.5), obs, grid16)
    clim = fit_climatology(hindcast, obs_set, [(0, 0), (1, 0)])
    ocean = grid16.ocean_mask
    clamped = badj_adjust(hindcast, clim).values[..., ocean]
    assert clamped.min() >= 0.0 and clamped.max() <= 1.0
    assert badj_adjust(hindcast, clim).provenance.clamped

    shifted = make_sets(np.full((4, 2, 1, 16, 16), 0.95), obs, grid16)[0]
    free = badj_adjust(shifted, fit_climatology(hindcast, obs_set, [(0, 0)]), clamp=False).values[..., ocean]
    assert free.max() > 1.0 or free.min() < 0.0


def test_fit_from_sample_set(samples):
    train, _, _ = samples
    clim = fit_climatology(train)
    assert clim.strata == ((1, 1), (1, 2), (7, 1), (7, 2))
    assert clim.counts == (3, 3, 3, 3)
    assert clim.train_span == ((2000, 1), (2002, 7))


def test_empty_stratum_is_an_error(grid16):
    hindcast, obs = _biased_sets(grid16)
    with pytest.raises(ClimatologyError):
        fit_climatology(hindcast, obs, [(0, 0), (0, 1)])
    with pytest.raises(ClimatologyError):
        fit_climatology(hindcast)


def test_unknown_stratum_at_application(grid16):
    hindcast, obs = _biased_sets(grid16, months=(1,), n_times=3)
    clim = fit_climatology(hindcast, obs)
    other, _ = _biased_sets(grid16, months=(7,), n_times=2)
    with pytest.raises(ClimatologyError):
        badj_adjust(other, clim)


def test_grid_mismatch(grid16):
    hindcast, obs = _biased_sets(grid16)
    clim = fit_climatology(hindcast, obs)
    foreign, _ = _biased_sets(GridSpec.uniform(16, 16))
    with pytest.raises(GridMismatchError):
        badj_adjust(foreign, clim)
