import numpy as np
import pytest

from configuration.run_config import EvaluationConfig
from grid.models import GridSpec
from metrics import (
    REPORT_METRICS,
    acc_and_pattern_corr,
    build_report,
    crps_metric,
    domain_mask,
    evaluate_suite,
    iiee,
    integrated_errors,
    qq_quantiles,
    rank_histogram_cdf,
    rapsd,
    rapsd_ratio,
    rmse_and_spread,
    sia,
    sie,
    soe,
    soe_integrated,
    spread_map,
)
from objectives import crps_ensemble
from utils.exceptions import MetricError

from tests.conftest import make_sets


GRID = GridSpec.uniform(2, 2)


def _iid_sets(n_times: int, members: int, grid: GridSpec = GRID, seed: int = 0, leads: int = 1):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n_times, members, leads, *grid.shape))
    obs = rng.standard_normal((n_times, leads, *grid.shape))
    return make_sets(values, obs, grid)


def test_rmse_and_spread_of_symmetric_pair():
    obs = np.random.default_rng(0).uniform(0.2, 0.8, size=(3, 1, 2, 2))
    values = np.stack([obs - 0.1, obs + 0.1], axis=1)
    rmse, spread = rmse_and_spread(*make_sets(values, obs, GRID))
    assert rmse.values[0] == pytest.approx(0.0, abs=1e-12)
    assert spread.values[0] == pytest.approx(0.1 * np.sqrt(2))
    assert rmse.members == 2
    with pytest.raises(MetricError):
        rmse_and_spread(*make_sets(values[:, :1], obs, GRID))


def test_crps_metric_matches_per_cell_loop():
    rng = np.random.default_rng(1)
    values = rng.uniform(size=(4, 3, 1, 2, 2))
    obs = rng.uniform(size=(4, 1, 2, 2))
    series = crps_metric(*make_sets(values, obs, GRID))
    expected = np.mean([
        np.mean([crps_ensemble(obs[t, 0, i, j], values[t, :, 0, i, j]) for t in range(4)])
        for i in range(2) for j in range(2)
    ])
    assert series.values[0] == pytest.approx(expected, rel=1e-12)
    assert series.name == "crps"


def test_soe_when_variance_equals_error():
    values = np.zeros((1, 2, 1, 2, 2))
    values[:, 0] = 1 + 1 / np.sqrt(2)
    values[:, 1] = 1 - 1 / np.sqrt(2)
    series = soe(*make_sets(values, np.zeros((1, 1, 2, 2)), GRID))
    assert series.values[0] == pytest.approx(np.sqrt(3 / 2), rel=1e-12)
    assert series.excluded == [0]


def test_soe_of_exchangeable_ensemble_is_one():
    series = soe(*_iid_sets(2500, 10))
    assert series.values[0] == pytest.approx(1.0, abs=0.05)


def test_soe_excludes_zero_error_cells():
    obs = np.zeros((2, 1, 2, 2))
    values = np.stack([obs - 0.1, obs + 0.1], axis=1)
    values[:, :, :, 0, 0] += 0.3
    series = soe(*make_sets(values, obs, GRID))
    assert series.excluded == [3]
    assert np.isfinite(series.values[0])
    perfect = soe(*make_sets(np.stack([obs - 0.1, obs + 0.1], axis=1), obs, GRID))
    assert np.isnan(perfect.values[0])
    assert perfect.excluded == [4]


def test_rank_histogram_of_exchangeable_ensemble_is_flat():
    (histogram,) = rank_histogram_cdf(*_iid_sets(25000, 10, seed=2), marginal_only=False)
    assert histogram.n_ranks == 100000
    assert len(histogram.counts) == 11
    assert histogram.cdf[-1] == pytest.approx(1.0)
    assert histogram.max_deviation < 0.02


def test_rank_histogram_extremes_and_ties():
    obs = np.full((50, 1, 2, 2), 0.5)
    above = make_sets(np.full((50, 4, 1, 2, 2), 0.3), obs, GRID)
    (histogram,) = rank_histogram_cdf(*above)
    assert histogram.counts[-1] == histogram.n_ranks == 200

    tied = make_sets(np.full((50, 4, 1, 2, 2), 0.5), obs, GRID)
    (histogram,) = rank_histogram_cdf(*tied, seed=3)
    assert (histogram.counts > 0).all()
    (again,) = rank_histogram_cdf(*tied, seed=3)
    np.testing.assert_array_equal(histogram.counts, again.counts)


def test_rank_histogram_tie_breaking_is_uniform_over_seeds():
    obs = np.full((50, 1, 2, 2), 0.5)
    tied = make_sets(np.full((50, 4, 1, 2, 2), 0.5), obs, GRID)
    histograms = [rank_histogram_cdf(*tied, seed=seed)[0] for seed in range(100)]
    pooled = np.sum([histogram.counts for histogram in histograms], axis=0)
    assert pooled.sum() == 100 * 200
    np.testing.assert_allclose(pooled / pooled.sum(), 0.2, atol=0.02)
    assert any(not np.array_equal(histograms[0].counts, other.counts) for other in histograms[1:])

    members = np.broadcast_to(np.array([0.3, 0.5, 0.5, 0.7])[None, :, None, None, None], (50, 4, 1, 2, 2))
    partial = make_sets(members.copy(), obs, GRID)
    pooled = np.sum([rank_histogram_cdf(*partial, seed=seed)[0].counts for seed in range(100)], axis=0)
    assert pooled[0] == pooled[4] == 0
    np.testing.assert_allclose(pooled[1:4] / pooled.sum(), 1 / 3, atol=0.02)


def test_rank_histogram_without_marginal_cells_is_empty():
    (histogram,) = rank_histogram_cdf(*make_sets(np.zeros((3, 2, 1, 2, 2)), np.zeros((3, 1, 2, 2)), GRID))
    assert histogram.empty
    assert np.isnan(histogram.cdf).all()


def test_qq_quantiles_of_identical_distributions():
    (pairs,) = qq_quantiles(*_iid_sets(20000, 5, seed=4), marginal_only=False)
    assert len(pairs.percentiles) == 99
    np.testing.assert_allclose(pairs.forecast, pairs.observed, atol=0.1)
    with pytest.raises(MetricError):
        qq_quantiles(*make_sets(np.zeros((3, 2, 1, 2, 2)), np.zeros((3, 1, 2, 2)), GRID))


def test_qq_quantiles_of_shifted_forecast():
    obs = np.random.default_rng(12).uniform(0.2, 0.8, size=(500, 1, 4, 4))
    (pairs,) = qq_quantiles(*make_sets(obs[:, None] + 0.1, obs, GridSpec.uniform(4, 4)))
    np.testing.assert_allclose(pairs.forecast - pairs.observed, 0.1, atol=1e-12)


def test_sea_ice_area_and_extent(grid16):
    field = np.full((16, 16), 0.5)
    n_ocean = grid16.n_ocean
    assert sia(field, grid16) == pytest.approx(0.5 * 625 * n_ocean)
    assert sie(field, grid16) == pytest.approx(625 * n_ocean)
    assert sie(np.full((16, 16), 0.15), grid16) == 0.0
    assert sia(np.ones((2, 16, 16)), grid16).shape == (2,)


def test_iiee(grid16):
    rng = np.random.default_rng(5)
    a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
    assert iiee(a, a, grid16) == 0.0
    assert iiee(a, b, grid16) == iiee(b, a, grid16)
    observed = np.zeros((16, 16))
    forecast = observed.copy()
    forecast[5, 5] = 0.9
    forecast[0, 0] = 0.9
    assert iiee(forecast, observed, grid16) == pytest.approx(625.0)
    domain = domain_mask(grid16, max_radius=0.2)
    assert domain_mask(grid16) is None
    forecast[8, 9] = 0.9
    assert iiee(forecast, observed, grid16, domain) == pytest.approx(625.0)


def test_extent_and_edge_error_ignore_relabelling_that_keeps_the_threshold(grid16):
    rng = np.random.default_rng(13)
    a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
    a[4, 4] = b[5, 5] = 0.15

    def relabel(values):
        return np.where(values > 0.15, 0.5 + 0.5 * (values - 0.15), 0.1 * values)

    assert sie(relabel(a), grid16) == sie(a, grid16)
    assert iiee(relabel(a), relabel(b), grid16) == iiee(a, b, grid16)
    assert sia(relabel(a), grid16) != pytest.approx(sia(a, grid16))


def _yearly_sets(n_years: int, seed: int = 6, leads: int = 2, members: int = 3):
    rng = np.random.default_rng(seed)
    obs = rng.uniform(size=(n_years * 2, leads, 4, 4))
    noise = rng.normal(scale=0.05, size=(n_years * 2, members, leads, 4, 4))
    noise -= noise.mean(axis=1, keepdims=True)
    values = obs[:, None] + noise
    return make_sets(values, obs, GridSpec.uniform(4, 4), months=(1, 7))


def test_perfect_mean_forecast_has_unit_correlations():
    acc, pattern = acc_and_pattern_corr(*_yearly_sets(5))
    np.testing.assert_allclose(acc.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(pattern.values, 1.0, atol=1e-12)
    assert acc.name == "acc_sia"


def test_opposite_anomalies_have_negative_unit_correlations():
    rng = np.random.default_rng(14)
    obs = rng.uniform(0.2, 0.8, size=(8, 2, 4, 4))
    noise = rng.normal(scale=0.05, size=(8, 3, 2, 4, 4))
    noise -= noise.mean(axis=1, keepdims=True)
    sets = make_sets((1.0 - obs)[:, None] + noise, obs, GridSpec.uniform(4, 4), months=(1, 7))
    acc, pattern = acc_and_pattern_corr(*sets)
    np.testing.assert_allclose(acc.values, -1.0, atol=1e-12)
    np.testing.assert_allclose(pattern.values, -1.0, atol=1e-12)


def test_anomaly_correlation_matches_corrcoef():
    rng = np.random.default_rng(15)
    values = rng.uniform(size=(10, 3, 2, 4, 4))
    obs = rng.uniform(size=(10, 2, 4, 4))
    months = np.array([1, 7] * 5)
    acc, pattern = acc_and_pattern_corr(*make_sets(values, obs, GridSpec.uniform(4, 4), months=(1, 7)))

    def anomalies(series):
        series = series.copy()
        for month in (1, 7):
            series[months == month] -= series[months == month].mean(axis=0)
        return series

    mean = values.mean(axis=1)
    for l in range(2):
        forecast, observed = anomalies(mean[:, l]), anomalies(obs[:, l])
        expected_acc = np.corrcoef(forecast.sum(axis=(-2, -1)), observed.sum(axis=(-2, -1)))[0, 1]
        expected_pattern = np.mean([np.corrcoef(forecast[t].ravel(), observed[t].ravel())[0, 1] for t in range(10)])
        assert acc.values[l] == pytest.approx(expected_acc, rel=1e-10)
        assert pattern.values[l] == pytest.approx(expected_pattern, rel=1e-10)


def test_anomaly_correlation_errors():
    with pytest.raises(MetricError):
        acc_and_pattern_corr(*_yearly_sets(2))
    with pytest.raises(MetricError):
        acc_and_pattern_corr(*_yearly_sets(4), quantity="volume")
    flat = make_sets(np.full((6, 2, 1, 4, 4), 0.5), np.full((6, 1, 4, 4), 0.5), GridSpec.uniform(4, 4))
    with pytest.raises(MetricError):
        acc_and_pattern_corr(*flat)


def test_integrated_errors_of_perfect_mean():
    series = integrated_errors(*_yearly_sets(3), max_radius=0.5)
    assert [item.name for item in series] == ["sia_rmse", "sie_rmse", "iiee"]
    for item in series:
        np.testing.assert_allclose(item.values, 0.0, atol=1e-9)
    assert series[2].mask == "radius<=0.5"


def test_integrated_spread_over_error():
    with pytest.raises(MetricError):
        soe_integrated(*make_sets(np.full((3, 2, 1, 2, 2), 0.5), np.full((3, 1, 2, 2), 0.5), GRID))
    with pytest.raises(MetricError):
        soe_integrated(*_yearly_sets(3), quantity="volume")
    series = soe_integrated(*_iid_sets(400, 6, seed=7), quantity="sia")
    assert series.values[0] > 0


def test_spread_map():
    sets = _yearly_sets(3, leads=2)
    result = spread_map(*sets, target_month=8, lead=2)
    assert result.n_times == 3
    assert result.std.shape == (4, 4)
    assert ((result.edge_frequency >= 0) & (result.edge_frequency <= 1)).all()
    with pytest.raises(MetricError):
        spread_map(*sets, target_month=3, lead=2)
    with pytest.raises(MetricError):
        spread_map(*sets, target_month=8, lead=5)


def test_spread_map_masks_land(grid16):
    values = np.full((2, 3, 1, 16, 16), 0.4)
    result = spread_map(*make_sets(values, values[:, 0], grid16), target_month=1, lead=1)
    assert np.isnan(result.std[grid16.land_mask]).all()
    np.testing.assert_allclose(result.std[grid16.ocean_mask], 0.0)


def test_rapsd_satisfies_parseval():
    field = np.random.default_rng(8).normal(size=(12, 10))
    profile = rapsd(field)
    assert profile.total_power == pytest.approx(12 * 10 * (field ** 2).sum(), rel=1e-10)
    assert profile.counts.sum() == 120


def test_rapsd_of_constant_field_is_all_in_mean_ring():
    profile = rapsd(np.full((8, 8), 0.5))
    assert profile.rings[0] == 0
    assert profile.power[0] == pytest.approx((64 * 0.5) ** 2)
    np.testing.assert_allclose(profile.power[1:], 0.0, atol=1e-20)


def test_rapsd_of_white_noise_is_flat():
    rng = np.random.default_rng(16)
    profiles = [rapsd(rng.standard_normal((32, 32))) for _ in range(100)]
    power = np.mean([profile.power for profile in profiles], axis=0)
    wide = profiles[0].counts >= 8
    assert wide.sum() > 10
    np.testing.assert_allclose(power[wide] / (32 * 32), 1.0, atol=0.3)


def test_rapsd_fills_land_with_ocean_mean(grid16):
    values = np.random.default_rng(17).uniform(size=(16, 16))
    land = grid16.land_mask
    filled = np.where(land, values[~land].mean(), values)
    expected = rapsd(filled)
    for land_value in (np.nan, 1e6):
        profile = rapsd(np.where(land, land_value, values), grid16)
        np.testing.assert_array_equal(profile.rings, expected.rings)
        np.testing.assert_allclose(profile.power, expected.power, rtol=1e-10)


def test_rapsd_rejects_degenerate_input():
    with pytest.raises(MetricError):
        rapsd(np.zeros((2, 2, 2)))
    with pytest.raises(MetricError):
        rapsd(np.zeros((1, 1)))


def test_rapsd_ratio():
    rng = np.random.default_rng(9)
    obs = rng.uniform(size=(3, 1, 8, 8))
    grid = GridSpec.uniform(8, 8)
    same = rapsd_ratio(*make_sets(np.repeat(obs[:, None], 2, axis=1), obs, grid), target_month=1, lead=1)
    np.testing.assert_allclose(same.ratio, 1.0, rtol=1e-10)
    np.testing.assert_allclose(same.member_min, same.member_max, rtol=1e-10)
    assert same.n_times == 3

    smooth = obs.mean(axis=(-2, -1), keepdims=True) * np.ones((1, 1, 8, 8))
    flat = rapsd_ratio(*make_sets(smooth[:, None], obs, grid), target_month=1, lead=1)
    assert flat.high_frequency_mean() < 1e-6
    with pytest.raises(MetricError):
        rapsd_ratio(*make_sets(np.repeat(obs[:, None], 2, axis=1), obs, grid), target_month=1, lead=3)


def test_evaluate_suite_covers_report_metrics():
    series = evaluate_suite(*_iid_sets(2, 5, seed=10), EvaluationConfig(members=3))
    names = [item.name for item in series]
    assert set(REPORT_METRICS) <= set(names)
    by_name = {item.name: item for item in series}
    assert by_name["crps"].members == 3
    assert np.isnan(by_name["acc_sia"].values[0])


def test_build_report_and_crps_improvement():
    rng = np.random.default_rng(11)
    obs = rng.uniform(0.2, 0.8, size=(6, 2, 4, 4))
    grid = GridSpec.uniform(4, 4)
    spread = rng.normal(scale=0.05, size=(6, 4, 2, 4, 4))
    spread -= spread.mean(axis=1, keepdims=True)
    good, obs_set = make_sets(obs[:, None] + 0.01 * spread, obs, grid, months=(1, 7))
    poor, _ = make_sets(obs[:, None] + 0.1 + spread, obs, grid, months=(1, 7))
    frame = build_report({"good": good, "poor": poor}, obs_set, EvaluationConfig(members=4), reference="poor")
    assert list(frame[["lead", "pack"]].itertuples(index=False, name=None)) == [(1, "good"), (1, "poor"), (2, "good"), (2, "poor")]
    assert set(REPORT_METRICS) <= set(frame.columns)
    np.testing.assert_allclose(frame.loc[frame["pack"] == "poor", "crps_improvement"], 0.0)
    assert (frame.loc[frame["pack"] == "good", "crps_improvement"] > 0.5).all()
    with pytest.raises(MetricError):
        build_report({"good": good}, obs_set, reference="missing")
    with pytest.raises(MetricError):
        build_report({}, obs_set)
