"""
Модуль верификации ансамблей относительно наблюдений.
"""
from metrics.models import MetricSeries, QuantilePairs, RankHistogram, SpectrumProfile, SpectrumRatio, SpreadMap
from metrics.scores import crps_metric, qq_quantiles, rank_histogram_cdf, rmse_and_spread, soe
from metrics.integrated import acc_and_pattern_corr, domain_mask, iiee, integrated_errors, sia, sie, soe_integrated, spread_map
from metrics.spectra import rapsd, rapsd_ratio
from metrics.report import REPORT_METRICS, build_report, evaluate_suite
