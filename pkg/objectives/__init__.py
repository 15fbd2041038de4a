"""
Модуль функций потерь: KL, CRPS ансамбля, пулинговый CRPS и ELBO.
"""
from objectives.crps import crps_cells, crps_ensemble, crps_ensemble_array, crps_field, crps_pooled
from objectives.kl import kl_diag_gauss
from objectives.losses import LossBreakdown, elbo_crps_loss, elbo_mse_loss, masked_mse, mse_pretrain_loss
