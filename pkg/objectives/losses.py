"""
Модуль функций потерь обучения.

ELBO в режиме CRPS: β·KL/D_z + (1/N)Σ_n ½·[CRPS_поле + CRPS_2×2](y, G^M(z_n)).
ELBO в режиме MSE: β·KL/D_z + (1/N)Σ_n MSE(y, μ_θ(z_n))/σ².
Пространственные средние берутся без весов по ячейкам океана.
"""
import numpy as np
from pydantic import BaseModel, Field

from autodiff import Tensor, as_tensor, functional as F
from configuration.run_config import TrainConfig
from cvae.conditioning import ConditionBatch
from cvae.model import CVAEModel, LatentSource, reparameterize
from objectives.crps import crps_field, crps_pooled
from objectives.kl import kl_diag_gauss
from utils.exceptions import NonFiniteError, ShapeMismatchError


class LossBreakdown(BaseModel):
    """
    Составляющие функции потерь одного пакета.
    """
    kl: float = Field(..., description="Mean KL(q || p) per item, before weighting")
    kl_term: float = Field(..., description="beta * KL / latent_dim")
    reconstruction_term: float = Field(..., description="Mean per-cell CRPS or MSE")
    pooled_crps_term: float | None = Field(None, description="Mean 2x2 pooled CRPS (CRPS mode)")
    total: float
    beta: float
    latent_dim: int
    n_valid: int = Field(..., description="Valid cells used for the spatial mean")


def _check_finite(total: Tensor) -> None:
    if not np.isfinite(total.data).all():
        raise NonFiniteError(f"loss is not finite: {total.item()}")


def masked_mse(prediction, target, mask: np.ndarray) -> Tensor:
    """
    Среднее (ŷ − y)² по допустимым ячейкам и пакету.
    """
    prediction, target = as_tensor(prediction), as_tensor(target)
    if prediction.shape != target.shape:
        raise ShapeMismatchError(f"prediction {prediction.shape} != target {target.shape}")
    diff = F.mul(F.sub(prediction, target), mask.astype(float))
    batch = int(np.prod(prediction.shape[:-2])) if prediction.ndim > 2 else 1
    return F.mul(F.sum(F.square(diff)), 1.0 / (int(mask.sum()) * batch))


def mse_pretrain_loss(y_tilde, y, mask: np.ndarray) -> Tensor:
    """
    Потеря предобучения детерминированной сети: MSE по ячейкам океана.
    """
    return masked_mse(y_tilde, y, mask)


def _kl_mean(model: CVAEModel, batch: ConditionBatch):
    estimate = model.deterministic_estimate(batch)
    posterior = model.encode(batch.y, batch)
    prior = model.prior(batch, estimate.field)
    kl = F.mean(kl_diag_gauss(posterior, prior))
    return estimate, posterior, kl


def elbo_crps_loss(model: CVAEModel, batch: ConditionBatch, rng: np.random.Generator, beta: float, cfg: TrainConfig) -> tuple[Tensor, LossBreakdown]:
    """
    Целевая функция cVAE-CRPS для пакета.

    Args:
        model: Модель
        batch: Пакет условий с наблюдениями y
        rng: Генератор латентных выборок и шума
        beta: Текущий вес KL
        cfg: Параметры обучения (N, M)

    Returns:
        tuple: (скалярная потеря, разбивка)
    """
    mask = model.grid.ocean_mask
    estimate, posterior, kl = _kl_mean(model, batch)
    field_terms, pooled_terms, reconstruction = [], [], None
    for _ in range(cfg.posterior_samples):
        z = reparameterize(posterior, rng, source=LatentSource.posterior).z
        ensemble = model.generate(z, estimate, rng, cfg.decodes_per_sample)
        field_term = crps_field(batch.y, ensemble, mask)
        pooled_term = crps_pooled(batch.y, ensemble, mask)
        field_terms.append(field_term.item())
        pooled_terms.append(pooled_term.item())
        sample_term = F.mul(F.add(field_term, pooled_term), 0.5)
        reconstruction = sample_term if reconstruction is None else F.add(reconstruction, sample_term)
    reconstruction = F.mul(reconstruction, 1.0 / cfg.posterior_samples)
    kl_term = F.mul(kl, beta / model.arch.latent_dim)
    total = F.add(kl_term, reconstruction)
    _check_finite(total)
    return total, LossBreakdown(
        kl=kl.item(),
        kl_term=kl_term.item(),
        reconstruction_term=float(np.mean(field_terms)),
        pooled_crps_term=float(np.mean(pooled_terms)),
        total=total.item(),
        beta=beta,
        latent_dim=model.arch.latent_dim,
        n_valid=int(mask.sum()),
    )


def elbo_mse_loss(model: CVAEModel, batch: ConditionBatch, rng: np.random.Generator, beta: float, cfg: TrainConfig) -> tuple[Tensor, LossBreakdown]:
    """
    Целевая функция гауссова cVAE (MSE относительно среднего декодера).
    """
    mask = model.grid.ocean_mask
    estimate, posterior, kl = _kl_mean(model, batch)
    reconstruction = None
    for _ in range(cfg.posterior_samples):
        z = reparameterize(posterior, rng, source=LatentSource.posterior).z
        decoded = model.gaussian_decode(z, estimate, disable_noise=True)
        sample_term = F.mul(masked_mse(decoded, batch.y, mask), 1.0 / cfg.decoder_noise_variance)
        reconstruction = sample_term if reconstruction is None else F.add(reconstruction, sample_term)
    reconstruction = F.mul(reconstruction, 1.0 / cfg.posterior_samples)
    kl_term = F.mul(kl, beta / model.arch.latent_dim)
    total = F.add(kl_term, reconstruction)
    _check_finite(total)
    return total, LossBreakdown(
        kl=kl.item(),
        kl_term=kl_term.item(),
        reconstruction_term=reconstruction.item(),
        total=total.item(),
        beta=beta,
        latent_dim=model.arch.latent_dim,
        n_valid=int(mask.sum()),
    )
