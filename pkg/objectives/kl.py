"""
Модуль KL-дивергенции диагональных гауссиан.
"""
from autodiff import Tensor, functional as F
from cvae.model import GaussianParams
from utils.exceptions import ShapeMismatchError


def kl_diag_gauss(q: GaussianParams, p: GaussianParams) -> Tensor:
    """
    KL(q || p) в замкнутой форме, суммой по латентной оси.

    Σ_i [ log(σ_p/σ_q) + (σ_q² + (μ_q − μ_p)²)/(2σ_p²) − ½ ]

    Args:
        q: Апостериорное распределение (μ, log σ²) [..., D_z]
        p: Априорное распределение той же формы

    Returns:
        Tensor: KL [...]
    """
    if q.mean.shape != p.mean.shape or q.logvar.shape != p.logvar.shape:
        raise ShapeMismatchError(f"KL between distributions of shapes {q.mean.shape} and {p.mean.shape}")
    log_ratio = F.mul(F.sub(p.logvar, q.logvar), 0.5)
    diff = F.sub(q.mean, p.mean)
    numerator = F.add(F.exp(q.logvar), F.square(diff))
    quadratic = F.div(numerator, F.mul(F.exp(p.logvar), 2.0))
    return F.sum(F.sub(F.add(log_ratio, quadratic), 0.5), axis=-1)
