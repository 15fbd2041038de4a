"""
Модуль циклов обучения.

Предобучение детерминированной сети (MSE) и сквозное обучение cVAE с Adam,
косинусным шагом, отжигом β, накоплением градиентов микропакетов и ранней
остановкой по валидационной потере. Генератор каждой эпохи выводится из
(seed, стадия, эпоха), поэтому прерванный запуск продолжается с той же
историей.
"""
import math
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from autodiff import Tensor, backward, no_grad
from configuration.base import derive_rng
from configuration.run_config import TrainConfig, TrainMode
from cvae.conditioning import ConditionBatch
from cvae.model import CVAEModel
from grid.models import SampleSet
from grid.operations import ensemble_mean_array
from objectives.losses import LossBreakdown, elbo_crps_loss, elbo_mse_loss, mse_pretrain_loss
from training.optim import OptimState, accumulate_gradients, adam_step, beta_schedule, collect_gradients, cosine_lr
from utils.exceptions import ModeMismatchError, NonFiniteError, ShapeMismatchError, TrainingDivergedError, UntrainedCheckpointError
from utils.loggers import logger, run_extra


PRETRAIN_STAGE = 1
TRAIN_STAGE = 2
VALIDATION_STREAM = 1_000_000

HISTORY_COLUMNS = ["epoch", "train_total", "train_kl", "train_recon", "train_pooled", "val_total", "lr", "beta", "val_beta"]


class EpochRecord(BaseModel):
    epoch: int
    train_total: float
    train_kl: float = 0.0
    train_recon: float
    train_pooled: float | None = None
    val_total: float
    lr: float
    beta: float = 0.0
    val_beta: float = 0.0


class TrainingHistory(BaseModel):
    records: list[EpochRecord] = []

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([record.model_dump() for record in self.records], columns=HISTORY_COLUMNS)

    def to_csv(self, path: Path | str) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.9g")

    @property
    def val_losses(self) -> list[float]:
        return [record.val_total for record in self.records]


class TrainState:
    """
    Состояние обучения, достаточное для продолжения прерванного запуска.
    """

    def __init__(self, stage: int, optim: OptimState):
        self.stage = stage
        self.optim = optim
        self.next_epoch = 0
        self.global_step = 0
        self.best_val = math.inf
        self.best_epoch = -1
        self.epochs_since_best = 0
        self.best_params: dict[str, np.ndarray] | None = None
        self.history = TrainingHistory()
        self.finished = False

    def meta(self) -> dict:
        return {
            "stage": self.stage,
            "next_epoch": self.next_epoch,
            "global_step": self.global_step,
            "best_val": self.best_val if math.isfinite(self.best_val) else None,
            "best_epoch": self.best_epoch,
            "epochs_since_best": self.epochs_since_best,
            "finished": self.finished,
            "history": self.history.model_dump(),
        }

    def arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"optim/{key}": value for key, value in self.optim.state_arrays().items()}
        if self.best_params is not None:
            arrays.update({f"best/{name}": value for name, value in self.best_params.items()})
        return arrays

    @classmethod
    def restore(cls, meta: dict, arrays: dict[str, np.ndarray], params: dict[str, Tensor], cfg: TrainConfig) -> "TrainState":
        optim = OptimState.for_parameters(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        optim.load_arrays({key[len("optim/"):]: value for key, value in arrays.items() if key.startswith("optim/")})
        state = cls(meta["stage"], optim)
        state.next_epoch = meta["next_epoch"]
        state.global_step = meta["global_step"]
        state.best_val = math.inf if meta["best_val"] is None else meta["best_val"]
        state.best_epoch = meta["best_epoch"]
        state.epochs_since_best = meta["epochs_since_best"]
        state.finished = meta["finished"]
        state.history = TrainingHistory.model_validate(meta["history"])
        best = {key[len("best/"):]: value for key, value in arrays.items() if key.startswith("best/")}
        state.best_params = best or None
        return state


class TrainingResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    history: TrainingHistory
    best_epoch: int
    best_val: float | None
    state: TrainState


LossFn = Callable[[ConditionBatch, np.random.Generator, float], tuple[Tensor, LossBreakdown]]


def _batches(pairs: list[tuple[int, int]], order: np.ndarray, size: int) -> list[list[tuple[int, int]]]:
    return [[pairs[i] for i in order[start:start + size]] for start in range(0, len(order), size)]


def _evaluate(loss_fn: LossFn, sample: SampleSet, x_mean: np.ndarray, cfg: TrainConfig, rng: np.random.Generator, beta: float) -> float:
    pairs = list(sample.pairs)
    total, count = 0.0, 0
    with no_grad():
        for chunk in _batches(pairs, np.arange(len(pairs)), cfg.micro_batch):
            batch = ConditionBatch.from_pairs(sample.hindcast, chunk, sample.obs, x_mean)
            loss, _ = loss_fn(batch, rng, beta)
            total += loss.item() * len(chunk)
            count += len(chunk)
    return total / max(count, 1)


def _fit(
    params: dict[str, Tensor],
    loss_fn: LossFn,
    train: SampleSet,
    val: SampleSet,
    cfg: TrainConfig,
    stage: int,
    epochs: int,
    run_dir: Path | None,
    state: TrainState | None,
    on_epoch_end: Callable[[TrainState], None] | None,
    stop_after: int | None,
    log_name: str,
    anneal: bool,
) -> TrainState:
    if len(train) == 0 or len(val) == 0:
        raise ShapeMismatchError("training and validation sets must be non-empty")
    if state is None:
        state = TrainState(stage, OptimState.for_parameters(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps))
    x_mean_train = ensemble_mean_array(train.hindcast)
    x_mean_val = x_mean_train if val.hindcast is train.hindcast else ensemble_mean_array(val.hindcast)
    pairs = list(train.pairs)
    steps_per_epoch = math.ceil(len(pairs) / cfg.effective_batch)
    total_steps = epochs * steps_per_epoch
    extra = run_extra(run_dir, log_name)

    last_epoch = epochs if stop_after is None else min(epochs, state.next_epoch + stop_after)
    progress = tqdm(range(state.next_epoch, last_epoch), desc=log_name, leave=False, disable=None)
    for epoch in progress:
        if state.finished:
            break
        rng = derive_rng(cfg.seed, stage, epoch)
        beta = beta_schedule(epoch, cfg.beta_max, cfg.anneal_epochs) if anneal else 0.0
        # Валидационная потеря на всех эпохах считается при β_max
        val_beta = cfg.beta_max if anneal else 0.0
        order = rng.permutation(len(pairs))
        sums = {"total": 0.0, "kl": 0.0, "recon": 0.0, "pooled": 0.0}
        has_pooled = False
        lr = cfg.max_lr
        for step_pairs in _batches(pairs, order, cfg.effective_batch):
            lr = cosine_lr(state.global_step, total_steps, cfg.max_lr)
            micro_grads, weights = [], []
            for chunk in _batches(step_pairs, np.arange(len(step_pairs)), cfg.micro_batch):
                batch = ConditionBatch.from_pairs(train.hindcast, chunk, train.obs, x_mean_train)
                for tensor in params.values():
                    tensor.grad = None
                try:
                    loss, breakdown = loss_fn(batch, rng, beta)
                    backward(loss)
                    micro_grads.append(collect_gradients(params))
                except NonFiniteError as exc:
                    raise TrainingDivergedError(f"{log_name} diverged at epoch {epoch}, step {state.global_step}, pairs {chunk}: {exc}") from exc
                weights.append(len(chunk))
                sums["total"] += breakdown.total * len(chunk)
                sums["kl"] += breakdown.kl * len(chunk)
                sums["recon"] += breakdown.reconstruction_term * len(chunk)
                if breakdown.pooled_crps_term is not None:
                    has_pooled = True
                    sums["pooled"] += breakdown.pooled_crps_term * len(chunk)
            adam_step(params, accumulate_gradients(micro_grads, weights), state.optim, lr)
            state.global_step += 1

        val_total = _evaluate(loss_fn, val, x_mean_val, cfg, derive_rng(cfg.seed, stage, VALIDATION_STREAM), val_beta)
        if not math.isfinite(val_total):
            raise TrainingDivergedError(f"{log_name} validation loss is not finite at epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            train_total=sums["total"] / len(pairs),
            train_kl=sums["kl"] / len(pairs),
            train_recon=sums["recon"] / len(pairs),
            train_pooled=sums["pooled"] / len(pairs) if has_pooled else None,
            val_total=val_total,
            lr=lr,
            beta=beta,
            val_beta=val_beta,
        )
        state.history.records.append(record)
        if val_total < state.best_val:
            state.best_val = val_total
            state.best_epoch = epoch
            state.epochs_since_best = 0
            state.best_params = {name: tensor.data.copy() for name, tensor in params.items()}
        else:
            state.epochs_since_best += 1
        state.next_epoch = epoch + 1
        logger.info(
            f"{log_name} epoch {epoch}: train={record.train_total:.6g} val={val_total:.6g} lr={lr:.3g} beta={beta:.4g}",
            extra=extra,
        )
        if state.epochs_since_best >= cfg.early_stop_buffer:
            logger.info(f"{log_name}: early stop at epoch {epoch}, best epoch {state.best_epoch}", extra=extra)
            state.finished = True
        if on_epoch_end is not None:
            on_epoch_end(state)

    if state.next_epoch >= epochs:
        state.finished = True
    if state.finished and state.best_params is not None:
        for name, tensor in params.items():
            tensor.data = state.best_params[name].copy()
    if run_dir is not None:
        state.history.to_csv(Path(run_dir, f"{log_name}_history.csv"))
    return state


def pretrain_deterministic(
    model: CVAEModel,
    train: SampleSet,
    val: SampleSet,
    cfg: TrainConfig,
    run_dir: Path | None = None,
    state: TrainState | None = None,
    on_epoch_end: Callable[[TrainState], None] | None = None,
    stop_after: int | None = None,
) -> TrainingResult:
    """
    Предобучение детерминированной сети и общего выходного блока по MSE.

    Args:
        model: Модель (обучаются deterministic и output)
        train: Обучающая выборка
        val: Валидационная выборка
        cfg: Параметры обучения (pretrain_epochs)
        run_dir: Каталог запуска для лога и истории
        state: Состояние для продолжения прерванного запуска
        on_epoch_end: Вызывается после каждой эпохи (сохранение контрольной точки)
        stop_after: Прервать после заданного числа эпох этого вызова

    Returns:
        TrainingResult: История и лучшая эпоха
    """
    names = {id(tensor) for tensor in model.deterministic_parameters()}
    params = {name: tensor for name, tensor in model.named_parameters() if id(tensor) in names}
    mask = model.grid.ocean_mask

    def loss_fn(batch: ConditionBatch, rng: np.random.Generator, beta: float):
        estimate = model.deterministic_estimate(batch)
        loss = mse_pretrain_loss(estimate.field, batch.y, mask)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteError(f"pretraining loss is not finite: {value}")
        return loss, LossBreakdown(
            kl=0.0, kl_term=0.0, reconstruction_term=value, total=value,
            beta=0.0, latent_dim=model.arch.latent_dim, n_valid=int(mask.sum()),
        )

    state = _fit(params, loss_fn, train, val, cfg, PRETRAIN_STAGE, cfg.pretrain_epochs, run_dir, state, on_epoch_end, stop_after, "pretrain", anneal=False)
    if state.finished:
        model.pretrained = True
    return TrainingResult(history=state.history, best_epoch=state.best_epoch, best_val=state.best_val if state.best_epoch >= 0 else None, state=state)


def train_cvae(
    model: CVAEModel,
    train: SampleSet,
    val: SampleSet,
    cfg: TrainConfig,
    run_dir: Path | None = None,
    state: TrainState | None = None,
    on_epoch_end: Callable[[TrainState], None] | None = None,
    stop_after: int | None = None,
) -> TrainingResult:
    """
    Сквозное обучение всех сетей cVAE в режиме модели (crps или mse).

    Требует предобученной детерминированной сети. По завершении в модель
    загружаются параметры лучшей по валидации эпохи.
    """
    if not getattr(model, "pretrained", False):
        raise UntrainedCheckpointError("train_cvae requires a pretrained deterministic network")
    if TrainMode(cfg.mode) != model.mode:
        raise ModeMismatchError(f"config mode {cfg.mode} differs from model mode {model.mode.value}")
    params = dict(model.named_parameters())
    objective = elbo_crps_loss if model.mode == TrainMode.crps else elbo_mse_loss

    def loss_fn(batch: ConditionBatch, rng: np.random.Generator, beta: float):
        return objective(model, batch, rng, beta, cfg)

    state = _fit(params, loss_fn, train, val, cfg, TRAIN_STAGE, cfg.max_epochs, run_dir, state, on_epoch_end, stop_after, "train", anneal=True)
    if state.finished:
        model.trained = True
    return TrainingResult(history=state.history, best_epoch=state.best_epoch, best_val=state.best_val if state.best_epoch >= 0 else None, state=state)
