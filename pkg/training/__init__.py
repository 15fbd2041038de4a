"""
Модуль обучения: оптимизатор, расписания и циклы предобучения и обучения cVAE.
"""
from training.optim import OptimState, accumulate_gradients, adam_step, beta_schedule, collect_gradients, cosine_lr
from training.loops import EpochRecord, TrainingHistory, TrainingResult, TrainState, pretrain_deterministic, train_cvae
