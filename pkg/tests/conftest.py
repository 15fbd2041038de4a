"""
Общие фикстуры тестов: сетка 16×16, игрушечная архитектура и малый синтетический набор.
"""
import numpy as np
import pytest

from configuration.run_config import ArchitectureConfig, RunConfig, SynthConfig, TrainConfig, TrainMode
from cvae import CVAEModel
from grid.models import GridSpec, HindcastSet, ObsSet, SplitSpec
from grid.operations import temporal_split
from synthetic import generate_dataset


def make_land_mask(height: int = 16, width: int = 16) -> np.ndarray:
    land = np.zeros((height, width), dtype=bool)
    land[:3, :3] = True
    land[-2:, -4:] = True
    land[8, 8] = True
    return land


def make_sets(values: np.ndarray, obs: np.ndarray, grid: GridSpec, start_year: int = 2000, months: tuple[int, ...] = (1,)) -> tuple[HindcastSet, ObsSet]:
    """
    Наборы из массивов [T, K, L, H, W] и [T, L, H, W]; даты идут по годам и месяцам.
    """
    n_times, n_leads = obs.shape[:2]
    init_times = tuple((start_year + t // len(months), months[t % len(months)]) for t in range(n_times))
    leads = tuple(range(1, n_leads + 1))
    return (
        HindcastSet(grid=grid, init_times=init_times, leads=leads, values=values),
        ObsSet(grid=grid, init_times=init_times, leads=leads, values=obs),
    )


@pytest.fixture
def grid16() -> GridSpec:
    return GridSpec.uniform(16, 16, land_mask=make_land_mask())


@pytest.fixture
def toy_arch() -> ArchitectureConfig:
    return ArchitectureConfig(widths=[2, 3, 3, 4, 4], latent_dim=3)


@pytest.fixture
def synth_cfg() -> SynthConfig:
    return SynthConfig(
        height=16,
        width=16,
        start_year=2000,
        end_year=2005,
        init_months=[1, 7],
        members=4,
        leads=2,
        correlation_length=2.0,
        n_islands=1,
        island_radius=1.0,
        seed=3,
    )


@pytest.fixture
def split() -> SplitSpec:
    return SplitSpec(train_range=(2000, 2002), val_range=(2003, 2003), test_range=(2004, 2005))


@pytest.fixture
def train_cfg() -> TrainConfig:
    return TrainConfig(
        max_lr=1e-3,
        micro_batch=2,
        accumulation_steps=2,
        beta_max=0.01,
        anneal_epochs=1,
        early_stop_buffer=5,
        max_epochs=2,
        pretrain_epochs=2,
        decodes_per_sample=3,
        seed=0,
    )


@pytest.fixture
def run_cfg(toy_arch, train_cfg, synth_cfg, split) -> RunConfig:
    return RunConfig(architecture=toy_arch, training=train_cfg, synth=synth_cfg, split=split)


@pytest.fixture
def dataset(synth_cfg) -> tuple[HindcastSet, ObsSet]:
    return generate_dataset(synth_cfg)


@pytest.fixture
def samples(dataset, split):
    hindcast, obs = dataset
    return temporal_split(hindcast, obs, split)


@pytest.fixture
def toy_model(toy_arch, dataset) -> CVAEModel:
    hindcast, _ = dataset
    return CVAEModel(toy_arch, hindcast.grid, seed=0, mode=TrainMode.crps)
