"""
Модуль контрольных точек модели.

Каталог: manifest.json (архитектура, ее хэш, режим, зерно, флаги стадий,
сетка), params.npz (все параметры в float64) и, при продолжаемом
обучении, state.npz с моментами Adam и лучшими параметрами.
"""
import hashlib
from datetime import datetime
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, ValidationError

from configuration.run_config import ArchitectureConfig, TrainConfig, TrainMode
from cvae.model import CVAEModel
from storage.base_repository import AbstractFileRepository
from storage.gridpack import FileEntry, grid_arrays, grid_from_files, write_raw_files
from training.loops import TrainState
from utils.exceptions import CheckpointMismatchError, ChecksumError


CHECKPOINT_VERSION = 1
PARAMS_FILE = "params.npz"
STATE_FILE = "state.npz"


class CheckpointManifest(BaseModel):
    format: Literal["checkpoint"] = "checkpoint"
    format_version: int = CHECKPOINT_VERSION
    architecture: ArchitectureConfig
    architecture_hash: str
    mode: TrainMode
    seed: int
    pretrained: bool
    trained: bool
    params_digest: str
    checkpoint_id: str
    grid_files: dict[str, FileEntry]
    train_state: dict[str, Any] | None = pydantic.Field(None, description="Resumable training counters and history")
    created_at: str = pydantic.Field(default_factory=lambda: datetime.now().isoformat())


class LoadedCheckpoint(BaseModel):
    """
    Модель из контрольной точки и, если сохранено, состояние обучения.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: CVAEModel
    manifest: CheckpointManifest
    state_arrays: dict[str, np.ndarray] | None = None

    def train_state(self, cfg: TrainConfig) -> TrainState | None:
        """
        Восстанавливает состояние обучения для продолжения прерванного запуска.
        """
        if self.manifest.train_state is None or self.state_arrays is None:
            return None
        return TrainState.restore(self.manifest.train_state, self.state_arrays, dict(self.model.named_parameters()), cfg)


def params_digest(params: dict[str, np.ndarray]) -> str:
    """
    sha256 по именам и байтам параметров в порядке сортировки имен.
    """
    digest = hashlib.sha256()
    for name in sorted(params):
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    return digest.hexdigest()


class CheckpointRepository(AbstractFileRepository[LoadedCheckpoint]):
    """Хранилище контрольных точек cVAE."""

    @classmethod
    def raw_write(cls, obj: CVAEModel, path: Path, state: TrainState | None = None, **kwargs) -> Path:
        params = obj.state_dict()
        digest = params_digest(params)
        arch_hash = obj.arch.hash()
        checkpoint_id = f"{arch_hash[:12]}-{digest[:12]}"
        np.savez(Path(path, PARAMS_FILE), **params)
        state_file = Path(path, STATE_FILE)
        if state is not None:
            np.savez(state_file, **state.arrays())
        elif state_file.exists():
            state_file.unlink()
        manifest = CheckpointManifest(
            architecture=obj.arch,
            architecture_hash=arch_hash,
            mode=obj.mode,
            seed=obj.seed,
            pretrained=obj.pretrained,
            trained=obj.trained,
            params_digest=digest,
            checkpoint_id=checkpoint_id,
            grid_files=write_raw_files(path, grid_arrays(obj.grid)),
            train_state=None if state is None else state.meta(),
        )
        Path(path, cls.manifest_name).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        obj.checkpoint_id = checkpoint_id
        return path

    @classmethod
    def raw_read(cls, path: Path, architecture: ArchitectureConfig | None = None, **kwargs) -> LoadedCheckpoint:
        try:
            manifest = CheckpointManifest.model_validate_json(Path(path, cls.manifest_name).read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise CheckpointMismatchError(f"invalid checkpoint manifest in {path}: {exc}") from exc
        if manifest.format_version != CHECKPOINT_VERSION:
            raise CheckpointMismatchError(f"checkpoint version {manifest.format_version} != supported {CHECKPOINT_VERSION}")
        if manifest.architecture.hash() != manifest.architecture_hash:
            raise CheckpointMismatchError("stored architecture does not match its recorded hash")
        if architecture is not None and architecture.hash() != manifest.architecture_hash:
            raise CheckpointMismatchError(
                f"architecture hash mismatch: checkpoint {manifest.architecture_hash[:12]}, config {architecture.hash()[:12]}"
            )

        with np.load(Path(path, PARAMS_FILE)) as archive:
            params = {name: archive[name] for name in archive.files}
        if params_digest(params) != manifest.params_digest:
            raise ChecksumError(f"parameter digest mismatch in {path}")

        grid = grid_from_files(path, manifest.grid_files)
        model = CVAEModel(manifest.architecture, grid, seed=manifest.seed, mode=manifest.mode)
        model.load_state_dict(params)
        model.pretrained = manifest.pretrained
        model.trained = manifest.trained
        model.checkpoint_id = manifest.checkpoint_id

        state_arrays = None
        state_file = Path(path, STATE_FILE)
        if manifest.train_state is not None and state_file.is_file():
            with np.load(state_file) as archive:
                state_arrays = {name: archive[name] for name in archive.files}
        return LoadedCheckpoint(model=model, manifest=manifest, state_arrays=state_arrays)


def save_checkpoint(model: CVAEModel, path: Path | str, state: TrainState | None = None) -> Path:
    """
    Сохраняет параметры модели, хэш архитектуры и (необязательно) состояние обучения.
    """
    return CheckpointRepository.write(model, path, state=state)


def load_checkpoint(path: Path | str, architecture: ArchitectureConfig | None = None) -> LoadedCheckpoint:
    """
    Загружает контрольную точку; при заданной архитектуре сверяет ее хэш.
    """
    return CheckpointRepository.read(path, architecture=architecture)
