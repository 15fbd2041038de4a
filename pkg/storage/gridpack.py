"""
Модуль формата GridPack: каталог с JSON манифестом и сырыми массивами.

Значения хранятся little-endian float32 в порядке C (t, k, l, y, x) для
ансамблей и (t, l, y, x) для наблюдений; площади ячеек - float64, маска
суши - uint8. Для каждого файла в манифесте записаны размер и sha256.
"""
import hashlib
import json
from pathlib import Path
from typing import Literal

import numpy as np
import pydantic
from pydantic import BaseModel, ValidationError

from configuration.base import STORAGE_DTYPE
from grid.enums import RoleTag
from grid.models import AdjustedEnsemble, GridSpec, HindcastSet, ObsSet, Provenance
from storage.base_repository import AbstractFileRepository
from utils.exceptions import ChecksumError, GridPackFormatError, ShapeMismatchError


GRIDPACK_VERSION = 1
VALUES_FILE = "values.f32"
CELL_AREA_FILE = "cell_area.f64"
LAND_MASK_FILE = "land_mask.u8"

Dataset = HindcastSet | ObsSet


class FileEntry(BaseModel):
    name: str
    dtype: str
    shape: list[int]
    nbytes: int
    sha256: str


class GridPackManifest(BaseModel):
    """
    Манифест GridPack.
    """
    format: Literal["gridpack"] = "gridpack"
    format_version: int = GRIDPACK_VERSION
    role: RoleTag
    index_order: str = pydantic.Field(..., description="Axis order of the values file")
    dims: dict[str, int | None] = pydantic.Field(..., description="init_times, members (None for obs), leads, height, width")
    init_times: list[tuple[int, int]]
    leads: list[int]
    files: dict[str, FileEntry]
    provenance: Provenance | None = None


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _entry(name: str, array: np.ndarray) -> tuple[FileEntry, bytes]:
    data = np.ascontiguousarray(array).tobytes(order="C")
    entry = FileEntry(name=name, dtype=array.dtype.str, shape=list(array.shape), nbytes=len(data), sha256=sha256_bytes(data))
    return entry, data


def write_raw_files(path: Path, arrays: dict[str, np.ndarray]) -> dict[str, FileEntry]:
    entries = {}
    for name, array in arrays.items():
        entry, data = _entry(name, array)
        Path(path, name).write_bytes(data)
        entries[name] = entry
    return entries


def read_raw_file(path: Path, entry: FileEntry) -> np.ndarray:
    """
    Читает сырой массив, проверяя размер и контрольную сумму.
    """
    file_path = Path(path, entry.name)
    if not file_path.is_file():
        raise GridPackFormatError(f"missing data file {file_path}")
    data = file_path.read_bytes()
    expected = int(np.prod(entry.shape, dtype=np.int64)) * np.dtype(entry.dtype).itemsize
    if entry.nbytes != expected:
        raise GridPackFormatError(f"{entry.name}: manifest declares {entry.nbytes} bytes but dims imply {expected}")
    if len(data) != expected:
        raise GridPackFormatError(f"{entry.name}: file has {len(data)} bytes, expected {expected} (truncated or dims mismatch)")
    if sha256_bytes(data) != entry.sha256:
        raise ChecksumError(f"{entry.name}: checksum mismatch")
    return np.frombuffer(data, dtype=np.dtype(entry.dtype)).reshape(entry.shape)


def grid_arrays(grid: GridSpec) -> dict[str, np.ndarray]:
    return {
        CELL_AREA_FILE: np.asarray(grid.cell_area, dtype="<f8"),
        LAND_MASK_FILE: np.asarray(grid.land_mask, dtype=np.uint8),
    }


def grid_from_files(path: Path, files: dict[str, FileEntry]) -> GridSpec:
    for name in (CELL_AREA_FILE, LAND_MASK_FILE):
        if name not in files:
            raise GridPackFormatError(f"manifest does not list {name}")
    cell_area = read_raw_file(path, files[CELL_AREA_FILE]).astype(float)
    land_mask = read_raw_file(path, files[LAND_MASK_FILE]).astype(bool)
    if cell_area.ndim != 2 or cell_area.shape != land_mask.shape:
        raise GridPackFormatError(f"grid arrays have shapes {cell_area.shape} and {land_mask.shape}")
    height, width = cell_area.shape
    # Площади суши могут быть нулевыми; GridSpec проверяет только океан
    return GridSpec(height=height, width=width, cell_area=cell_area, land_mask=land_mask)


class GridPackRepository(AbstractFileRepository[Dataset]):
    """Хранилище наборов данных в формате GridPack."""

    @classmethod
    def raw_write(cls, obj: Dataset, path: Path, **kwargs) -> Path:
        values = np.asarray(obj.values)
        if isinstance(obj, HindcastSet):
            if values.ndim != 5 or values.shape[1] < 1:
                raise ShapeMismatchError("GridPack refuses an ensemble with an empty member axis")
            members, index_order = values.shape[1], "t,k,l,y,x"
        else:
            members, index_order = None, "t,l,y,x"
        arrays = {VALUES_FILE: values.astype(STORAGE_DTYPE), **grid_arrays(obj.grid)}
        files = write_raw_files(path, arrays)
        manifest = GridPackManifest(
            role=obj.role,
            index_order=index_order,
            dims={
                "init_times": len(obj.init_times),
                "members": members,
                "leads": len(obj.leads),
                "height": obj.grid.height,
                "width": obj.grid.width,
            },
            init_times=[tuple(item) for item in obj.init_times],
            leads=list(obj.leads),
            files=files,
            provenance=getattr(obj, "provenance", None),
        )
        Path(path, cls.manifest_name).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def read_manifest(cls, path: Path) -> GridPackManifest:
        try:
            manifest = GridPackManifest.model_validate_json(Path(path, cls.manifest_name).read_text(encoding="utf-8"))
        except (ValidationError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise GridPackFormatError(f"invalid GridPack manifest in {path}: {exc}") from exc
        if manifest.format_version != GRIDPACK_VERSION:
            raise GridPackFormatError(f"unsupported GridPack version {manifest.format_version}")
        return manifest

    @classmethod
    def raw_read(cls, path: Path, **kwargs) -> Dataset:
        manifest = cls.read_manifest(path)
        if VALUES_FILE not in manifest.files:
            raise GridPackFormatError(f"manifest does not list {VALUES_FILE}")
        grid = grid_from_files(path, manifest.files)
        dims = manifest.dims
        if (dims.get("height"), dims.get("width")) != grid.shape:
            raise GridPackFormatError(f"manifest dims {dims} disagree with grid {grid.shape}")
        entry = manifest.files[VALUES_FILE]
        if manifest.role == RoleTag.obs:
            expected = [dims["init_times"], dims["leads"], grid.height, grid.width]
        else:
            expected = [dims["init_times"], dims["members"], dims["leads"], grid.height, grid.width]
        if entry.shape != expected:
            raise GridPackFormatError(f"values shape {entry.shape} disagrees with dims {expected}")
        values = read_raw_file(path, entry).astype(float)

        common = dict(grid=grid, init_times=tuple(tuple(item) for item in manifest.init_times), leads=tuple(manifest.leads), values=values)
        if manifest.role == RoleTag.obs:
            return ObsSet(**common)
        if manifest.role == RoleTag.hindcast:
            return HindcastSet(**common)
        provenance = manifest.provenance or Provenance(role=manifest.role)
        return AdjustedEnsemble(**common, role=manifest.role, provenance=provenance)


def write_gridpack(dataset: Dataset, path: Path | str) -> Path:
    """
    Записывает набор данных в каталог GridPack.
    """
    return GridPackRepository.write(dataset, path)


def read_gridpack(path: Path | str) -> Dataset:
    """
    Читает набор данных из каталога GridPack с проверкой размеров и контрольных сумм.
    """
    return GridPackRepository.read(path)
