"""
Модуль хранения: наборы данных GridPack, контрольные точки и экспорт метрик.
"""
from storage.base_repository import AbstractFileRepository
from storage.gridpack import GridPackManifest, GridPackRepository, read_gridpack, write_gridpack
from storage.checkpoints import CheckpointRepository, LoadedCheckpoint, load_checkpoint, save_checkpoint
from storage.metrics_export import export_metrics, export_quantiles, export_rank_histograms, export_spectra, import_metrics, metrics_frame
