"""
Модуль команд CLI: synth, pretrain, train, calibrate, adjust, badj, evaluate, rapsd, report.

Каждая команда читает RunConfig (--config), наборы GridPack из каталога
данных (--data) и пишет артефакты в --out. Сводка выполнения печатается в
stdout как JSON.
"""
from pathlib import Path

import click

from benchmark import badj_adjust, fit_climatology
from calibration import CalibrationResult, adjust as nadj_adjust, calibrate_prior_scale
from cli.app import app
from cli.schematics import AdjustSummary, CommandSummary, EvaluateSummary, SynthSummary, TrainSummary
from configuration.paths import resolve_data_path
from configuration.run_config import RunConfig, load_run_config
from configuration.settings import settings
from cvae import CVAEModel
from grid.enums import RoleTag, SplitName
from grid.models import HindcastSet, ObsSet
from grid.operations import temporal_split
from metrics import build_report, evaluate_suite, qq_quantiles, rank_histogram_cdf, rapsd_ratio
from storage import export_metrics, export_quantiles, export_rank_histograms, export_spectra, load_checkpoint, read_gridpack, save_checkpoint, write_gridpack
from synthetic import generate_dataset
from training import TrainState, pretrain_deterministic, train_cvae
from training.loops import PRETRAIN_STAGE, TRAIN_STAGE
from utils.exception_handler.decorator import handle
from utils.exceptions import CalibrationError, GridMismatchError, MetricError, MissingInputError, UntrainedCheckpointError
from utils.loggers import logger


HINDCAST_DIR = "hindcast"
OBS_DIR = "obs"


def config_option(func):
    return click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="RunConfig JSON file")(func)


def seed_option(func):
    return click.option("--seed", type=int, default=None, help="Root seed overriding every seed in the config")(func)


def data_option(func):
    return click.option("--data", "data_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Directory with hindcast/ and obs/ GridPacks")(func)


def workers_option(func):
    return click.option("--workers", type=click.IntRange(min=1), default=None, help="Threads for ensemble generation")(func)


def _config(config_path: Path | None, seed: int | None) -> RunConfig:
    cfg = load_run_config(config_path)
    if seed is None:
        return cfg
    return cfg.model_copy(update=dict(
        seed=seed,
        training=cfg.training.model_copy(update=dict(seed=seed)),
        synth=cfg.synth.model_copy(update=dict(seed=seed)),
        calibration=cfg.calibration.model_copy(update=dict(seed=seed)),
    ))


def _data_dir(data_dir: Path | None, cfg: RunConfig) -> Path:
    return Path(data_dir) if data_dir is not None else resolve_data_path(cfg.paths.data_root, "synthetic")


def _load_data(data_dir: Path) -> tuple[HindcastSet, ObsSet]:
    hindcast = read_gridpack(Path(data_dir, HINDCAST_DIR))
    obs = read_gridpack(Path(data_dir, OBS_DIR))
    if not isinstance(hindcast, HindcastSet) or not isinstance(obs, ObsSet):
        raise MissingInputError(f"{data_dir} must hold a hindcast pack in {HINDCAST_DIR}/ and an obs pack in {OBS_DIR}/")
    return hindcast, obs


def _select(dataset: HindcastSet, obs: ObsSet, cfg: RunConfig, split: str) -> HindcastSet:
    if split == "all":
        return dataset
    samples = dict(zip([SplitName.train, SplitName.val, SplitName.test], temporal_split(dataset, obs, cfg.split)))
    return dataset.select(samples[SplitName(split)].init_indices)


def _aligned_obs(pack: HindcastSet, obs: ObsSet) -> ObsSet:
    """
    Наблюдения для индексного пространства пакета.
    """
    try:
        indices = [obs.init_times.index(init_time) for init_time in pack.init_times]
    except ValueError:
        raise GridMismatchError("pack contains initialisation times that are absent from the observations") from None
    selected = obs.select(indices)
    selected.require_aligned(pack)
    return selected


def _echo(summary: CommandSummary) -> None:
    click.echo(summary.model_dump_json())


def _pack_names(paths: tuple[Path, ...]) -> list[str]:
    """
    Имена ансамблей по каталогам; совпадающие имена дополняются родительским каталогом.
    """
    paths = [Path(path) for path in paths]
    names = [path.name for path in paths]
    names = [f"{path.parent.name}-{path.name}" if names.count(path.name) > 1 else path.name for path in paths]
    repeated = sorted({name for name in names if names.count(name) > 1})
    if repeated:
        raise GridMismatchError(f"packs cannot be told apart by directory name: {repeated}")
    return names


@app.command("synth")
@config_option
@seed_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output data directory")
@handle("cli")
def synth(config_path: Path | None, seed: int | None, out: Path | None):
    """
    Генерирует синтетические наблюдения и смещенный ансамбль прогнозов.
    """
    cfg = _config(config_path, seed)
    out = _data_dir(out, cfg)
    hindcast, obs = generate_dataset(cfg.synth)
    outputs = [str(write_gridpack(hindcast, Path(out, HINDCAST_DIR))), str(write_gridpack(obs, Path(out, OBS_DIR)))]
    logger.info(f"synthetic dataset written to {out}")
    _echo(SynthSummary(
        command="synth",
        outputs=outputs,
        init_times=len(hindcast.init_times),
        members=hindcast.n_members,
        leads=len(hindcast.leads),
        grid=hindcast.grid.shape,
        ocean_cells=hindcast.grid.n_ocean,
    ))


def _resume_state(out: Path, cfg: RunConfig, stage: int) -> tuple[CVAEModel, TrainState] | None:
    if not Path(out, "manifest.json").is_file():
        return None
    loaded = load_checkpoint(out, cfg.architecture)
    state = loaded.train_state(cfg.training)
    if state is None or state.stage != stage:
        return None
    logger.info(f"resuming stage {stage} from epoch {state.next_epoch}")
    return loaded.model, state


def _train_summary(stage: str, model: CVAEModel, result, out: Path) -> TrainSummary:
    return TrainSummary(
        command=stage,
        outputs=[str(out)],
        stage=stage,
        mode=model.mode.value,
        epochs_run=len(result.history.records),
        best_epoch=result.best_epoch,
        best_val=result.best_val,
        finished=result.state.finished,
        checkpoint_id=model.checkpoint_id,
    )


@app.command("pretrain")
@config_option
@seed_option
@data_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Checkpoint directory")
@click.option("--resume/--no-resume", default=True, help="Continue an interrupted run found in --out")
@click.option("--stop-after", type=click.IntRange(min=1), default=None, help="Stop after this many epochs (resume later)")
@handle("cli")
def pretrain(config_path: Path | None, seed: int | None, data_dir: Path | None, out: Path, resume: bool, stop_after: int | None):
    """
    Предобучает детерминированную сеть по MSE и сохраняет контрольную точку.
    """
    cfg = _config(config_path, seed)
    hindcast, obs = _load_data(_data_dir(data_dir, cfg))
    train, val, _ = temporal_split(hindcast, obs, cfg.split)
    resumed = _resume_state(out, cfg, PRETRAIN_STAGE) if resume else None
    if resumed is None:
        model, state = CVAEModel(cfg.architecture, hindcast.grid, seed=cfg.seed, mode=cfg.training.mode), None
    else:
        model, state = resumed
    model.grid.require_same(hindcast.grid)

    result = pretrain_deterministic(
        model, train, val, cfg.training, run_dir=out, state=state,
        on_epoch_end=lambda current: save_checkpoint(model, out, current),
        stop_after=stop_after,
    )
    save_checkpoint(model, out, None if result.state.finished else result.state)
    _echo(_train_summary("pretrain", model, result, out))


@app.command("train")
@config_option
@seed_option
@data_option
@click.option("--checkpoint", type=click.Path(file_okay=False, path_type=Path), required=True, help="Pretrained checkpoint directory")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Trained checkpoint directory")
@click.option("--resume/--no-resume", default=True, help="Continue an interrupted run found in --out")
@click.option("--stop-after", type=click.IntRange(min=1), default=None, help="Stop after this many epochs (resume later)")
@handle("cli")
def train(config_path: Path | None, seed: int | None, data_dir: Path | None, checkpoint: Path, out: Path, resume: bool, stop_after: int | None):
    """
    Обучает cVAE сквозным образом, начиная с предобученной контрольной точки.
    """
    cfg = _config(config_path, seed)
    hindcast, obs = _load_data(_data_dir(data_dir, cfg))
    train_set, val, _ = temporal_split(hindcast, obs, cfg.split)
    resumed = _resume_state(out, cfg, TRAIN_STAGE) if resume else None
    if resumed is None:
        model, state = load_checkpoint(checkpoint, cfg.architecture).model, None
    else:
        model, state = resumed
    model.grid.require_same(hindcast.grid)

    result = train_cvae(
        model, train_set, val, cfg.training, run_dir=out, state=state,
        on_epoch_end=lambda current: save_checkpoint(model, out, current),
        stop_after=stop_after,
    )
    save_checkpoint(model, out, None if result.state.finished else result.state)
    _echo(_train_summary("train", model, result, out))


@app.command("calibrate")
@config_option
@seed_option
@data_option
@workers_option
@click.option("--checkpoint", type=click.Path(file_okay=False, path_type=Path), required=True, help="Trained checkpoint directory")
@click.option("--members", type=click.IntRange(min=1), default=None, help="Ensemble size K used for calibration")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="CalibrationResult JSON file")
@handle("cli")
def calibrate(config_path: Path | None, seed: int | None, data_dir: Path | None, workers: int | None, checkpoint: Path, members: int | None, out: Path):
    """
    Подбирает масштаб априорного распределения на валидационной выборке.
    """
    cfg = _config(config_path, seed)
    hindcast, obs = _load_data(_data_dir(data_dir, cfg))
    _, val, _ = temporal_split(hindcast, obs, cfg.split)
    model = load_checkpoint(checkpoint, cfg.architecture).model
    result = calibrate_prior_scale(
        model, val,
        members=members or cfg.calibration.members,
        candidates=cfg.calibration.candidates,
        root_seed=cfg.calibration.seed,
        workers=workers or settings.SEAICE_WORKERS,
        run_dir=out.parent,
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.model_dump_json(indent=2), encoding="utf-8")
    diagnostics = out.with_suffix(".csv")
    result.to_frame().to_csv(diagnostics, index=False, float_format="%.9g")
    _echo(CommandSummary(command="calibrate", outputs=[str(out), str(diagnostics)]))


def _scale(scale: float | None, calibration: Path | None) -> float:
    if scale is not None:
        return scale
    if calibration is None:
        raise CalibrationError("either --scale or --calibration is required")
    if not calibration.is_file():
        raise MissingInputError(f"calibration file {calibration} does not exist")
    return CalibrationResult.model_validate_json(calibration.read_text(encoding="utf-8")).scale


@app.command("adjust")
@config_option
@seed_option
@data_option
@workers_option
@click.option("--checkpoint", type=click.Path(file_okay=False, path_type=Path), required=True, help="Trained checkpoint directory")
@click.option("--scale", type=click.FloatRange(min=0, min_open=True), default=None, help="Prior std scaling factor s")
@click.option("--calibration", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CalibrationResult JSON providing s")
@click.option("--members", type=click.IntRange(min=1), default=None, help="Ensemble size K")
@click.option("--split", type=click.Choice(["test", "val", "train", "all"]), default="test", help="Initialisation times to adjust")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output GridPack directory")
@handle("cli")
def adjust(config_path, seed, data_dir, workers, checkpoint, scale, calibration, members, split, out):
    """
    Строит ансамбль Nadj из масштабированного априорного распределения.
    """
    cfg = _config(config_path, seed)
    hindcast, obs = _load_data(_data_dir(data_dir, cfg))
    model = load_checkpoint(checkpoint, cfg.architecture).model
    if not model.trained:
        raise UntrainedCheckpointError(f"checkpoint {checkpoint} has not completed training")
    s = _scale(scale, calibration)
    members = members or cfg.evaluation.members
    ensemble = nadj_adjust(model, _select(hindcast, obs, cfg, split), s, members, cfg.calibration.seed, workers or settings.SEAICE_WORKERS)
    write_gridpack(ensemble, out)
    _echo(AdjustSummary(command="adjust", outputs=[str(out)], role=RoleTag.adjusted, members=members, init_times=len(ensemble.init_times), scale=s))


@app.command("badj")
@config_option
@data_option
@click.option("--split", type=click.Choice(["test", "val", "train", "all"]), default="test", help="Initialisation times to adjust")
@click.option("--no-clamp", is_flag=True, default=False, help="Keep values outside [0, 1]")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output GridPack directory")
@handle("cli")
def badj(config_path, data_dir, split, no_clamp, out):
    """
    Климатологическая коррекция среднего по обучающему периоду.
    """
    cfg = _config(config_path, None)
    hindcast, obs = _load_data(_data_dir(data_dir, cfg))
    train_set, _, _ = temporal_split(hindcast, obs, cfg.split)
    clim = fit_climatology(train_set)
    ensemble = badj_adjust(_select(hindcast, obs, cfg, split), clim, clamp=not no_clamp)
    write_gridpack(ensemble, out)
    _echo(AdjustSummary(command="badj", outputs=[str(out)], role=RoleTag.badj, members=ensemble.n_members, init_times=len(ensemble.init_times)))


def _read_packs(packs: tuple[Path, ...]) -> dict[str, HindcastSet]:
    if not packs:
        raise MissingInputError("at least one --pack is required")
    result = {}
    for name, path in zip(_pack_names(packs), packs):
        pack = read_gridpack(path)
        if not isinstance(pack, HindcastSet):
            raise MissingInputError(f"{path} is an observation pack, not an ensemble")
        result[name] = pack
    return result


def _fair_members(packs: dict[str, HindcastSet], requested: int) -> int:
    """
    Общий размер ансамбля для сравнения: не больше наименьшего ансамбля.
    """
    smallest = min(pack.n_members for pack in packs.values())
    if smallest < requested:
        logger.warning(f"comparing with M={smallest}: smallest pack has fewer than the requested {requested} members")
    return min(smallest, requested)


pack_option = click.option("--pack", "packs", multiple=True, type=click.Path(file_okay=False, path_type=Path), help="Ensemble GridPack (repeatable)")


@app.command("evaluate")
@config_option
@data_option
@pack_option
@click.option("--members", type=click.IntRange(min=1), default=None, help="Ensemble size M for every pack")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output directory for metric CSVs")
@handle("cli")
def evaluate(config_path, data_dir, packs, members, out):
    """
    Полный набор метрик для каждого ансамбля при одинаковом числе участников.
    """
    cfg = _config(config_path, None)
    _, obs = _load_data(_data_dir(data_dir, cfg))
    loaded = _read_packs(packs)
    evaluation = cfg.evaluation.model_copy(update=dict(members=_fair_members(loaded, members or cfg.evaluation.members)))
    outputs, crps = [], {}
    for name, pack in loaded.items():
        pack = pack.with_members(evaluation.members)
        pack_obs = _aligned_obs(pack, obs)
        series = evaluate_suite(pack, pack_obs, evaluation)
        crps[name] = next(item.values for item in series if item.name == "crps")
        outputs.append(str(export_metrics(series, Path(out, f"{name}_metrics.csv"))))
        ranks = rank_histogram_cdf(pack, pack_obs, True, evaluation.rank_seed, evaluation.marginal_lo, evaluation.marginal_hi)
        outputs.append(str(export_rank_histograms(ranks, Path(out, f"{name}_rank.csv"))))
        try:
            quantiles = qq_quantiles(pack, pack_obs, True, evaluation.marginal_lo, evaluation.marginal_hi)
            outputs.append(str(export_quantiles(quantiles, Path(out, f"{name}_qq.csv"))))
        except MetricError as error:
            logger.warning(f"{name}: QQ quantiles skipped: {error}")
    _echo(EvaluateSummary(command="evaluate", outputs=outputs, packs=list(crps), members=evaluation.members, crps=crps))


@app.command("rapsd")
@config_option
@data_option
@pack_option
@click.option("--month", type=click.IntRange(1, 12), required=True, help="Calendar month the forecasts verify in")
@click.option("--lead", type=click.IntRange(min=1), required=True, help="Lead month")
@click.option("--members", type=click.IntRange(min=1), default=None, help="Ensemble size M for every pack")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output JSON file")
@handle("cli")
def rapsd(config_path, data_dir, packs, month, lead, members, out):
    """
    Отношение RAPSD прогноза к RAPSD наблюдений с диапазоном по участникам.
    """
    cfg = _config(config_path, None)
    _, obs = _load_data(_data_dir(data_dir, cfg))
    loaded = _read_packs(packs)
    members = _fair_members(loaded, members or cfg.evaluation.members)
    ratios = {}
    for name, pack in loaded.items():
        pack = pack.with_members(members)
        ratios[name] = rapsd_ratio(pack, _aligned_obs(pack, obs), month, lead)
        logger.info(f"{name}: high-frequency RAPSD ratio {ratios[name].high_frequency_mean():.4f}")
    _echo(CommandSummary(command="rapsd", outputs=[str(export_spectra(ratios, out))]))


@app.command("report")
@config_option
@data_option
@pack_option
@click.option("--reference", default=None, help="Pack name used as the CRPS improvement reference (default: last pack)")
@click.option("--members", type=click.IntRange(min=1), default=None, help="Ensemble size M for every pack")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output CSV file")
@handle("cli")
def report(config_path, data_dir, packs, reference, members, out):
    """
    Сводная таблица метрик по заблаговременностям для всех ансамблей.
    """
    cfg = _config(config_path, None)
    _, obs = _load_data(_data_dir(data_dir, cfg))
    loaded = _read_packs(packs)
    evaluation = cfg.evaluation.model_copy(update=dict(members=_fair_members(loaded, members or cfg.evaluation.members)))
    loaded = {name: pack.with_members(evaluation.members) for name, pack in loaded.items()}
    init_times = {pack.init_times for pack in loaded.values()}
    if len(init_times) != 1:
        raise GridMismatchError("packs in one report must cover the same initialisation times")
    first = next(iter(loaded.values()))
    table = build_report(loaded, _aligned_obs(first, obs), evaluation, reference)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, float_format="%.9g")
    _echo(CommandSummary(command="report", outputs=[str(out)]))
