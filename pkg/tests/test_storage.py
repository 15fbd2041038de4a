import json

import numpy as np
import pandas as pd
import pytest

from benchmark import badj_adjust, fit_climatology
from configuration.run_config import ArchitectureConfig
from grid.enums import RoleTag
from metrics import MetricSeries, RankHistogram, SpectrumRatio
from storage import (
    export_metrics,
    export_rank_histograms,
    export_spectra,
    import_metrics,
    load_checkpoint,
    read_gridpack,
    save_checkpoint,
    write_gridpack,
)
from training import pretrain_deterministic
from utils.exceptions import ChecksumError, CheckpointMismatchError, GridPackFormatError, MissingInputError


def test_hindcast_and_obs_round_trip(dataset, tmp_path):
    hindcast, obs = dataset
    write_gridpack(hindcast, tmp_path / "hindcast")
    write_gridpack(obs, tmp_path / "obs")
    loaded = read_gridpack(tmp_path / "hindcast")
    loaded_obs = read_gridpack(tmp_path / "obs")
    assert loaded.role == RoleTag.hindcast and loaded_obs.role == RoleTag.obs
    assert loaded.grid.same_as(hindcast.grid)
    assert loaded.init_times == hindcast.init_times and loaded.leads == hindcast.leads
    np.testing.assert_array_equal(loaded.values, hindcast.values)
    np.testing.assert_array_equal(loaded_obs.values, obs.values)
    manifest = json.loads((tmp_path / "hindcast" / "manifest.json").read_text())
    assert manifest["index_order"] == "t,k,l,y,x"
    assert manifest["dims"]["members"] == 4
    assert manifest["files"]["values.f32"]["dtype"] == "<f4"


def test_adjusted_ensemble_keeps_provenance(dataset, tmp_path):
    hindcast, obs = dataset
    adjusted = badj_adjust(hindcast, fit_climatology(hindcast, obs))
    write_gridpack(adjusted, tmp_path / "badj")
    loaded = read_gridpack(tmp_path / "badj")
    assert loaded.role == RoleTag.badj
    assert loaded.provenance.notes == adjusted.provenance.notes
    assert loaded.provenance.clamped


def test_corrupted_values_fail_checksum(dataset, tmp_path):
    path = write_gridpack(dataset[1], tmp_path / "obs")
    data = bytearray((path / "values.f32").read_bytes())
    data[100] ^= 0xFF
    (path / "values.f32").write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        read_gridpack(path)


def test_truncated_values_are_a_format_error(dataset, tmp_path):
    path = write_gridpack(dataset[1], tmp_path / "obs")
    data = (path / "values.f32").read_bytes()
    (path / "values.f32").write_bytes(data[:-4])
    with pytest.raises(GridPackFormatError):
        read_gridpack(path)


def test_bad_manifests(dataset, tmp_path):
    with pytest.raises(MissingInputError):
        read_gridpack(tmp_path / "nothing")
    path = write_gridpack(dataset[1], tmp_path / "obs")
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["format_version"] = 2
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(GridPackFormatError):
        read_gridpack(path)
    (path / "manifest.json").write_text("{not json")
    with pytest.raises(GridPackFormatError):
        read_gridpack(path)


def test_checkpoint_round_trip(toy_model, tmp_path):
    toy_model.pretrained = True
    save_checkpoint(toy_model, tmp_path / "ckpt")
    assert toy_model.checkpoint_id is not None
    loaded = load_checkpoint(tmp_path / "ckpt", toy_model.arch)
    assert loaded.model.checkpoint_id == toy_model.checkpoint_id
    assert loaded.model.pretrained and not loaded.model.trained
    assert loaded.model.mode == toy_model.mode
    assert loaded.model.grid.same_as(toy_model.grid)
    assert loaded.train_state(None) is None
    original = toy_model.state_dict()
    for name, value in loaded.model.state_dict().items():
        np.testing.assert_array_equal(value, original[name])


def test_checkpoint_rejects_other_architecture(toy_model, tmp_path):
    save_checkpoint(toy_model, tmp_path / "ckpt")
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(tmp_path / "ckpt", ArchitectureConfig(widths=[2, 3, 3, 4, 4], latent_dim=4))


def test_tampered_parameters_fail_digest(toy_model, tmp_path):
    path = save_checkpoint(toy_model, tmp_path / "ckpt")
    with np.load(path / "params.npz") as archive:
        params = {name: archive[name] for name in archive.files}
    name = sorted(params)[0]
    params[name] = params[name] + 1e-3
    np.savez(path / "params.npz", **params)
    with pytest.raises(ChecksumError):
        load_checkpoint(path)


def test_training_state_survives_checkpoint(toy_model, samples, train_cfg, tmp_path):
    train, val, _ = samples
    result = pretrain_deterministic(toy_model, train, val, train_cfg, stop_after=1)
    save_checkpoint(toy_model, tmp_path / "ckpt", state=result.state)
    loaded = load_checkpoint(tmp_path / "ckpt")
    state = loaded.train_state(train_cfg)
    assert state.next_epoch == 1
    assert not state.finished
    assert state.history == result.state.history
    assert state.optim.step == result.state.optim.step
    for name, moment in result.state.optim.m.items():
        np.testing.assert_array_equal(state.optim.m[name], moment)
    for name, value in result.state.best_params.items():
        np.testing.assert_array_equal(state.best_params[name], value)


def test_metrics_csv_round_trip_with_missing_values(tmp_path):
    series = [
        MetricSeries(name="crps", leads=(1, 2), values=[0.125, 0.25], members=10),
        MetricSeries(name="acc_sia", leads=(1, 2), values=[float("nan"), 0.5], members=10, protocol="time_statistic_of_domain_integral"),
    ]
    loaded = import_metrics(export_metrics(series, tmp_path / "metrics.csv"))
    assert [item.name for item in loaded] == ["crps", "acc_sia"]
    assert loaded[0].values == [0.125, 0.25]
    assert np.isnan(loaded[1].values[0]) and loaded[1].values[1] == 0.5
    assert loaded[1].protocol == "time_statistic_of_domain_integral"
    assert loaded[0].leads == (1, 2)

    from_json = import_metrics(export_metrics(series, tmp_path / "metrics.json", format="json"))
    assert from_json[0] == series[0]


def test_metrics_import_errors(tmp_path):
    with pytest.raises(MissingInputError):
        import_metrics(tmp_path / "absent.csv")
    pd.DataFrame({"a": [1]}).to_csv(tmp_path / "bad.csv", index=False)
    with pytest.raises(GridPackFormatError):
        import_metrics(tmp_path / "bad.csv")


def test_spectra_and_rank_histogram_exports(tmp_path):
    ratio = SpectrumRatio(
        rings=np.arange(3),
        ratio=np.array([1.0, np.nan, 0.5]),
        member_min=np.array([0.9, np.nan, 0.4]),
        member_max=np.array([1.1, np.nan, 0.6]),
        target_month=9,
        lead=2,
        n_times=4,
    )
    payload = json.loads(export_spectra({"nadj": ratio}, tmp_path / "rapsd.json").read_text())
    assert payload["nadj"]["ratio"] == [1.0, None, 0.5]
    assert payload["nadj"]["target_month"] == 9

    histogram = RankHistogram(lead=1, counts=np.array([1.0, 2.0, 1.0]), cdf=np.array([0.25, 0.75, 1.0]), n_ranks=4)
    frame = pd.read_csv(export_rank_histograms([histogram], tmp_path / "ranks.csv"))
    assert list(frame["rank"]) == [0, 1, 2]
    assert list(frame["cdf"]) == [0.25, 0.75, 1.0]
