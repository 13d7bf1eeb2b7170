import json

import numpy as np
import pytest

from analysis.neural import Dataset
from analysis.odgen import build_zero_mask
from core.demand import FlowObservation, ODMatrix
from core.demand_io import (
    load_dataset, load_observations, load_od, load_sensor_flows, save_dataset, save_observations, save_od,
    save_sensor_flows,
)
from core.utils import chronological_split, to_float
from infra.error_handler import ConfigError, DataFormatError, ShapeMismatchError
from system import config


def test_od_file_round_trip(tmp_path, demo_od):
    path = save_od(demo_od, str(tmp_path / "od.csv"))
    loaded = load_od(path, demo_od.mask)
    assert loaded.hour_index == 17
    assert np.array_equal(loaded.demand, demo_od.demand)


def test_od_file_must_cover_free_entries(tmp_path, demo_od):
    path = tmp_path / "od.csv"
    save_od(demo_od, str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="покрыто 7"):
        load_od(str(path), demo_od.mask)


def test_od_file_rejects_structural_zero(tmp_path, demo_od):
    path = tmp_path / "od.csv"
    path.write_text("# hour_index=0\n# zones=7\norigin_zone,dest_zone,demand\n1,0,5\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="структурным нулём"):
        load_od(str(path), demo_od.mask)


def test_od_matrix_invariants(demo_od):
    mask = demo_od.mask
    bad = demo_od.demand.copy()
    bad[1, 0] = 3.0
    with pytest.raises(DataFormatError):
        ODMatrix(demand=bad, mask=mask)
    neg = demo_od.demand.copy()
    neg[0, 4] = -1.0
    with pytest.raises(DataFormatError):
        ODMatrix(demand=neg, mask=mask)
    with pytest.raises(ShapeMismatchError):
        ODMatrix.from_vector(np.ones(5), mask)
    vec = demo_od.to_vector()
    assert vec.shape == (8,)
    assert np.array_equal(ODMatrix.from_vector(vec, mask).demand, demo_od.demand)


def test_observations_round_trip(tmp_path):
    obs = [
        FlowObservation(q={(0, "total"): 500.0, (6, "in_ul"): 200.0, (6, "out_ll"): 110.0}, hour_index=0),
        FlowObservation(q={(0, "total"): 250.0, (6, "in_ul"): 50.0, (6, "out_ll"): 0.0}, hour_index=1),
    ]
    path = save_observations(obs, str(tmp_path / "obs.csv"))
    loaded = load_observations(path)
    assert [o.hour_index for o in loaded] == [0, 1]
    assert loaded[0].q == obs[0].q
    assert loaded[1].get(6, "out_ll") == 0.0


def test_observation_rejects_negative_flow():
    with pytest.raises(DataFormatError, match="zone_id=3"):
        FlowObservation(q={(3, "total"): -1.0})


def test_observations_unknown_level(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("hour,zone,level,flow\n0,6,middle,5\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="middle"):
        load_observations(str(path))


def test_sensor_flow_file(tmp_path):
    path = save_sensor_flows(np.array([0.0, 250.0, 250.0]), str(tmp_path / "flows.csv"),
                             {"iterations": 3, "converged": True})
    flows, meta = load_sensor_flows(path)
    assert flows.tolist() == [0.0, 250.0, 250.0]
    assert meta == {"iterations": "3", "converged": "True"}


def test_dataset_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ds = Dataset(inputs=rng.random((10, 4)) * 100, targets=rng.random((10, 3)) * 50,
                 train_idx=np.arange(8), test_idx=np.arange(8, 10), hours=np.arange(10))
    loaded = load_dataset(save_dataset(ds, str(tmp_path / "ds.csv")))
    assert np.allclose(loaded.inputs, ds.inputs, rtol=0, atol=1e-9)
    assert np.allclose(loaded.targets, ds.targets, rtol=0, atol=1e-9)
    assert loaded.train_idx.tolist() == list(range(8))
    assert loaded.test_idx.tolist() == [8, 9]


def test_dataset_rejects_overlapping_split():
    with pytest.raises(DataFormatError):
        Dataset(inputs=np.zeros((3, 2)), targets=np.zeros((3, 1)), train_idx=[0, 1], test_idx=[1, 2])


# ---------- Конфиг и утилиты ----------

def test_settings_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"DTA": {"eta": 2.5}, "train": {"epochs": 3}}), encoding="utf-8")
    settings = config.load_settings(str(path))
    assert settings["DTA"]["eta"] == 2.5
    assert settings["TRAIN"]["epochs"] == 3
    assert config.DTA["eta"] == 1.0


def test_settings_unknown_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"DTA": {"speed": 1}}), encoding="utf-8")
    with pytest.raises(ConfigError, match="DTA.speed"):
        config.load_settings(str(path))


def test_chronological_split_and_numbers():
    split = chronological_split(720, 5 / 6)
    assert (len(split["train"]), len(split["test"])) == (600, 120)
    split = chronological_split(10, 5 / 6)
    assert (len(split["train"]), len(split["test"])) == (8, 2)
    assert to_float("1 234,5") == 1234.5


def test_demo_mask_matches_od_fixture(demo_od, demo_net):
    assert np.array_equal(build_zero_mask(demo_net.zones), demo_od.mask)
