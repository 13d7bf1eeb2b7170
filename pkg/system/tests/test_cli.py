import json

import pandas as pd

from analysis.odgen import build_zero_mask
from core.demand import ODMatrix
from core.demand_io import load_sensor_flows, save_od
from core.network_io import load_network
from system.main import main


def _fast_config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps({"TRAIN": {"epochs": 3, "batch_size": 8}, "NN": {"hidden_dim": 12}}), encoding="utf-8")
    return str(path)


def test_full_cli_chain(tmp_path, capsys):
    net_path = str(tmp_path / "net.json")
    obs_path = str(tmp_path / "obs.csv")
    ds_path = str(tmp_path / "dataset.csv")
    cfg = _fast_config(tmp_path)

    assert main(["gen-network", "--kind", "demo", "--out", net_path]) == 0
    assert main(["--seed", "3", "gen-obs", "--network", net_path, "--days", "1", "--out", obs_path]) == 0
    assert main(["gen-od", "--network", net_path, "--obs", obs_path, "--hour", "17", "--expect-feasible",
                 "--out-dir", str(tmp_path / "od")]) == 0
    assert (tmp_path / "od" / "od_hour_0017.csv").exists()
    assert main(["build-dataset", "--network", net_path, "--obs", obs_path, "--expect-feasible", "--out", ds_path]) == 0

    model_a, model_b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["--seed", "7", "--config", cfg, "train", "--dataset", ds_path, "--out", model_a]) == 0
    assert main(["--seed", "7", "--config", cfg, "train", "--dataset", ds_path, "--out", model_b]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert json.loads((tmp_path / "a.json").read_text(encoding="utf-8"))["seed"] == 7

    capsys.readouterr()
    assert main(["eval-nn", "--dataset", ds_path, "--model", model_a]) == 0
    assert "rRMSE_NN=" in capsys.readouterr().out

    out_dir = tmp_path / "reports"
    assert main(["eval-loop", "--network", net_path, "--dataset", ds_path, "--model", "oracle",
                 "--day", "0", "--out-dir", str(out_dir)]) == 0
    frame = pd.read_csv(out_dir / "metrics.csv", dtype={"hour": str})
    assert len(frame) == 26
    assert (frame["rrmse_t"].iloc[:24] < 1.0).all()
    assert (out_dir / "report.md").read_text(encoding="utf-8").startswith("# 📊")


def test_run_dta_zero_od(tmp_path):
    net_path = str(tmp_path / "net.json")
    assert main(["gen-network", "--kind", "demo", "--out", net_path]) == 0
    net = load_network(net_path)
    od_path = save_od(ODMatrix.zeros(build_zero_mask(net.zones)), str(tmp_path / "zero.csv"))
    flows_path = str(tmp_path / "flows.csv")
    assert main(["run-dta", "--network", net_path, "--od", od_path, "--out", flows_path]) == 0
    flows, meta = load_sensor_flows(flows_path)
    assert flows.tolist() == [0.0] * net.n_sensors
    assert meta["converged"] == "True"


def test_scenario_command(tmp_path, capsys, demo_od):
    net_path = str(tmp_path / "net.json")
    main(["gen-network", "--kind", "demo", "--out", net_path])
    scenario = tmp_path / "closure.json"
    scenario.write_text(json.dumps({"kind": "lane_closure", "targets": [1], "capacity_factor": 0.5}), encoding="utf-8")
    od_path = save_od(demo_od, str(tmp_path / "od.csv"))
    out = str(tmp_path / "closed.json")
    capsys.readouterr()
    assert main(["scenario", "--network", net_path, "--scenario", str(scenario), "--od", od_path, "--out", out]) == 0
    assert load_network(out).links[1].capacity == 900.0
    assert "mean_route_cost" in capsys.readouterr().out


def test_bad_input_exits_with_error(tmp_path, capsys):
    code = main(["run-dta", "--network", str(tmp_path / "missing.json"), "--od", "x.csv", "--out", "y.csv"])
    assert code == 1
    assert "ошибка" in capsys.readouterr().err

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert main(["run-dta", "--network", str(broken), "--od", "x.csv", "--out", "y.csv"]) == 1
