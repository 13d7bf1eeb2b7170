import json

import pytest

from analysis.dta import DtaParams, run_dta
from analysis.scenario import (
    CURBSIDE_RESTRICTION, LANE_CLOSURE, ScenarioTransform, apply_scenario, load_scenario,
)
from core.network import bpr_time
from infra.error_handler import ScenarioError


def test_identity_transform_keeps_network(demo_net):
    same = apply_scenario(demo_net, ScenarioTransform(LANE_CLOSURE, (1, 2)))
    assert same == demo_net
    assert same is not demo_net


def test_lane_closure_raises_bpr_time(demo_net):
    closed = apply_scenario(demo_net, ScenarioTransform(LANE_CLOSURE, (1,), capacity_factor=0.5))
    before, after = demo_net.links[1], closed.links[1]
    assert after.capacity == before.capacity / 2
    assert demo_net.links[1].capacity == 1800.0
    for v in (10.0, 500.0, 2000.0):
        assert bpr_time(after.free_flow_time, v, after.capacity) > bpr_time(before.free_flow_time, v, before.capacity)


def test_lane_closure_effect_on_assignment(demo_net, demo_od):
    params = DtaParams()
    base = run_dta(demo_net, demo_od, params)
    closed_net = apply_scenario(demo_net, ScenarioTransform(LANE_CLOSURE, (1,), capacity_factor=0.5))
    closed = run_dta(closed_net, demo_od, params)
    assert closed.link_travel_times[1] > base.link_travel_times[1]
    assert closed.mean_route_cost >= base.mean_route_cost


def test_curbside_restriction(demo_net):
    restricted = apply_scenario(demo_net, ScenarioTransform(CURBSIDE_RESTRICTION, (6, 14), 0.8, 3.0))
    assert restricted.links[6].financial_cost == pytest.approx(5.0)
    assert restricted.links[14].capacity == pytest.approx(720.0)
    assert restricted.links[7].financial_cost == 0.0


def test_invalid_transforms(demo_net):
    with pytest.raises(ScenarioError, match=r"\[99\]"):
        apply_scenario(demo_net, ScenarioTransform(LANE_CLOSURE, (1, 99), 0.5))
    with pytest.raises(ScenarioError):
        ScenarioTransform(LANE_CLOSURE, (1,), capacity_factor=0.0)
    with pytest.raises(ScenarioError):
        ScenarioTransform(CURBSIDE_RESTRICTION, (6,), extra_dwell_cost=-1.0)
    with pytest.raises(ScenarioError):
        ScenarioTransform("flood", (1,))
    with pytest.raises(ScenarioError):
        ScenarioTransform(LANE_CLOSURE, ())


def test_scenario_file(tmp_path):
    path = tmp_path / "closure.json"
    path.write_text(json.dumps({"kind": "lane_closure", "targets": [1], "capacity_factor": 0.5}), encoding="utf-8")
    transform = load_scenario(str(path))
    assert transform == ScenarioTransform(LANE_CLOSURE, (1,), 0.5, 0.0)
    path.write_text(json.dumps({"kind": "lane_closure"}), encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))
