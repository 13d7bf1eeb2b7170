import time

import numpy as np
import pytest

from analysis.odgen import (
    ODGenerator, assemble_constraints, build_zero_mask, is_structural_zero, solve_feasible_od, solve_nnls,
)
from analysis.synthetic import LAX_CLASS_COUNTS, observations_from_od
from core.demand import FlowObservation, ODMatrix, TOTAL
from infra.error_handler import AssemblyError, ConvergenceError


LAX_CLASSES = [cls for cls, count in LAX_CLASS_COUNTS for _ in range(count)]


# ---------- Маска ----------

def test_zero_rules():
    assert is_structural_zero("Z1", "Z5", same_zone=True)
    assert all(is_structural_zero("Z2", c) for c in ("Z1", "Z4", "Z5", "Z7"))
    assert is_structural_zero("Z5", "Z1")               # во въезды спроса нет
    assert is_structural_zero("Z1", "Z2")               # транзит
    assert is_structural_zero("Z1", "Z6")
    assert is_structural_zero("Z3", "Z5")
    assert is_structural_zero("Z7", "Z5")
    assert not is_structural_zero("Z1", "Z7")
    assert not is_structural_zero("Z7", "Z4")
    assert not is_structural_zero("Z6", "Z4")


def test_lax_scale_mask_has_161_free_entries():
    mask = build_zero_mask(LAX_CLASSES)
    assert mask.shape == (32, 32)
    assert int((~mask).sum()) == 161


def test_demo_mask(demo_net):
    mask = build_zero_mask(demo_net.zones)
    free = sorted(zip(*np.nonzero(~mask)))
    assert free == [(0, 4), (0, 6), (2, 5), (2, 6), (4, 1), (5, 3), (6, 1), (6, 3)]


# ---------- Система ограничений ----------

def test_demo_constraint_rows(demo_net, demo_od):
    obs = observations_from_od(demo_net, demo_od)
    system = assemble_constraints(demo_net.zones, obs, demo_od.mask)
    assert system.shape == (8, 8)
    assert [t.kind for t in system.row_tags] == ["entrance_total", "entrance_total", "exit_total", "exit_total",
                                                 "parking_in_ul", "parking_in_ll", "parking_out_ul", "parking_out_ll"]
    assert np.all(system.A.sum(axis=1) >= 1)
    assert np.allclose(system.A @ demo_od.to_vector(), system.b)


def test_entrance_row_sums_its_row(demo_net):
    mask = build_zero_mask(demo_net.zones)
    obs = FlowObservation(q={(0, TOTAL): 100.0, (1, TOTAL): 0.0, (2, TOTAL): 0.0, (3, TOTAL): 0.0,
                             (6, "in_ul"): 0.0, (6, "in_ll"): 0.0, (6, "out_ul"): 0.0, (6, "out_ll"): 0.0})
    system = assemble_constraints(demo_net.zones, obs, mask)
    row = system.A[0]
    cols = [system.pairs[k] for k in np.nonzero(row)[0]]
    assert cols == [(0, 4), (0, 6)]
    assert system.b[0] == 100.0


def test_zero_observation_gives_zero_od(demo_net):
    obs = observations_from_od(demo_net, ODMatrix.zeros(build_zero_mask(demo_net.zones)))
    solution = ODGenerator().generate(demo_net, obs, expect_feasible=True)
    assert solution.objective == 0.0
    assert solution.od.total() == 0.0


def test_missing_observation_names_zone(demo_net):
    # въезды (0, 2) заданы, первым не хватает выезда 1
    obs = FlowObservation(q={(0, TOTAL): 10.0, (2, TOTAL): 5.0})
    with pytest.raises(AssemblyError, match=r"zone_id=1 \(Z2, total\)"):
        assemble_constraints(demo_net.zones, obs, build_zero_mask(demo_net.zones))


# ---------- NNLS ----------

def test_identity_system():
    x, obj, _, _, _ = solve_nnls(np.eye(2), np.array([3.0, 5.0]))
    assert np.allclose(x, [3.0, 5.0], atol=1e-9)
    assert obj < 1e-12


def test_sign_conflict_projects_to_zero():
    x, obj, _, _, _ = solve_nnls(np.array([[1.0]]), np.array([-2.0]))
    assert x.tolist() == [0.0]
    assert obj == pytest.approx(4.0)
    grid = np.arange(0, 5.001, 0.001)
    assert obj <= ((grid + 2.0) ** 2).min() + 1e-12


def test_objective_trace_is_monotone():
    rng = np.random.default_rng(3)
    A = (rng.random((6, 10)) < 0.4).astype(float)
    A[np.arange(6), np.arange(6)] = 1.0
    b = rng.random(6) * 100 - 20
    _, _, _, _, trace = solve_nnls(A, b)
    assert all(later <= earlier + 1e-9 for earlier, later in zip(trace, trace[1:]))


def test_randomized_feasible_fixtures(demo_net):
    mask = build_zero_mask(demo_net.zones)
    rng = np.random.default_rng(0)
    started = time.time()
    for trial in range(100):
        d_star = rng.random(int((~mask).sum())) * 400 * (rng.random() < 0.95)
        od_star = ODMatrix.from_vector(d_star, mask, hour_index=trial)
        obs = observations_from_od(demo_net, od_star)
        system = assemble_constraints(demo_net.zones, obs, mask)
        solution = solve_feasible_od(system, mask, hour_index=trial, expect_feasible=True)
        assert solution.od.demand.min() >= 0.0
        assert np.all(solution.od.demand[mask] == 0.0)
        assert solution.objective <= 1e-6 * float(system.b @ system.b) + 1e-12
    assert time.time() - started < 10


def test_lax_scale_feasible_fixture():
    from analysis.synthetic import SyntheticDemandProfile, generate_lax_network, generate_synthetic_demand

    net = generate_lax_network()
    profile = SyntheticDemandProfile.from_settings(net, days=1)
    od_star = generate_synthetic_demand(net, profile)[17]
    solution = ODGenerator().generate(net, observations_from_od(net, od_star), expect_feasible=True)
    assert solution.od.n_free == 161
    assert solution.od.demand.min() >= 0.0


def test_infeasible_system_raises_when_feasibility_expected(demo_net):
    mask = build_zero_mask(demo_net.zones)
    q = {(0, TOTAL): 100.0, (1, TOTAL): 0.0, (2, TOTAL): 0.0, (3, TOTAL): 0.0,
         (6, "in_ul"): 500.0, (6, "in_ll"): 0.0, (6, "out_ul"): 0.0, (6, "out_ll"): 0.0}
    system = assemble_constraints(demo_net.zones, FlowObservation(q=q), mask)
    with pytest.raises(ConvergenceError) as info:
        solve_feasible_od(system, mask, expect_feasible=True)
    assert info.value.residual > 0
    # без флага решение возвращается с ненулевой невязкой
    assert solve_feasible_od(system, mask).objective > 0
