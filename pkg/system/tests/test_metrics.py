import math

import numpy as np
import pytest

from analysis.metrics import (
    HIGH, LOW, MEDIUM, REPORT_COLUMNS, FlowComparison, build_metrics_report, classify_flow, error_stats, flow_errors,
    group_sensors, grouped_rrmse,
)
from infra.error_handler import DataFormatError, ShapeMismatchError


# ---------- Ошибки ----------

def test_flow_error_examples():
    report = flow_errors(FlowComparison(real=[100.0, 300.0], predicted=[110.0, 290.0]))
    assert report.mse == pytest.approx(100.0)
    assert report.rmse == pytest.approx(10.0)
    assert report.rrmse == pytest.approx(5.0)
    same = flow_errors(FlowComparison(real=[5.0, 7.0], predicted=[5.0, 7.0]))
    assert (same.mse, same.rmse, same.rrmse) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("mse,rmse,rrmse", [(7661.56, 87.53, 36.08), (7888.82, 88.82, 34.21)])
def test_hourly_table_rows_are_consistent(mse, rmse, rrmse):
    # реальный поток постоянен, ошибка ±√mse; среднее подобрано под rRMSE строки
    mean = math.sqrt(mse) / (rrmse / 100.0)
    real = np.full(4, mean)
    predicted = real + math.sqrt(mse) * np.array([1.0, -1.0, 1.0, -1.0])
    report = error_stats(real, predicted)
    assert round(report.rmse, 2) == rmse
    assert round(report.rrmse, 2) == rrmse
    assert report.rmse ** 2 == pytest.approx(report.mse, rel=1e-9)


def test_zero_mean_reference():
    report = error_stats(np.zeros(3), np.ones(3))
    assert report.mse == 1.0
    assert not report.rrmse_defined
    assert report.note


def test_scale_invariance_of_rrmse():
    rng = np.random.default_rng(4)
    real = rng.uniform(1, 500, size=20)
    pred = rng.uniform(1, 500, size=20)
    base = error_stats(real, pred)
    for k in (0.1, 3.0, 250.0):
        scaled = error_stats(real * k, pred * k)
        assert scaled.rrmse == pytest.approx(base.rrmse, rel=1e-9)
        assert scaled.mse == pytest.approx(base.mse * k * k, rel=1e-9)


def test_comparison_validation():
    with pytest.raises(ShapeMismatchError):
        FlowComparison(real=[1.0, 2.0], predicted=[1.0])
    with pytest.raises(DataFormatError):
        FlowComparison(real=[1.0, -2.0], predicted=[1.0, 2.0])
    with pytest.raises(DataFormatError):
        FlowComparison(real=[1.0, 2.0], predicted=[1.0, np.inf])


# ---------- Группы ----------

def test_group_boundaries():
    assert classify_flow(36.0, (36.0, 175.5)) == LOW
    assert classify_flow(36.5, (36.0, 175.5)) == MEDIUM
    assert classify_flow(175.5, (36.0, 175.5)) == MEDIUM
    assert classify_flow(175.6, (36.0, 175.5)) == HIGH
    grouping = group_sensors({0: [36.0] * 24, 1: [36.5] * 24, 2: [10, 20, 200, 300], 3: [400.0, 500.0]})
    assert grouping.assignment == {0: LOW, 1: MEDIUM, 2: MEDIUM, 3: HIGH}
    assert grouping.medians[2] == 110.0
    assert grouping.sizes() == {LOW: 1, MEDIUM: 2, HIGH: 1}


def test_group_from_array_and_errors():
    flows = np.array([[10.0, 100.0], [20.0, 300.0], [30.0, 200.0]])
    grouping = group_sensors(flows)
    assert grouping.assignment == {0: LOW, 1: HIGH}
    assert grouping.medians == {0: 20.0, 1: 200.0}
    with pytest.raises(DataFormatError, match="sensor_id=4"):
        group_sensors({4: []})
    with pytest.raises(DataFormatError):
        group_sensors(flows, thresholds=(200.0, 100.0))


def test_grouped_rrmse_hand_fixture():
    grouping = group_sensors({0: [10.0], 1: [30.0], 2: [300.0], 3: [500.0]})
    cmp = FlowComparison(real=[10.0, 30.0, 300.0, 500.0], predicted=[10.0, 20.0, 300.0, 500.0])
    result = grouped_rrmse(cmp, grouping)
    # low: ошибки (0, 10), среднее 20 → RMSE √50, rRMSE ≈ 35.36%
    assert result[LOW].rrmse == pytest.approx(math.sqrt(50) / 20 * 100)
    assert result[MEDIUM] is None
    assert result[HIGH].rrmse == 0.0


def test_single_group_equals_ungrouped():
    grouping = group_sensors({s: [100.0] for s in range(3)})
    cmp = FlowComparison(real=[90.0, 100.0, 120.0], predicted=[80.0, 100.0, 130.0])
    assert grouped_rrmse(cmp, grouping)[MEDIUM].rrmse == pytest.approx(flow_errors(cmp).rrmse)


def test_mse_decomposes_over_groups():
    rng = np.random.default_rng(8)
    real = rng.uniform(0, 400, size=12)
    pred = rng.uniform(0, 400, size=12)
    grouping = group_sensors({s: [v] for s, v in enumerate(real)})
    cmp = FlowComparison(real=real, predicted=pred)
    parts = grouped_rrmse(cmp, grouping)
    weighted = sum(r.mse * len(grouping.members(g)) for g, r in parts.items() if r is not None)
    assert weighted / 12 == pytest.approx(flow_errors(cmp).mse)


def test_zero_mean_group_is_reported_as_nan():
    grouping = group_sensors({0: [0.0], 1: [200.0]})
    result = grouped_rrmse(FlowComparison(real=[0.0, 200.0], predicted=[3.0, 190.0]), grouping)
    assert math.isnan(result[LOW].rrmse)
    assert result[HIGH].rrmse == pytest.approx(5.0)


# ---------- Отчёт ----------

def test_metrics_report_rows():
    real = np.array([[100.0, 300.0, 10.0], [200.0, 400.0, 20.0]])
    pred = np.array([[110.0, 290.0, 10.0], [200.0, 400.0, 20.0]])
    grouping = group_sensors(real)
    frame = build_metrics_report(real, pred, grouping, hours=[17, 18])
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame["hour"].tolist() == ["17", "18", "mean_hourly", "pooled"]
    first = frame.iloc[0]
    assert first["mse_t"] == pytest.approx(200.0 / 3)
    assert frame.iloc[1]["rrmse_t"] == 0.0
    assert frame.iloc[2]["mse_t"] == pytest.approx(100.0 / 3)
    pooled = frame.iloc[3]
    assert pooled["mse_t"] == pytest.approx(200.0 / 6)
    assert first["rrmse_lo"] == 0.0
    assert first["rrmse_me"] == pytest.approx(10.0)
    assert first["rrmse_hi"] == pytest.approx(10.0 / 300.0 * 100)


def test_metrics_report_shape_mismatch():
    grouping = group_sensors(np.ones((2, 2)))
    with pytest.raises(ShapeMismatchError):
        build_metrics_report(np.ones((2, 2)), np.ones((2, 2)), grouping, hours=[1])
