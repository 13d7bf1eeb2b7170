# -*- coding: utf-8 -*-
"""
analysis/metrics.py
Ошибки по потокам датчиков (MSE, RMSE, rRMSE), группировка датчиков по медиане
суточного потока и почасовой отчёт в форме таблиц «час × ошибки».
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from infra.error_handler import DataFormatError, ShapeMismatchError
from infra.logger import get_logger
from system import config


LOW, MEDIUM, HIGH = "low", "medium", "high"
GROUPS = (LOW, MEDIUM, HIGH)

REPORT_COLUMNS = ["hour", "mse_t", "rmse_t", "rrmse_t", "rrmse_lo", "rrmse_me", "rrmse_hi"]


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    rmse: float
    rrmse: float          # %, NaN если среднее эталона = 0
    note: str = ""

    @property
    def rrmse_defined(self) -> bool:
        return not math.isnan(self.rrmse)


def error_stats(real: np.ndarray, predicted: np.ndarray) -> ErrorReport:
    """MSE и RMSE по всем элементам; rRMSE = RMSE / среднее(real) · 100%"""
    real = np.asarray(real, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if real.shape != predicted.shape:
        raise ShapeMismatchError(f"Формы эталона {real.shape} и прогноза {predicted.shape} различаются")
    if real.size == 0:
        raise ShapeMismatchError("Пустое сравнение: нет ни одного значения")
    mse = float(np.mean((real - predicted) ** 2))
    rmse = math.sqrt(mse)
    mean = float(np.mean(real))
    if mean > 0:
        return ErrorReport(mse=mse, rmse=rmse, rrmse=rmse / mean * 100.0)
    return ErrorReport(mse=mse, rmse=rmse, rrmse=float("nan"), note="среднее эталонных значений равно 0: rRMSE не определён")


# ---------- Сравнение потоков ----------

@dataclass
class FlowComparison:
    real: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=float).ravel()
        self.predicted = np.asarray(self.predicted, dtype=float).ravel()
        if self.real.shape != self.predicted.shape:
            raise ShapeMismatchError(f"Потоки датчиков: {self.real.shape[0]} реальных и {self.predicted.shape[0]} расчётных")
        for name, arr in (("real", self.real), ("predicted", self.predicted)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise DataFormatError(f"Потоки датчиков ({name}) должны быть конечными и ≥ 0")

    @property
    def n_sensors(self) -> int:
        return int(self.real.shape[0])

    def subset(self, sensor_ids: Sequence[int]) -> "FlowComparison":
        idx = np.asarray(list(sensor_ids), dtype=int)
        return FlowComparison(real=self.real[idx], predicted=self.predicted[idx])


def flow_errors(cmp: FlowComparison) -> ErrorReport:
    return error_stats(cmp.real, cmp.predicted)


# ---------- Группировка датчиков ----------

@dataclass
class SensorGrouping:
    thresholds: Tuple[float, float]
    assignment: Dict[int, str] = field(default_factory=dict)
    medians: Dict[int, float] = field(default_factory=dict)

    def members(self, group: str) -> List[int]:
        return sorted(s for s, g in self.assignment.items() if g == group)

    def sizes(self) -> Dict[str, int]:
        return {g: len(self.members(g)) for g in GROUPS}


def classify_flow(value: float, thresholds: Sequence[float]) -> str:
    low, high = thresholds
    if value <= low:
        return LOW
    if value <= high:
        return MEDIUM
    return HIGH


def group_sensors(daily_flows: Union[np.ndarray, Mapping[int, Sequence[float]]],
                  thresholds: Optional[Sequence[float]] = None) -> SensorGrouping:
    """
    daily_flows: массив часы × датчики или {sensor_id: ряд часовых потоков}.
    Границы [0, t1], (t1, t2], (t2, ∞).
    """
    thresholds = tuple(float(t) for t in (thresholds or config.METRICS["thresholds"]))
    if len(thresholds) != 2 or thresholds[0] > thresholds[1]:
        raise DataFormatError(f"Границы групп должны быть парой по возрастанию, получено {thresholds}")
    if isinstance(daily_flows, Mapping):
        series = {int(s): list(v) for s, v in daily_flows.items()}
    else:
        arr = np.asarray(daily_flows, dtype=float)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"Ожидался массив часы × датчики, получено {arr.shape}")
        series = {s: arr[:, s].tolist() for s in range(arr.shape[1])}

    grouping = SensorGrouping(thresholds=thresholds)
    for sensor_id, values in sorted(series.items()):
        if not values:
            raise DataFormatError(f"Датчик sensor_id={sensor_id}: пустой ряд потоков")
        med = float(np.median(values))
        grouping.medians[sensor_id] = med
        grouping.assignment[sensor_id] = classify_flow(med, thresholds)
    return grouping


def grouped_rrmse(cmp: FlowComparison, grouping: SensorGrouping) -> Dict[str, Optional[ErrorReport]]:
    """Ошибки по группам; пустая группа — None, группа с нулевым средним — NaN с предупреждением"""
    if len(grouping.assignment) != cmp.n_sensors:
        raise ShapeMismatchError(f"Группировка на {len(grouping.assignment)} датчиков, сравнение на {cmp.n_sensors}")
    result: Dict[str, Optional[ErrorReport]] = {}
    for group in GROUPS:
        ids = grouping.members(group)
        if not ids:
            result[group] = None
            continue
        report = flow_errors(cmp.subset(ids))
        if not report.rrmse_defined:
            get_logger().warning(f"Группа {group}: нулевой средний поток, rRMSE исключён")
        result[group] = report
    return result


# ---------- Почасовой отчёт ----------

def _rr(report: Optional[ErrorReport]) -> float:
    return report.rrmse if report is not None else float("nan")


def build_metrics_report(real: np.ndarray, predicted: np.ndarray, grouping: SensorGrouping,
                         hours: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """
    Строка на час (hour, mse_t, rmse_t, rrmse_t, rrmse_lo, rrmse_me, rrmse_hi)
    и две итоговые: mean_hourly (среднее почасовых значений) и pooled (по всем часам сразу).
    """
    real = np.atleast_2d(np.asarray(real, dtype=float))
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    if real.shape != predicted.shape:
        raise ShapeMismatchError(f"Реальные {real.shape} и расчётные {predicted.shape} потоки различаются по форме")
    hours = list(hours) if hours is not None else list(range(real.shape[0]))
    if len(hours) != real.shape[0]:
        raise ShapeMismatchError(f"Часов {len(hours)}, строк потоков {real.shape[0]}")

    rows = []
    for hour, q, q_hat in zip(hours, real, predicted):
        cmp = FlowComparison(real=q, predicted=q_hat)
        total = flow_errors(cmp)
        groups = grouped_rrmse(cmp, grouping)
        rows.append([str(hour), total.mse, total.rmse, total.rrmse,
                     _rr(groups[LOW]), _rr(groups[MEDIUM]), _rr(groups[HIGH])])
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)

    numeric = frame[REPORT_COLUMNS[1:]]
    mean_row = ["mean_hourly"] + numeric.mean(axis=0, skipna=True).tolist()

    pooled_total = error_stats(real, predicted)
    pooled = ["pooled", pooled_total.mse, pooled_total.rmse, pooled_total.rrmse]
    for group in GROUPS:
        ids = grouping.members(group)
        pooled.append(error_stats(real[:, ids], predicted[:, ids]).rrmse if ids else float("nan"))

    summary = pd.DataFrame([mean_row, pooled], columns=REPORT_COLUMNS)
    return pd.concat([frame, summary], ignore_index=True)
