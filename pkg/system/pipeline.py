# -*- coding: utf-8 -*-
"""
system/pipeline.py
Оркестрация: сборка датасета (OD-генерация → DTA → потоки датчиков)
и замкнутая оценка (потоки → модель → OD → DTA → ошибки по датчикам).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from analysis.dta import DtaParams, run_dta
from analysis.metrics import SensorGrouping, build_metrics_report, group_sensors
from analysis.neural import Dataset
from analysis.odgen import ODGenerator, build_zero_mask
from core.demand import FlowObservation, ODMatrix
from core.network import RoadNetwork
from core.utils import chronological_split
from infra.error_handler import ODEstimationError, ShapeMismatchError, safe_run
from infra.logger import get_logger
from system import config


@dataclass
class ClosedLoopReport:
    frame: pd.DataFrame
    real: np.ndarray
    predicted: np.ndarray
    grouping: SensorGrouping
    hours: List[int]
    converged: List[bool] = field(default_factory=list)


class DatasetBuilder:
    """
    По каждому часу:
    - допустимая OD-матрица из наблюдений (NNLS)
    - DTA по этой матрице
    - пара (потоки датчиков → вектор OD)
    """

    def __init__(self, settings: Optional[Dict] = None, expect_feasible: bool = False):
        self.settings = settings or config.defaults()
        self.expect_feasible = expect_feasible
        self.logger = get_logger()

    @safe_run(stage="Сборка датасета")
    def build(self, net: RoadNetwork, observations: Sequence[FlowObservation]) -> Dataset:
        generator = ODGenerator(self.settings["ODGEN"])
        params = DtaParams.from_settings(self.settings["DTA"])
        inputs, targets, hours = [], [], []
        self.logger.init_progress(len(observations))
        for obs in observations:
            try:
                solution = generator.generate(net, obs, expect_feasible=self.expect_feasible)
                result = run_dta(net, solution.od, params)
            except ODEstimationError as e:
                raise ODEstimationError(f"Час {obs.hour_index}: {type(e).__name__}: {e}") from e
            inputs.append(result.sensor_flows)
            targets.append(solution.od.to_vector())
            hours.append(obs.hour_index)
            self.logger.step_done(f"час {obs.hour_index}")

        n_free = int((~build_zero_mask(net.zones)).sum())
        split = chronological_split(len(hours), float(self.settings["PIPELINE"]["train_ratio"]))
        return Dataset(
            inputs=np.array(inputs).reshape(len(hours), net.n_sensors),
            targets=np.array(targets).reshape(len(hours), n_free),
            train_idx=split["train"],
            test_idx=split["test"],
            hours=np.array(hours, dtype=int),
        )


def build_dataset(net: RoadNetwork, observations: Sequence[FlowObservation],
                  settings: Optional[Dict] = None, expect_feasible: bool = False) -> Dataset:
    return DatasetBuilder(settings, expect_feasible).build(net, observations)


@safe_run(stage="Замкнутая оценка")
def closed_loop_eval(net: RoadNetwork, model, real_flows: np.ndarray, hours: Optional[Sequence[int]] = None,
                     settings: Optional[Dict] = None) -> ClosedLoopReport:
    """
    real_flows: часы × датчики (обычно одни сутки, для группировки по медиане).
    model — любой объект с predict(x) и out_dim (нейросеть или эталон).
    """
    settings = settings or config.defaults()
    logger = get_logger()
    real = np.atleast_2d(np.asarray(real_flows, dtype=float))
    hours = list(hours) if hours is not None else list(range(real.shape[0]))
    if real.shape[1] != net.n_sensors:
        raise ShapeMismatchError(f"Потоки на {real.shape[1]} датчиков, в сети {net.n_sensors}")
    mask = build_zero_mask(net.zones)
    n_free = int((~mask).sum())
    if model.out_dim != n_free:
        raise ShapeMismatchError(f"Модель выдаёт {model.out_dim} элементов OD, маска сети — {n_free}")

    params = DtaParams.from_settings(settings["DTA"])
    grouping = group_sensors(real, settings["METRICS"]["thresholds"])
    predicted, converged = [], []
    logger.init_progress(len(hours))
    for hour, q in zip(hours, real):
        od_vector = model.predict(q)
        assert np.all(od_vector >= 0), "модель вернула отрицательный спрос"
        od = ODMatrix.from_vector(od_vector, mask, hour_index=int(hour))
        result = run_dta(net, od, params)
        predicted.append(result.sensor_flows)
        converged.append(result.converged)
        logger.step_done(f"час {hour}")

    predicted_arr = np.array(predicted).reshape(real.shape)
    frame = build_metrics_report(real, predicted_arr, grouping, hours)
    if not all(converged):
        logger.warning(f"DTA не сошлась в {converged.count(False)} час(ах) из {len(converged)}")
    return ClosedLoopReport(frame=frame, real=real, predicted=predicted_arr, grouping=grouping,
                            hours=[int(h) for h in hours], converged=converged)
