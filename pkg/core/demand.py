# -*- coding: utf-8 -*-
"""
core/demand.py
Матрица корреспонденций (OD), наблюдения потоков на границах и векторы потоков датчиков.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from infra.error_handler import DataFormatError, ShapeMismatchError


# Вектор часовых потоков по датчикам (veh/h), индекс = id датчика
FlowVector = np.ndarray

TOTAL = "total"


def free_pairs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Свободные (не структурно нулевые) пары (i, j) в построчном порядке"""
    rows, cols = np.nonzero(~np.asarray(mask, dtype=bool))
    return list(zip(rows.tolist(), cols.tolist()))


@dataclass
class ODMatrix:
    """
    Часовой спрос d_ij между зонами.
    mask[i, j] = True — структурный ноль; вектор свободных элементов идёт построчно.
    """

    demand: np.ndarray
    mask: np.ndarray
    hour_index: int = 0

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        z = self.mask.shape[0]
        if self.mask.shape != (z, z) or self.demand.shape != (z, z):
            raise ShapeMismatchError(f"OD-матрица: ожидались формы {z}×{z}, получено {self.demand.shape} и {self.mask.shape}")
        if not np.all(np.diag(self.mask)):
            raise DataFormatError("OD-матрица: диагональ должна быть структурным нулём")
        if not np.all(np.isfinite(self.demand)):
            raise DataFormatError(f"OD-матрица (час {self.hour_index}): нечисловые значения спроса")
        if np.any(self.demand < 0):
            raise DataFormatError(f"OD-матрица (час {self.hour_index}): отрицательный спрос")
        if np.any(self.demand[self.mask] != 0):
            raise DataFormatError(f"OD-матрица (час {self.hour_index}): ненулевой спрос в структурном нуле")

    @property
    def n_zones(self) -> int:
        return self.mask.shape[0]

    @property
    def n_free(self) -> int:
        return int((~self.mask).sum())

    def free_pairs(self) -> List[Tuple[int, int]]:
        return free_pairs(self.mask)

    def to_vector(self) -> np.ndarray:
        return self.demand[~self.mask].copy()

    @classmethod
    def from_vector(cls, vector: np.ndarray, mask: np.ndarray, hour_index: int = 0) -> "ODMatrix":
        mask = np.asarray(mask, dtype=bool)
        vector = np.asarray(vector, dtype=float).ravel()
        n_free = int((~mask).sum())
        if vector.shape[0] != n_free:
            raise ShapeMismatchError(f"OD-вектор длины {vector.shape[0]}, а свободных элементов {n_free}")
        demand = np.zeros(mask.shape, dtype=float)
        demand[~mask] = vector
        return cls(demand=demand, mask=mask, hour_index=hour_index)

    @classmethod
    def zeros(cls, mask: np.ndarray, hour_index: int = 0) -> "ODMatrix":
        mask = np.asarray(mask, dtype=bool)
        return cls(demand=np.zeros(mask.shape), mask=mask, hour_index=hour_index)

    def positive_pairs(self) -> List[Tuple[int, int, float]]:
        rows, cols = np.nonzero(self.demand > 0)
        return [(i, j, float(self.demand[i, j])) for i, j in zip(rows.tolist(), cols.tolist())]

    def total(self) -> float:
        return float(self.demand.sum())


@dataclass
class FlowObservation:
    """
    Наблюдаемые часовые потоки на границах: (zone_id, tag) -> veh/h.
    tag = 'total' для въездов/выездов, 'in_ul' / 'in_ll' / 'out_ul' / 'out_ll' для парковок.
    """

    q: Dict[Tuple[int, str], float] = field(default_factory=dict)
    hour_index: int = 0

    def __post_init__(self):
        for (zone_id, tag), value in self.q.items():
            if value is None or not math.isfinite(value) or value < 0:
                raise DataFormatError(f"Наблюдение (час {self.hour_index}, zone_id={zone_id}, {tag}): "
                                      f"поток должен быть конечным и ≥ 0, получено {value}")

    def get(self, zone_id: int, tag: str = TOTAL):
        return self.q.get((zone_id, tag))

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.q.values())
