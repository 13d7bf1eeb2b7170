# -*- coding: utf-8 -*-
"""
analysis/baselines.py
Эталонные модели для сравнения с нейросетью: среднее OD, нулевое OD, оракул по таблице.
Интерфейс как у NNModel: predict(x) для вектора или батча.
"""

from dataclasses import dataclass

import numpy as np

from infra.error_handler import DataFormatError, ShapeMismatchError


def _batch(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    return x.ndim == 1, np.atleast_2d(x)


@dataclass
class MeanBaseline:
    mean: np.ndarray

    @classmethod
    def fit(cls, targets: np.ndarray) -> "MeanBaseline":
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if targets.shape[0] == 0:
            raise ShapeMismatchError("Среднее по пустой выборке не определено")
        return cls(mean=targets.mean(axis=0))

    @property
    def out_dim(self) -> int:
        return self.mean.shape[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        single, batch = _batch(x)
        out = np.tile(self.mean, (batch.shape[0], 1))
        return out[0] if single else out


@dataclass
class ZeroBaseline:
    out_dim: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        single, batch = _batch(x)
        out = np.zeros((batch.shape[0], self.out_dim))
        return out[0] if single else out


@dataclass
class OracleModel:
    """Возвращает известную цель для входа из таблицы (ближайшая строка с допуском)"""

    inputs: np.ndarray
    targets: np.ndarray
    rtol: float = 1e-9

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeMismatchError(f"Оракул: {self.inputs.shape[0]} входов и {self.targets.shape[0]} целей")

    @property
    def out_dim(self) -> int:
        return self.targets.shape[1]

    def predict(self, x: np.ndarray) -> np.ndarray:
        single, batch = _batch(x)
        out = np.empty((batch.shape[0], self.out_dim))
        for row, q in enumerate(batch):
            dist = np.abs(self.inputs - q).max(axis=1)
            best = int(np.argmin(dist))
            if dist[best] > self.rtol * max(1.0, float(np.abs(q).max(initial=0.0))):
                raise DataFormatError(f"Оракул: вход строки {row} отсутствует в таблице (отклонение {dist[best]:.3e})")
            out[row] = self.targets[best]
        return out[0] if single else out
