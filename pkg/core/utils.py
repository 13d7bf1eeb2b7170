# -*- coding: utf-8 -*-
"""
core/utils.py
Вспомогательные функции для загрузчиков и анализа.
"""

import math
from typing import Any, Dict, List, Optional

import numpy as np


# ---------- Числа ----------

def to_float(val: Any) -> Optional[float]:
    """Приведение значения к float: '1 234,56' -> 1234.56 ; пусто/NaN -> None"""
    if val is None or (isinstance(val, float) and math.isnan(val)):
        return None
    if isinstance(val, bool):
        return float(val)
    if isinstance(val, (int, float, np.integer, np.floating)):
        return float(val)

    s = str(val).strip()
    if not s:
        return None
    s = s.replace(" ", "").replace(" ", "").replace(",", ".")
    try:
        return float(s)
    except ValueError:
        return None


def stats(nums: List[float]) -> Dict[str, Optional[float]]:
    """Простейшие статистики"""
    if not nums:
        return {"min": None, "max": None, "avg": None, "sum": 0}
    return {
        "min": min(nums),
        "max": max(nums),
        "avg": sum(nums) / len(nums),
        "sum": sum(nums),
    }


# ---------- Выборки ----------

def chronological_split(n_samples: int, train_ratio: float) -> Dict[str, np.ndarray]:
    """Хронологическое разбиение: первые round(n·ratio) — train, остальные — test"""
    n_train = int(round(n_samples * train_ratio))
    n_train = min(max(n_train, 0), n_samples)
    idx = np.arange(n_samples)
    return {"train": idx[:n_train], "test": idx[n_train:]}
