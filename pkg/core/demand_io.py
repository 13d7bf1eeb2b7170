# -*- coding: utf-8 -*-
"""
core/demand_io.py
Файлы с разделителями: OD-матрицы, наблюдения на границах, потоки датчиков, датасет.
Метаданные хранятся в строках заголовка вида '# key=value'.
"""

import io
import os
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from core.demand import FlowObservation, ODMatrix, TOTAL
from core.network import PARKING_LEVELS
from infra.error_handler import DataFormatError, safe_run


LEVEL_TAGS = (TOTAL,) + PARKING_LEVELS


# ---------- Заголовок ----------

def _write_with_header(path: str, meta: Dict[str, Any], frame: pd.DataFrame) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in meta.items():
            f.write(f"# {key}={value}\n")
        frame.to_csv(f, index=False)
    return path


def _read_with_header(path: str) -> Tuple[Dict[str, str], pd.DataFrame]:
    meta: Dict[str, str] = {}
    body: List[str] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if line.startswith("#"):
                entry = line[1:].strip()
                if "=" not in entry:
                    raise DataFormatError(f"{path}:{lineno}: строка заголовка без '=': {line.strip()}")
                key, value = entry.split("=", 1)
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    if not body:
        raise DataFormatError(f"{path}: нет строки с названиями столбцов")
    frame = pd.read_csv(io.StringIO("".join(body)))
    return meta, frame


def _require_columns(frame: pd.DataFrame, columns: Tuple[str, ...], path: str):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: нет столбцов {missing}")


def _meta_int(meta: Dict[str, str], key: str, path: str) -> int:
    if key not in meta:
        raise DataFormatError(f"{path}: в заголовке нет '{key}'")
    try:
        return int(meta[key])
    except ValueError as e:
        raise DataFormatError(f"{path}: '{key}' должно быть целым, получено {meta[key]!r}") from e


# ---------- OD-матрица ----------

@safe_run(stage="Сохранение OD-матрицы", retries=2)
def save_od(od: ODMatrix, path: str) -> str:
    pairs = od.free_pairs()
    frame = pd.DataFrame({
        "origin_zone": [i for i, _ in pairs],
        "dest_zone": [j for _, j in pairs],
        "demand": od.to_vector(),
    })
    return _write_with_header(path, {"hour_index": od.hour_index, "zones": od.n_zones}, frame)


@safe_run(stage="Загрузка OD-матрицы", retries=2)
def load_od(path: str, mask: np.ndarray) -> ODMatrix:
    """OD-матрица из файла; строки должны покрывать ровно свободные элементы маски"""
    meta, frame = _read_with_header(path)
    _require_columns(frame, ("origin_zone", "dest_zone", "demand"), path)
    hour = _meta_int(meta, "hour_index", path)
    zones = _meta_int(meta, "zones", path)
    mask = np.asarray(mask, dtype=bool)
    if zones != mask.shape[0]:
        raise DataFormatError(f"{path}: файл на {zones} зон, а сеть на {mask.shape[0]}")

    demand = np.zeros(mask.shape)
    seen = set()
    for row_no, row in enumerate(frame.itertuples(index=False), start=1):
        i, j, value = int(row.origin_zone), int(row.dest_zone), float(row.demand)
        ctx = f"{path}: строка данных {row_no} ({i}, {j})"
        if not (0 <= i < zones and 0 <= j < zones):
            raise DataFormatError(f"{ctx}: зона вне диапазона 0..{zones - 1}")
        if mask[i, j]:
            raise DataFormatError(f"{ctx}: пара является структурным нулём")
        if (i, j) in seen:
            raise DataFormatError(f"{ctx}: пара повторяется")
        if not np.isfinite(value) or value < 0:
            raise DataFormatError(f"{ctx}: спрос должен быть конечным и ≥ 0, получено {value}")
        seen.add((i, j))
        demand[i, j] = value
    if len(seen) != int((~mask).sum()):
        raise DataFormatError(f"{path}: покрыто {len(seen)} свободных элементов из {int((~mask).sum())}")
    return ODMatrix(demand=demand, mask=mask, hour_index=hour)


# ---------- Наблюдения ----------

@safe_run(stage="Сохранение наблюдений", retries=2)
def save_observations(observations: List[FlowObservation], path: str) -> str:
    records = []
    for obs in observations:
        for (zone_id, tag), value in sorted(obs.q.items()):
            records.append({"hour": obs.hour_index, "zone": zone_id, "level": tag, "flow": value})
    frame = pd.DataFrame(records, columns=["hour", "zone", "level", "flow"])
    return _write_with_header(path, {"hours": len(observations)}, frame)


@safe_run(stage="Загрузка наблюдений", retries=2)
def load_observations(path: str) -> List[FlowObservation]:
    _, frame = _read_with_header(path)
    _require_columns(frame, ("hour", "zone", "level", "flow"), path)
    bad = sorted(set(frame["level"]) - set(LEVEL_TAGS))
    if bad:
        raise DataFormatError(f"{path}: неизвестные метки уровня {bad}")
    observations = []
    for hour, group in frame.groupby("hour", sort=True):
        q = {}
        for row in group.itertuples(index=False):
            key = (int(row.zone), str(row.level))
            if key in q:
                raise DataFormatError(f"{path}: час {hour}, zone_id={key[0]} {key[1]} повторяется")
            q[key] = float(row.flow)
        observations.append(FlowObservation(q=q, hour_index=int(hour)))
    return observations


# ---------- Потоки датчиков ----------

@safe_run(stage="Сохранение потоков датчиков", retries=2)
def save_sensor_flows(flows: np.ndarray, path: str, meta: Dict[str, Any]) -> str:
    flows = np.asarray(flows, dtype=float)
    frame = pd.DataFrame({"sensor_id": np.arange(flows.shape[0]), "flow": flows})
    return _write_with_header(path, meta, frame)


@safe_run(stage="Загрузка потоков датчиков", retries=2)
def load_sensor_flows(path: str) -> Tuple[np.ndarray, Dict[str, str]]:
    meta, frame = _read_with_header(path)
    _require_columns(frame, ("sensor_id", "flow"), path)
    frame = frame.sort_values("sensor_id")
    if list(frame["sensor_id"]) != list(range(len(frame))):
        raise DataFormatError(f"{path}: id датчиков должны идти подряд 0..S-1")
    return frame["flow"].to_numpy(dtype=float), meta


# ---------- Датасет ----------

@safe_run(stage="Сохранение датасета", retries=2)
def save_dataset(dataset, path: str) -> str:
    """Столбцы: hour, split, q_0..q_{S-1}, d_0..d_{M-1}"""
    split = np.array(["train"] * dataset.n_samples, dtype=object)
    split[dataset.test_idx] = "test"
    frame = pd.DataFrame({"hour": dataset.hours, "split": split})
    inputs = pd.DataFrame(dataset.inputs, columns=[f"q_{s}" for s in range(dataset.inputs.shape[1])])
    targets = pd.DataFrame(dataset.targets, columns=[f"d_{m}" for m in range(dataset.targets.shape[1])])
    frame = pd.concat([frame, inputs, targets], axis=1)
    return _write_with_header(path, {"samples": dataset.n_samples, "sensors": dataset.inputs.shape[1],
                                     "od_entries": dataset.targets.shape[1]}, frame)


@safe_run(stage="Загрузка датасета", retries=2)
def load_dataset(path: str):
    from analysis.neural import Dataset

    _, frame = _read_with_header(path)
    _require_columns(frame, ("hour", "split"), path)
    q_cols = sorted((c for c in frame.columns if c.startswith("q_")), key=lambda c: int(c[2:]))
    d_cols = sorted((c for c in frame.columns if c.startswith("d_")), key=lambda c: int(c[2:]))
    if not q_cols or not d_cols:
        raise DataFormatError(f"{path}: нет столбцов q_* или d_*")
    split = frame["split"].astype(str).to_numpy()
    unknown = set(split) - {"train", "test"}
    if unknown:
        raise DataFormatError(f"{path}: неизвестные значения split {sorted(unknown)}")
    return Dataset(
        inputs=frame[q_cols].to_numpy(dtype=float),
        targets=frame[d_cols].to_numpy(dtype=float),
        train_idx=np.nonzero(split == "train")[0],
        test_idx=np.nonzero(split == "test")[0],
        hours=frame["hour"].to_numpy(dtype=int),
    )
