# -*- coding: utf-8 -*-
"""
system/config.py
Конфигурация пайплайна OD-оценки: пути, параметры по умолчанию, переопределения из --config.
"""

import copy
import json
import os
from typing import Any, Dict, Optional

# ---------- Пути ----------

BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))

DATA_DIR = os.path.join(BASE_DIR, "data")
OUTPUT_DIR = os.path.join(BASE_DIR, "output")
REPORTS_DIR = os.path.join(OUTPUT_DIR, "reports")
LOG_DIR = os.path.join(BASE_DIR, "logs")

DEMO_NETWORK_PATH = os.path.join(DATA_DIR, "demo_network.json")


# ---------- Логирование ----------

LOG_FILE = "od_estimation.log"
LOG_LEVEL = "INFO"  # можно поменять на DEBUG


# ---------- Сеть ----------

NETWORK = {
    "vdf_a": 0.15,
    "vdf_power": 4.0,
    "free_speed": 13.9,  # м/с (50 км/ч), t0 = L / free_speed
    "cost_weights": {"alpha": 1.0, "beta": 0.05, "gamma": 1.0},
}


# ---------- Генерация OD (NNLS) ----------

ODGEN = {
    "max_iter": 50000,
    "rel_tol": 1e-9,      # относительное улучшение цели
    "feas_tol": 1e-6,     # τ_feas = feas_tol · ‖b‖²
    "power_iters": 500,   # оценка L = λ_max(AᵀA)
}


# ---------- DTA ----------

DTA = {
    "eta": 1.0,
    "max_iter": 20,
    "conv_eps": 0.01,
    "cost_floor": 1e-6,
}


# ---------- Нейросеть ----------

NN = {
    "hidden_dim": 80,
    "dropout": 0.2,
    "l1_lambda": 0.02,
    "normalize_inputs": False,
}

TRAIN = {
    "learning_rate": 0.001,
    "epochs": 50,
    "batch_size": 96,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "seed": 0,
}


# ---------- Метрики ----------

METRICS = {
    "thresholds": [36.0, 175.5],  # veh/h: [0, 36], (36, 175.5], (175.5, ∞)
}


# ---------- Синтетические данные ----------

PIPELINE = {
    "days": 30,
    "train_ratio": 5.0 / 6.0,  # 600 / 120 при 720 часах
    "noise_sigma": 0.15,
    "seed": 42,
    # суточный профиль (множители базового потока по часам 0..23)
    "diurnal": [
        0.25, 0.18, 0.15, 0.15, 0.22, 0.40, 0.65, 0.90, 1.05, 1.10, 1.05, 1.00,
        1.00, 1.05, 1.10, 1.15, 1.25, 1.30, 1.25, 1.10, 0.95, 0.80, 0.60, 0.40,
    ],
    # базовый исходящий поток зоны по классам (veh/h)
    "base_flows": {"Z1": 450.0, "Z3": 380.0, "Z5": 90.0, "Z6": 80.0, "Z7": 160.0},
}


# ---------- Переопределения ----------

_SECTIONS = ("NETWORK", "ODGEN", "DTA", "NN", "TRAIN", "METRICS", "PIPELINE")


def defaults() -> Dict[str, Dict[str, Any]]:
    """Копия всех блоков параметров по умолчанию."""
    module_globals = globals()
    return {name: copy.deepcopy(module_globals[name]) for name in _SECTIONS}


def load_settings(path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """
    Параметры по умолчанию + переопределения из JSON-файла.
    Формат файла: {"DTA": {"eta": 2.0}, "TRAIN": {"epochs": 10}}
    """
    from infra.error_handler import ConfigError

    settings = defaults()
    if not path:
        return settings

    try:
        with open(path, "r", encoding="utf-8") as f:
            overrides = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Конфиг {path}: ошибка разбора в строке {e.lineno}: {e.msg}") from e

    if not isinstance(overrides, dict):
        raise ConfigError(f"Конфиг {path}: ожидается объект верхнего уровня")

    for section, values in overrides.items():
        key = section.upper()
        if key not in settings:
            raise ConfigError(f"Конфиг {path}: неизвестный раздел '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"Конфиг {path}: раздел '{section}' должен быть объектом")
        for name, value in values.items():
            if name not in settings[key]:
                raise ConfigError(f"Конфиг {path}: неизвестный параметр {section}.{name}")
            settings[key][name] = value
    return settings
