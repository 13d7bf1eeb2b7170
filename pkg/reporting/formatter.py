# -*- coding: utf-8 -*-
"""
reporting/formatter.py
Генерация текстового отчёта (Markdown) по замкнутой оценке OD-модели.
"""

import math
from typing import Any, Dict, List

import pandas as pd

from analysis.metrics import GROUPS
from core.utils import stats
from infra.error_handler import safe_run
from infra.logger import get_logger


def _fmt(value: Any, pattern: str = "{:.2f}") -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "—"
    return pattern.format(value)


class ReportFormatter:
    """
    Формирует текстовый отчёт в Markdown:
    - параметры прогона
    - почасовая таблица ошибок (MSE_T, RMSE_T, rRMSE_T)
    - rRMSE по группам датчиков и итоговые строки
    """

    def __init__(self):
        self.logger = get_logger()

    @safe_run(stage="Формирование отчёта")
    def format_report(self, results: Dict[str, Any]) -> str:
        md: List[str] = []
        frame: pd.DataFrame = results.get("report", pd.DataFrame())

        # ---------- Введение ----------
        md.append("# 📊 Отчёт по замкнутой оценке OD\n")
        md.append("## Параметры\n")
        md.append(f"- **Модель**: {results.get('model', 'не указано')}")
        md.append(f"- **Сеть**: {results.get('network', '—')}")
        md.append(f"- **Сутки**: {results.get('day', '—')}\n")

        # ---------- Почасовые ошибки ----------
        md.append("## 🕒 Ошибки по часам\n")
        md.append("| час | MSE_T | RMSE_T | rRMSE_T, % | rRMSE low, % | rRMSE medium, % | rRMSE high, % |")
        md.append("|---|---|---|---|---|---|---|")
        for row in frame.itertuples(index=False):
            md.append(f"| {row.hour} | {_fmt(row.mse_t)} | {_fmt(row.rmse_t)} | {_fmt(row.rrmse_t)} | "
                      f"{_fmt(row.rrmse_lo)} | {_fmt(row.rrmse_me)} | {_fmt(row.rrmse_hi)} |")

        # ---------- Группы датчиков ----------
        grouping = results.get("grouping")
        if grouping is not None:
            md.append("\n## 📡 Группы датчиков (медиана суточного потока)\n")
            low, high = grouping.thresholds
            bounds = {"low": f"[0, {low:g}]", "medium": f"({low:g}, {high:g}]", "high": f"({high:g}, ∞)"}
            for group in GROUPS:
                md.append(f"- {group} {bounds[group]}: {len(grouping.members(group))} датчиков")

        # ---------- Итог ----------
        hourly = frame[~frame["hour"].isin(["mean_hourly", "pooled"])] if not frame.empty else frame
        md.append("\n## 🧮 Итог\n")
        if not hourly.empty:
            rr = [v for v in hourly["rrmse_t"].tolist() if not math.isnan(v)]
            s = stats(rr)
            md.append(f"- rRMSE_T по часам: мин {_fmt(s['min'])}%, макс {_fmt(s['max'])}%, среднее {_fmt(s['avg'])}%")
            pooled = frame[frame["hour"] == "pooled"]
            if not pooled.empty:
                md.append(f"- rRMSE_T по всем часам сразу: {_fmt(pooled['rrmse_t'].iloc[0])}%")
        if results.get("unconverged"):
            md.append(f"- ⚠ DTA не сошлась в часах: {results['unconverged']}")
        md.append("")
        return "\n".join(md)
