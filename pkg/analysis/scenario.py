# -*- coding: utf-8 -*-
"""
analysis/scenario.py
Сценарии «что если»: закрытие полосы (снижение пропускной способности)
и ограничения у бордюра (снижение ёмкости и/или дополнительная плата за стоянку).
"""

import json
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

from core.network import RoadNetwork
from infra.error_handler import ScenarioError, safe_run
from infra.logger import get_logger


LANE_CLOSURE = "lane_closure"
CURBSIDE_RESTRICTION = "curbside_restriction"
KINDS = (LANE_CLOSURE, CURBSIDE_RESTRICTION)


@dataclass(frozen=True)
class ScenarioTransform:
    kind: str
    targets: Tuple[int, ...]
    capacity_factor: float = 1.0
    extra_dwell_cost: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"Неизвестный тип сценария '{self.kind}', допустимы {KINDS}")
        if not self.targets:
            raise ScenarioError("Сценарий без целевых связей")
        if not (math.isfinite(self.capacity_factor) and 0.0 < self.capacity_factor <= 1.0):
            raise ScenarioError(f"capacity_factor должен быть в (0, 1], получено {self.capacity_factor}")
        if not (math.isfinite(self.extra_dwell_cost) and self.extra_dwell_cost >= 0):
            raise ScenarioError(f"extra_dwell_cost должен быть ≥ 0, получено {self.extra_dwell_cost}")

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ScenarioTransform":
        try:
            targets = doc["targets"]
            targets = (targets,) if isinstance(targets, int) else tuple(int(t) for t in targets)
            return cls(kind=str(doc["kind"]), targets=targets,
                       capacity_factor=float(doc.get("capacity_factor", 1.0)),
                       extra_dwell_cost=float(doc.get("extra_dwell_cost", 0.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"Некорректное описание сценария: {e}") from e


@safe_run(stage="Загрузка сценария", retries=2)
def load_scenario(path: str) -> ScenarioTransform:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}: ошибка разбора в строке {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: ожидается объект")
    return ScenarioTransform.from_dict(doc)


def apply_scenario(net: RoadNetwork, transform: ScenarioTransform) -> RoadNetwork:
    """Новая сеть с изменёнными связями; исходная сеть не меняется"""
    unknown = [lid for lid in transform.targets if lid not in net.links]
    if unknown:
        raise ScenarioError(f"Сценарий {transform.kind}: связи {unknown} отсутствуют в сети")
    modified = net.copy()
    for lid in transform.targets:
        link = modified.links[lid]
        link.capacity *= transform.capacity_factor
        link.financial_cost += transform.extra_dwell_cost
    get_logger().info(f"Сценарий {transform.kind}: связи {list(transform.targets)}, "
                      f"ёмкость ×{transform.capacity_factor}, доплата {transform.extra_dwell_cost}")
    return modified
