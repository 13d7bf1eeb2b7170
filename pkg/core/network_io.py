# -*- coding: utf-8 -*-
"""
core/network_io.py
Загрузка и сохранение дорожной сети (JSON: nodes, links, zones, sensors, cost_weights, vdf).
"""

import json
import os
from typing import Any, Dict, List

from core.network import CostWeights, Link, Node, RoadNetwork, Sensor, VdfParams, Zone
from core.utils import to_float
from infra.error_handler import NetworkValidationError, safe_run
from infra.logger import get_logger


_REQUIRED = ("nodes", "links", "zones", "sensors", "cost_weights", "vdf")


def network_to_dict(net: RoadNetwork) -> Dict[str, Any]:
    return {
        "nodes": [{"id": n.id, "kind": n.kind} for n in sorted(net.nodes.values(), key=lambda n: n.id)],
        "links": [
            {
                "id": l.id,
                "from": l.from_node,
                "to": l.to_node,
                "length": l.length,
                "capacity": l.capacity,
                "free_flow_time": l.free_flow_time,
                "financial_cost": l.financial_cost,
                "current_travel_time": l.current_travel_time,
                "current_flow": l.current_flow,
            }
            for l in sorted(net.links.values(), key=lambda l: l.id)
        ],
        "zones": [
            {"id": z.id, "class": z.zone_class, "attach_links": list(z.attach_links), "levels": dict(z.levels)}
            for z in net.zones
        ],
        "sensors": [{"id": s.id, "link": s.link} for s in net.sensors],
        "cost_weights": dict(net.cost_weights._asdict()),
        "vdf": dict(net.vdf._asdict()),
    }


def _unique(items: List[Dict[str, Any]], section: str) -> None:
    seen = set()
    for pos, item in enumerate(items):
        if not isinstance(item, dict) or "id" not in item:
            raise NetworkValidationError(f"{section}[{pos}]: ожидается объект с полем id")
        if not isinstance(item["id"], int) or isinstance(item["id"], bool):
            raise NetworkValidationError(f"{section}[{pos}]: id должен быть целым, получено {item['id']!r}")
        if item["id"] in seen:
            raise NetworkValidationError(f"{section}[{pos}]: повторяющийся id={item['id']}")
        seen.add(item["id"])


def _is_id(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _number(item: Dict[str, Any], key: str, ctx: str, default: Any = ...) -> float:
    if key not in item:
        if default is ...:
            raise NetworkValidationError(f"{ctx}: нет поля '{key}'")
        return default
    value = to_float(item[key])
    if value is None:
        raise NetworkValidationError(f"{ctx}: поле '{key}' не является числом: {item[key]!r}")
    return value


def network_from_dict(doc: Dict[str, Any]) -> RoadNetwork:
    """Построение сети из разобранного документа с проверкой всех инвариантов"""
    if not isinstance(doc, dict):
        raise NetworkValidationError("документ сети должен быть объектом")
    for key in _REQUIRED:
        if key not in doc:
            raise NetworkValidationError(f"нет раздела '{key}'")
    for section in ("nodes", "links", "zones", "sensors"):
        if not isinstance(doc[section], list):
            raise NetworkValidationError(f"раздел '{section}' должен быть массивом")
        _unique(doc[section], section)

    nodes = {n["id"]: Node(id=n["id"], kind=n.get("kind", "junction")) for n in doc["nodes"]}

    links = {}
    for pos, item in enumerate(doc["links"]):
        ctx = f"links[{pos}] (link id={item['id']})"
        for end in ("from", "to"):
            if not _is_id(item.get(end)) or item[end] not in nodes:
                raise NetworkValidationError(f"{ctx}: ссылка '{end}' на отсутствующий узел {item.get(end)!r}")
        links[item["id"]] = Link(
            id=item["id"],
            from_node=item["from"],
            to_node=item["to"],
            length=_number(item, "length", ctx),
            capacity=_number(item, "capacity", ctx),
            free_flow_time=_number(item, "free_flow_time", ctx),
            financial_cost=_number(item, "financial_cost", ctx, 0.0),
            current_travel_time=_number(item, "current_travel_time", ctx, None),
            current_flow=_number(item, "current_flow", ctx, 0.0),
        )

    zones = []
    for pos, item in enumerate(doc["zones"]):
        ctx = f"zones[{pos}] (zone id={item['id']})"
        attach = item.get("attach_links", [])
        if not isinstance(attach, list):
            raise NetworkValidationError(f"{ctx}: attach_links должен быть массивом")
        for lid in attach:
            if not _is_id(lid) or lid not in links:
                raise NetworkValidationError(f"{ctx}: связь подключения {lid!r} отсутствует")
        levels = item.get("levels", {})
        if not isinstance(levels, dict):
            raise NetworkValidationError(f"{ctx}: levels должен быть объектом, получено {type(levels).__name__}")
        for tag, lid in levels.items():
            if not _is_id(lid):
                raise NetworkValidationError(f"{ctx}: levels[{tag!r}] должен быть id связи, получено {lid!r}")
        zones.append(Zone(id=item["id"], zone_class=item.get("class", ""), attach_links=list(attach),
                          levels={str(k): v for k, v in levels.items()}))

    sensors = []
    for pos, item in enumerate(doc["sensors"]):
        if not _is_id(item.get("link")) or item["link"] not in links:
            raise NetworkValidationError(f"sensors[{pos}] (sensor id={item['id']}): связь {item.get('link')!r} отсутствует")
        sensors.append(Sensor(id=item["id"], link=item["link"]))

    cw, vdf = doc["cost_weights"], doc["vdf"]
    for section, value in (("cost_weights", cw), ("vdf", vdf)):
        if not isinstance(value, dict):
            raise NetworkValidationError(f"раздел '{section}' должен быть объектом")
    weights = CostWeights(
        alpha=_number(cw, "alpha", "cost_weights"),
        beta=_number(cw, "beta", "cost_weights"),
        gamma=_number(cw, "gamma", "cost_weights"),
    )
    vdf_params = VdfParams(a=_number(vdf, "a", "vdf"), power=_number(vdf, "power", "vdf"))

    net = RoadNetwork(nodes=nodes, links=links, zones=zones, sensors=sensors, cost_weights=weights, vdf=vdf_params)
    net.validate()
    return net


@safe_run(stage="Загрузка сети", retries=2)
def load_network(path: str) -> RoadNetwork:
    """Загрузить сеть из JSON-файла"""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkValidationError(f"{path}: ошибка разбора JSON в строке {e.lineno}, столбец {e.colno}: {e.msg}") from e
    try:
        net = network_from_dict(doc)
    except NetworkValidationError as e:
        raise NetworkValidationError(f"{path}: {e}") from e
    get_logger().info(f"Сеть загружена: {os.path.basename(path)} — узлов {len(net.nodes)}, связей {len(net.links)}, "
                      f"зон {net.n_zones}, датчиков {net.n_sensors}")
    return net


@safe_run(stage="Сохранение сети", retries=2)
def save_network(net: RoadNetwork, path: str) -> str:
    """Сохранить сеть в JSON-файл"""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(network_to_dict(net), f, indent=2, ensure_ascii=False)
    return path
