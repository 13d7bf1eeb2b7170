# -*- coding: utf-8 -*-
"""
core/network.py
Дорожная сеть: узлы, связи, зоны (классы Z1–Z7), датчики, обобщённая стоимость,
BPR-время проезда и кратчайшие пути по обобщённой стоимости.
"""

import copy
import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import networkx as nx

from infra.error_handler import InvalidLinkError, NetworkValidationError


JUNCTION = "junction"
ZONE_CONNECTOR = "zone-connector"
NODE_KINDS = (JUNCTION, ZONE_CONNECTOR)

ZONE_CLASSES = {
    "Z1": "въезд, верхний уровень",
    "Z2": "выезд, верхний уровень",
    "Z3": "въезд, нижний уровень",
    "Z4": "выезд, нижний уровень",
    "Z5": "бордюр, верхний уровень",
    "Z6": "бордюр, нижний уровень",
    "Z7": "парковка",
}

PARKING_LEVELS = ("in_ul", "in_ll", "out_ul", "out_ll")


class CostWeights(NamedTuple):
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0


class VdfParams(NamedTuple):
    a: float = 0.15
    power: float = 4.0


# ---------- Типы ----------

@dataclass
class Node:
    id: int
    kind: str = JUNCTION


@dataclass
class Link:
    id: int
    from_node: int
    to_node: int
    length: float
    capacity: float
    free_flow_time: float
    financial_cost: float = 0.0
    current_travel_time: Optional[float] = None
    current_flow: float = 0.0

    def __post_init__(self):
        if self.current_travel_time is None:
            self.current_travel_time = self.free_flow_time


@dataclass
class Zone:
    id: int
    zone_class: str
    attach_links: List[int]
    levels: Dict[str, int] = field(default_factory=dict)


@dataclass
class Sensor:
    id: int
    link: int


@dataclass
class RoadNetwork:
    nodes: Dict[int, Node]
    links: Dict[int, Link]
    zones: List[Zone]
    sensors: List[Sensor]
    cost_weights: CostWeights = CostWeights()
    vdf: VdfParams = VdfParams()

    _out: Dict[int, List[int]] = field(default_factory=dict, init=False, repr=False, compare=False)
    _origin: Dict[int, List[int]] = field(default_factory=dict, init=False, repr=False, compare=False)
    _dest: Dict[int, List[int]] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.cost_weights = CostWeights(*self.cost_weights)
        self.vdf = VdfParams(*self.vdf)
        self.zones = sorted(self.zones, key=lambda z: z.id)
        self.sensors = sorted(self.sensors, key=lambda s: s.id)
        self.reindex()

    def reindex(self):
        """Перестроить индексы смежности после изменения топологии"""
        self._out = {nid: [] for nid in self.nodes}
        for lid in sorted(self.links):
            link = self.links[lid]
            self._out.setdefault(link.from_node, []).append(lid)
        self._origin, self._dest = {}, {}
        for zone in self.zones:
            starts, ends = [], []
            for lid in sorted(set(zone.attach_links)):
                link = self.links.get(lid)
                if link is None:
                    continue
                if self._is_connector(link.from_node):
                    starts.append(lid)
                if self._is_connector(link.to_node):
                    ends.append(lid)
            self._origin[zone.id] = starts
            self._dest[zone.id] = ends

    def _is_connector(self, node_id: int) -> bool:
        node = self.nodes.get(node_id)
        return node is not None and node.kind == ZONE_CONNECTOR

    # ---------- Запросы ----------

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def zone(self, zone_id: int) -> Zone:
        return self.zones[zone_id]

    def zones_of(self, *classes: str) -> List[int]:
        return [z.id for z in self.zones if z.zone_class in classes]

    def out_links(self, node_id: int) -> List[int]:
        return self._out.get(node_id, [])

    def origin_links(self, zone_id: int) -> List[int]:
        """Связи, по которым спрос зоны входит в сеть"""
        return self._origin.get(zone_id, [])

    def dest_links(self, zone_id: int) -> List[int]:
        """Связи, по которым спрос покидает сеть в зоне"""
        return self._dest.get(zone_id, [])

    def link_costs(self) -> Dict[int, float]:
        """Снимок обобщённых стоимостей всех связей"""
        return {lid: general_cost(link, self.cost_weights) for lid, link in self.links.items()}

    def copy(self) -> "RoadNetwork":
        return copy.deepcopy(self)

    def to_digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for lid in sorted(self.links):
            link = self.links[lid]
            g.add_edge(link.from_node, link.to_node, link_id=lid)
        return g

    # ---------- Проверки ----------

    def validate(self):
        """Проверка инвариантов типов; NetworkValidationError с указанием сущности"""
        for nid, node in self.nodes.items():
            if node.kind not in NODE_KINDS:
                raise NetworkValidationError(f"node id={nid}: неизвестный тип '{node.kind}'")

        for lid, link in self.links.items():
            ctx = f"link id={lid}"
            for end in (link.from_node, link.to_node):
                if end not in self.nodes:
                    raise NetworkValidationError(f"{ctx}: ссылка на отсутствующий узел {end}")
            for name in ("length", "capacity", "free_flow_time", "financial_cost", "current_travel_time", "current_flow"):
                value = getattr(link, name)
                if value is None or not math.isfinite(value):
                    raise NetworkValidationError(f"{ctx}: {name} не является конечным числом")
            for name in ("length", "capacity", "free_flow_time"):
                if getattr(link, name) <= 0:
                    raise NetworkValidationError(f"{ctx}: {name} должно быть > 0, получено {getattr(link, name)}")
            if link.financial_cost < 0 or link.current_flow < 0:
                raise NetworkValidationError(f"{ctx}: financial_cost и current_flow должны быть ≥ 0")
            if link.current_travel_time < link.free_flow_time:
                raise NetworkValidationError(f"{ctx}: current_travel_time < free_flow_time")

        for expected, zone in enumerate(self.zones):
            ctx = f"zone id={zone.id}"
            if zone.id != expected:
                raise NetworkValidationError(f"{ctx}: id зон должны идти подряд 0..Z-1 (ожидался {expected})")
            if zone.zone_class not in ZONE_CLASSES:
                raise NetworkValidationError(f"{ctx}: неизвестный класс '{zone.zone_class}'")
            if not zone.attach_links:
                raise NetworkValidationError(f"{ctx}: нет ни одной связи подключения")
            for lid in zone.attach_links:
                if lid not in self.links:
                    raise NetworkValidationError(f"{ctx}: связь подключения {lid} отсутствует")
            if zone.zone_class == "Z7":
                missing = [tag for tag in PARKING_LEVELS if tag not in zone.levels]
                if missing:
                    raise NetworkValidationError(f"{ctx}: у парковки не заданы уровни {missing}")
            for tag, lid in zone.levels.items():
                if tag not in PARKING_LEVELS or lid not in zone.attach_links:
                    raise NetworkValidationError(f"{ctx}: уровень {tag} -> {lid} не входит в связи подключения")

        for expected, sensor in enumerate(self.sensors):
            if sensor.id != expected:
                raise NetworkValidationError(f"sensor id={sensor.id}: id датчиков должны идти подряд 0..S-1")
            if sensor.link not in self.links:
                raise NetworkValidationError(f"sensor id={sensor.id}: связь {sensor.link} отсутствует")

        if any((not math.isfinite(w)) or w < 0 for w in self.cost_weights):
            raise NetworkValidationError(f"cost_weights: веса должны быть конечными и ≥ 0: {tuple(self.cost_weights)}")
        if not (math.isfinite(self.vdf.a) and self.vdf.a >= 0 and math.isfinite(self.vdf.power) and self.vdf.power > 0):
            raise NetworkValidationError(f"vdf: недопустимые параметры {tuple(self.vdf)}")

        if self.links and not nx.is_weakly_connected(self.to_digraph()):
            raise NetworkValidationError("граф сети не является слабосвязным")
        self.reindex()


def check_reachability(net: RoadNetwork, pairs: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Пары (i, j), для которых нет ни одного допустимого маршрута"""
    by_origin: Dict[int, Set[int]] = {}
    for i, j in pairs:
        by_origin.setdefault(i, set()).add(j)
    costs = {lid: 1.0 for lid in net.links}
    missing = []
    for i in sorted(by_origin):
        routes = shortest_paths_from(net, i, sorted(by_origin[i]), costs)
        missing.extend((i, j) for j in sorted(by_origin[i]) if j not in routes)
    return missing


# ---------- Стоимость и время ----------

def general_cost(link: Link, weights: Sequence[float]) -> float:
    """C = α·T_tr + β·L + γ·C_f"""
    alpha, beta, gamma = weights
    values = (link.current_travel_time, link.length, link.financial_cost)
    if any(v is None or not math.isfinite(v) for v in values):
        raise InvalidLinkError(f"link id={link.id}: нечисловой атрибут {values}")
    return alpha * values[0] + beta * values[1] + gamma * values[2]


def bpr_time(free_flow_time, flow, capacity, vdf: VdfParams = VdfParams()):
    """t = t0·(1 + a·(v/cap)^p); работает и со скалярами, и с numpy-массивами"""
    return free_flow_time * (1.0 + vdf.a * (flow / capacity) ** vdf.power)


def update_travel_time(link: Link, vdf: VdfParams = VdfParams()) -> float:
    """Пересчитать текущее время проезда по текущему потоку связи"""
    if not (link.capacity > 0) or not math.isfinite(link.capacity):
        raise InvalidLinkError(f"link id={link.id}: пропускная способность должна быть > 0, получено {link.capacity}")
    flow = max(0.0, link.current_flow)
    link.current_travel_time = bpr_time(link.free_flow_time, flow, link.capacity, VdfParams(*vdf))
    return link.current_travel_time


# ---------- Кратчайшие пути ----------

TIE_RTOL = 1e-9   # стоимости в пределах допуска считаются равными

Label = Tuple[float, Tuple[int, ...]]


def _better(a: Label, b: Label) -> bool:
    """Метка a лучше b: сначала стоимость с допуском, при равенстве — последовательность связей"""
    if abs(a[0] - b[0]) <= TIE_RTOL * max(abs(a[0]), abs(b[0])):
        return a[1] < b[1]
    return a[0] < b[0]


def shortest_paths_from(net: RoadNetwork, origin: int, dests: Iterable[int],
                        costs: Optional[Dict[int, float]] = None) -> Dict[int, List[int]]:
    """
    Маршруты минимальной обобщённой стоимости из зоны origin во все зоны dests.
    Поиск по связям (Dijkstra); метка — (стоимость, последовательность id связей),
    поэтому при равной с точностью TIE_RTOL стоимости выигрывает лексикографически меньший маршрут.
    Маршрут не проходит через коннекторы зон как через промежуточные узлы.
    """
    if costs is None:
        costs = net.link_costs()
    wanted = set(dests)
    end_links: Dict[int, List[int]] = {}
    for d in wanted:
        for lid in net.dest_links(d):
            end_links.setdefault(lid, []).append(d)

    heap: List[Label] = []
    best: Dict[int, Label] = {}
    for lid in net.origin_links(origin):
        label = (costs[lid], (lid,))
        if lid not in best or _better(label, best[lid]):
            best[lid] = label
            heapq.heappush(heap, label)

    found: Dict[int, Label] = {}
    settled: Set[int] = set()
    while heap:
        label = heapq.heappop(heap)
        cost, path = label
        # дальше только метки заметно дороже уже найденных маршрутов
        if len(found) == len(wanted) and cost > max(c for c, _ in found.values()) * (1.0 + TIE_RTOL):
            break
        lid = path[-1]
        if lid in settled or best.get(lid) != label:
            continue
        settled.add(lid)
        for d in end_links.get(lid, ()):
            if d not in found or _better(label, found[d]):
                found[d] = label

        head = net.links[lid].to_node
        if net.nodes[head].kind == ZONE_CONNECTOR:
            continue
        visited = {net.links[path[0]].from_node}
        visited.update(net.links[p].to_node for p in path)
        for nxt in net.out_links(head):
            if nxt in settled or net.links[nxt].to_node in visited:
                continue
            candidate = (cost + costs[nxt], path + (nxt,))
            if nxt not in best or _better(candidate, best[nxt]):
                best[nxt] = candidate
                heapq.heappush(heap, candidate)
    return {d: list(p) for d, (_, p) in found.items()}


def shortest_path(net: RoadNetwork, origin: int, dest: int,
                  costs: Optional[Dict[int, float]] = None) -> Optional[List[int]]:
    """Маршрут минимальной стоимости origin → dest или None"""
    return shortest_paths_from(net, origin, [dest], costs).get(dest)


def route_cost(route: Sequence[int], costs: Dict[int, float]) -> float:
    """Стоимость маршрута — сумма стоимостей его связей"""
    return float(sum(costs[lid] for lid in route))
