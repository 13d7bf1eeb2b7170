# -*- coding: utf-8 -*-
"""
analysis/dta.py
Итеративное распределение потоков (DTA): рост наборов маршрутов кратчайшими путями,
логит-разделение спроса, загрузка связей, BPR-время с усреднением (MSA), проверка сходимости.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.demand import FlowVector, ODMatrix
from core.demand_io import save_sensor_flows
from core.network import CostWeights, RoadNetwork, Sensor, bpr_time, route_cost, shortest_paths_from
from infra.error_handler import AssignmentError, UnroutableDemandError, safe_run
from infra.logger import get_logger
from system import config


Pair = Tuple[int, int]
Route = Tuple[int, ...]


@dataclass
class DtaParams:
    eta: float = 1.0
    max_iter: int = 20
    conv_eps: float = 0.01
    cost_weights: Optional[CostWeights] = None   # None: веса из файла сети
    cost_floor: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"DtaParams: N должно быть ≥ 1, получено {self.max_iter}")
        if not self.conv_eps > 0:
            raise ValueError(f"DtaParams: conv_eps должно быть > 0, получено {self.conv_eps}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"DtaParams: η должно быть ≥ 0, получено {self.eta}")
        if self.cost_weights is not None:
            self.cost_weights = CostWeights(*self.cost_weights)

    @classmethod
    def from_settings(cls, settings: Optional[Dict] = None) -> "DtaParams":
        s = settings or config.DTA
        return cls(eta=float(s["eta"]), max_iter=int(s["max_iter"]), conv_eps=float(s["conv_eps"]),
                   cost_floor=float(s["cost_floor"]))


@dataclass
class RouteSet:
    od_pair: Pair
    routes: List[Route] = field(default_factory=list)
    costs: List[float] = field(default_factory=list)
    probabilities: List[float] = field(default_factory=list)

    def add(self, route: Sequence[int]) -> bool:
        """Добавить маршрут; уже известный маршрут не дублируется"""
        route = tuple(route)
        if route in self.routes:
            return False
        self.routes.append(route)
        return True

    def expected_cost(self) -> float:
        return float(sum(p * c for p, c in zip(self.probabilities, self.costs)))


@dataclass
class AssignmentResult:
    sensor_flows: FlowVector
    link_flows: Dict[int, float]
    route_sets: Dict[Pair, RouteSet]
    iterations_run: int
    converged: bool
    link_travel_times: Dict[int, float] = field(default_factory=dict)
    mean_route_cost: float = 0.0
    change_trace: List[float] = field(default_factory=list)
    route_count_trace: List[Dict[Pair, int]] = field(default_factory=list)


# ---------- Операции ----------

def logit_split(costs: Sequence[float], eta: float) -> np.ndarray:
    """p_j = C_j^(−η) / Σ C_i^(−η), в форме exp(−η·log C) со сдвигом для устойчивости"""
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        return c
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise AssignmentError(f"Логит определён только для конечных стоимостей > 0: {c.tolist()}")
    utility = -eta * np.log(c)
    utility -= utility.max()
    weights = np.exp(utility)
    return weights / weights.sum()


def load_demand(net: RoadNetwork, od: ODMatrix, route_sets: Dict[Pair, RouteSet]) -> Dict[int, float]:
    """Поток связи = Σ по парам и маршрутам d_ij·p(R)·[связь ∈ R]"""
    flows = {lid: 0.0 for lid in sorted(net.links)}
    for i, j, demand in od.positive_pairs():
        rs = route_sets.get((i, j))
        if rs is None or not rs.routes:
            raise UnroutableDemandError(f"Спрос {demand:.3f} для пары ({i}, {j}) без маршрутов", pair=(i, j))
        for route, p in zip(rs.routes, rs.probabilities):
            share = demand * p
            for lid in route:
                flows[lid] += share
    return flows


def extract_sensor_flows(link_flows: Dict[int, float], sensors: Iterable[Sensor]) -> FlowVector:
    """Вектор потоков в порядке id датчиков"""
    ordered = sorted(sensors, key=lambda s: s.id)
    return np.array([link_flows[s.link] for s in ordered], dtype=float)


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    if new.size == 0:
        return 0.0
    scale = np.where(old > 0, old, 1.0)
    return float(np.max(np.abs(new - old) / scale))


class TrafficAssigner:
    """
    DTA по схеме: кратчайшие маршруты → логит → загрузка → обновление времени → сходимость.
    Сеть на входе не меняется: расчёт идёт на копии.
    """

    def __init__(self, params: Optional[DtaParams] = None):
        self.params = params or DtaParams.from_settings()
        self.logger = get_logger()

    def run(self, net: RoadNetwork, od: ODMatrix,
            initial_routes: Optional[Dict[Pair, Iterable[Sequence[int]]]] = None) -> AssignmentResult:
        params = self.params
        work = net.copy()
        weights = params.cost_weights or work.cost_weights
        link_ids = sorted(work.links)
        links = [work.links[lid] for lid in link_ids]
        t0 = np.array([l.free_flow_time for l in links])
        capacity = np.array([l.capacity for l in links])
        length = np.array([l.length for l in links])
        financial = np.array([l.financial_cost for l in links])
        if np.any(capacity <= 0) or not np.all(np.isfinite(capacity)):
            raise AssignmentError("Пропускная способность связей должна быть конечной и > 0")

        # первая итерация: время = t0 (пропорционально длине)
        times = t0.copy()
        for link in links:
            link.current_travel_time = link.free_flow_time
            link.current_flow = 0.0

        demand_pairs = od.positive_pairs()
        route_sets: Dict[Pair, RouteSet] = {}
        for i, j, _ in demand_pairs:
            rs = RouteSet(od_pair=(i, j))
            for route in (initial_routes or {}).get((i, j), []):
                rs.add(route)
            route_sets[(i, j)] = rs
        by_origin: Dict[int, List[int]] = {}
        for i, j, _ in demand_pairs:
            by_origin.setdefault(i, []).append(j)

        change_trace: List[float] = []
        count_trace: List[Dict[Pair, int]] = []
        link_flows = {lid: 0.0 for lid in link_ids}
        converged = False
        iteration = 0

        for iteration in range(1, params.max_iter + 1):
            cost_arr = weights.alpha * times + weights.beta * length + weights.gamma * financial
            costs = dict(zip(link_ids, cost_arr.tolist()))

            for i in sorted(by_origin):
                paths = shortest_paths_from(work, i, by_origin[i], costs)
                for j in by_origin[i]:
                    route = paths.get(j)
                    if route is None:
                        if not route_sets[(i, j)].routes:
                            raise UnroutableDemandError(f"Нет маршрута для пары ({i}, {j}) с положительным спросом", pair=(i, j))
                        continue
                    route_sets[(i, j)].add(route)

            for rs in route_sets.values():
                rs.costs = [max(route_cost(r, costs), params.cost_floor) for r in rs.routes]
                rs.probabilities = logit_split(rs.costs, params.eta).tolist()
            count_trace.append({pair: len(rs.routes) for pair, rs in route_sets.items()})

            link_flows = load_demand(work, od, route_sets)
            flows = np.array([link_flows[lid] for lid in link_ids])
            instant = bpr_time(t0, flows, capacity, work.vdf)
            new_times = (1.0 - 1.0 / iteration) * times + (1.0 / iteration) * instant
            if not np.all(np.isfinite(new_times)):
                raise AssignmentError(f"Итерация {iteration}: нечисловое время проезда (проверьте пропускные способности)")

            # денежная стоимость статична, но проверяется наравне со временем
            change = max(_relative_change(new_times, times), _relative_change(financial, financial))
            change_trace.append(change)
            times = new_times
            for link, t, v in zip(links, times, flows):
                link.current_travel_time = float(t)
                link.current_flow = float(v)

            if iteration >= 2 and change < params.conv_eps:
                converged = True
                break

        final_costs = dict(zip(link_ids, (weights.alpha * times + weights.beta * length + weights.gamma * financial).tolist()))
        # rs.costs остаются теми, по которым делился спрос; средняя стоимость считается по итоговым временам
        total_demand = 0.0
        weighted = 0.0
        for i, j, demand in demand_pairs:
            rs = route_sets[(i, j)]
            final = [max(route_cost(r, final_costs), params.cost_floor) for r in rs.routes]
            total_demand += demand
            weighted += demand * float(np.dot(rs.probabilities, final))

        return AssignmentResult(
            sensor_flows=extract_sensor_flows(link_flows, work.sensors),
            link_flows=link_flows,
            route_sets=route_sets,
            iterations_run=iteration,
            converged=converged,
            link_travel_times=dict(zip(link_ids, times.tolist())),
            mean_route_cost=weighted / total_demand if total_demand > 0 else 0.0,
            change_trace=change_trace,
            route_count_trace=count_trace,
        )


@safe_run(stage="DTA")
def run_dta(net: RoadNetwork, od: ODMatrix, params: Optional[DtaParams] = None,
            initial_routes: Optional[Dict[Pair, Iterable[Sequence[int]]]] = None) -> AssignmentResult:
    """Распределение одной OD-матрицы по сети"""
    result = TrafficAssigner(params).run(net, od, initial_routes)
    get_logger().debug(f"DTA час {od.hour_index}: итераций {result.iterations_run}, сходимость {result.converged}")
    return result


def save_assignment(result: AssignmentResult, params: DtaParams, path: str) -> str:
    """Потоки датчиков + метаданные прогона"""
    meta = {
        "iterations": result.iterations_run,
        "converged": result.converged,
        "eta": params.eta,
        "N": params.max_iter,
        "conv_eps": params.conv_eps,
    }
    return save_sensor_flows(result.sensor_flows, path, meta)
