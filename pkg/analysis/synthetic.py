# -*- coding: utf-8 -*-
"""
analysis/synthetic.py
Синтетические данные вместо реальных замеров: демонстрационная сеть на 7 зон,
генератор сети масштаба аэропорта (32 зоны, два кольца) и суточный профиль спроса,
из которого строятся согласованные OD-матрицы и наблюдения на границах.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from analysis.odgen import build_zero_mask
from core.demand import FlowObservation, ODMatrix, TOTAL, free_pairs
from core.network import (
    CostWeights, JUNCTION, Link, Node, RoadNetwork, Sensor, VdfParams, ZONE_CONNECTOR, Zone, check_reachability,
)
from core.network_io import load_network
from infra.error_handler import ConfigError, NetworkValidationError, safe_run
from infra.logger import get_logger
from system import config


# ---------- Сети ----------

def demo_network(path: Optional[str] = None) -> RoadNetwork:
    """7 зон, по одной на класс; файл поставляется с репозиторием"""
    return load_network(path or config.DEMO_NETWORK_PATH)


# число зон каждого класса (Z1..Z7) в сети масштаба аэропорта
LAX_CLASS_COUNTS = (("Z1", 3), ("Z2", 4), ("Z3", 3), ("Z4", 4), ("Z5", 6), ("Z6", 7), ("Z7", 5))

_LENGTHS = {"ring": 250.0, "boundary": 300.0, "curb": 80.0, "parking": 120.0}
_CAPACITY = {"ring": 2400.0, "bypass": 900.0, "boundary": 1800.0, "curb": 600.0, "parking": 900.0}


class _NetworkBuilder:
    def __init__(self, free_speed: float):
        self.free_speed = free_speed
        self.nodes: Dict[int, Node] = {}
        self.links: Dict[int, Link] = {}

    def node(self, nid: int, kind: str = JUNCTION) -> int:
        self.nodes.setdefault(nid, Node(id=nid, kind=kind))
        return nid

    def link(self, a: int, b: int, length: float, capacity: float, financial_cost: float = 0.0) -> int:
        lid = len(self.links) + 1
        t0 = length / self.free_speed
        self.links[lid] = Link(id=lid, from_node=a, to_node=b, length=length, capacity=capacity,
                               free_flow_time=t0, financial_cost=financial_cost)
        return lid


def _ring(builder: _NetworkBuilder, base: int, size: int) -> List[int]:
    """Одностороннее замкнутое кольцо + объезды через каждые три узла (в обход двух сегментов)"""
    junctions = [builder.node(base + k) for k in range(size)]
    for k in range(size):
        builder.link(junctions[k], junctions[(k + 1) % size], _LENGTHS["ring"], _CAPACITY["ring"])
    for k in range(0, size - 2, 3):
        builder.link(junctions[k], junctions[k + 2], 2.4 * _LENGTHS["ring"], _CAPACITY["bypass"])
    return junctions


@safe_run(stage="Генерация сети")
def generate_lax_network(settings: Optional[Dict] = None, parking_fee: float = 2.0) -> RoadNetwork:
    """
    Сеть терминальной зоны из двух односторонних колец (верхний и нижний уровень).
    Верхнее кольцо (18 узлов): въезды 0-2, бордюры 3-8, парковки 9-13, выезды 14-17.
    Нижнее кольцо (19 узлов): въезды 0-2, бордюры 3-9, парковки 10-14, выезды 15-18.
    Парковки соединяют уровни; датчики: 14 на границах, 20 на уровнях парковок, 1 на верхнем кольце.
    """
    s = settings or config.NETWORK
    builder = _NetworkBuilder(float(s["free_speed"]))
    upper = _ring(builder, 100, 18)
    lower = _ring(builder, 200, 19)

    classes = [cls for cls, count in LAX_CLASS_COUNTS for _ in range(count)]
    by_class: Dict[str, List[int]] = {}
    for zid, cls in enumerate(classes):
        by_class.setdefault(cls, []).append(zid)
        builder.node(1000 + zid, ZONE_CONNECTOR)

    zones: Dict[int, Zone] = {}
    boundary_sensors: List[int] = []

    def connector(zid: int) -> int:
        return 1000 + zid

    def attach(zid: int, cls: str, links: List[int], levels: Optional[Dict[str, int]] = None):
        zone = zones.setdefault(zid, Zone(id=zid, zone_class=cls, attach_links=[], levels={}))
        zone.attach_links.extend(links)
        zone.levels.update(levels or {})

    def boundary(ring: List[int], cls_in: str, cls_out: str, exit_start: int):
        for k, zid in enumerate(by_class[cls_in]):
            lid = builder.link(connector(zid), ring[k], _LENGTHS["boundary"], _CAPACITY["boundary"])
            attach(zid, cls_in, [lid])
            boundary_sensors.append(lid)
        for k, zid in enumerate(by_class[cls_out]):
            lid = builder.link(ring[exit_start + k], connector(zid), _LENGTHS["boundary"], _CAPACITY["boundary"])
            attach(zid, cls_out, [lid])
            boundary_sensors.append(lid)

    def curbs(ring: List[int], cls: str, start: int):
        for k, zid in enumerate(by_class[cls]):
            j = start + k
            lin = builder.link(ring[j], connector(zid), _LENGTHS["curb"], _CAPACITY["curb"])
            lout = builder.link(connector(zid), ring[j + 1], _LENGTHS["curb"], _CAPACITY["curb"])
            attach(zid, cls, [lin, lout])

    boundary(upper, "Z1", "Z2", exit_start=14)
    boundary(lower, "Z3", "Z4", exit_start=15)
    curbs(upper, "Z5", start=3)
    curbs(lower, "Z6", start=3)

    parking_sensors: List[int] = []
    for k, zid in enumerate(by_class["Z7"]):
        levels = {}
        for ring, start, suffix in ((upper, 9, "ul"), (lower, 10, "ll")):
            j = start + k
            levels[f"in_{suffix}"] = builder.link(ring[j], connector(zid), _LENGTHS["parking"], _CAPACITY["parking"],
                                                  financial_cost=parking_fee)
            levels[f"out_{suffix}"] = builder.link(connector(zid), ring[j + 1], _LENGTHS["parking"], _CAPACITY["parking"])
        attach(zid, "Z7", list(levels.values()), levels)
        parking_sensors.extend(levels[tag] for tag in ("in_ul", "in_ll", "out_ul", "out_ll"))

    ring_sensor = next(lid for lid, l in builder.links.items() if l.from_node == upper[5] and l.to_node == upper[6])
    sensor_links = boundary_sensors + parking_sensors + [ring_sensor]
    sensors = [Sensor(id=sid, link=lid) for sid, lid in enumerate(sensor_links)]

    cw = s["cost_weights"]
    net = RoadNetwork(
        nodes=builder.nodes,
        links=builder.links,
        zones=[zones[z] for z in sorted(zones)],
        sensors=sensors,
        cost_weights=CostWeights(cw["alpha"], cw["beta"], cw["gamma"]),
        vdf=VdfParams(float(s["vdf_a"]), float(s["vdf_power"])),
    )
    net.validate()
    missing = check_reachability(net, free_pairs(build_zero_mask(net.zones)))
    if missing:
        raise NetworkValidationError(f"Нет маршрутов для допустимых пар {missing[:5]}")
    get_logger().info(f"Сеть сгенерирована: зон {net.n_zones}, связей {len(net.links)}, датчиков {net.n_sensors}")
    return net


# ---------- Профиль спроса ----------

@dataclass
class SyntheticDemandProfile:
    base_flows: Dict[int, float]     # zone_id -> исходящий поток зоны, veh/h
    diurnal: List[float]             # 24 множителя
    days: int = 30
    noise_seed: int = 42
    noise_sigma: float = 0.15
    concentration: float = 2.0       # параметр Дирихле для долей направлений

    def __post_init__(self):
        self.diurnal = [float(v) for v in self.diurnal]
        if len(self.diurnal) != 24:
            raise ConfigError(f"Суточный профиль: нужно 24 множителя, получено {len(self.diurnal)}")
        if any(not math.isfinite(v) or v < 0 for v in self.diurnal):
            raise ConfigError("Суточный профиль: множители должны быть конечными и ≥ 0")
        for zid, value in self.base_flows.items():
            if value is None or not math.isfinite(value) or value < 0:
                raise ConfigError(f"Базовый поток zone_id={zid} должен быть конечным и ≥ 0, получено {value}")
        if self.days < 1 or self.noise_sigma < 0 or self.concentration <= 0:
            raise ConfigError("Профиль: days ≥ 1, noise_sigma ≥ 0, concentration > 0")

    @property
    def n_hours(self) -> int:
        return self.days * 24

    @classmethod
    def from_settings(cls, net: RoadNetwork, settings: Optional[Dict] = None, seed: Optional[int] = None,
                      days: Optional[int] = None) -> "SyntheticDemandProfile":
        s = settings or config.PIPELINE
        per_class = s["base_flows"]
        return cls(
            base_flows={z.id: float(per_class.get(z.zone_class, 0.0)) for z in net.zones},
            diurnal=list(s["diurnal"]),
            days=int(days if days is not None else s["days"]),
            noise_seed=int(s["seed"] if seed is None else seed),
            noise_sigma=float(s["noise_sigma"]),
        )


def generate_synthetic_demand(net: RoadNetwork, profile: SyntheticDemandProfile) -> List[ODMatrix]:
    """
    Почасовые OD-матрицы: исход зоны = база × суточный множитель × логнормальный шум,
    распределение по допустимым направлениям — доли Дирихле.
    """
    mask = build_zero_mask(net.zones)
    rng = np.random.default_rng(profile.noise_seed)
    sigma = profile.noise_sigma
    ods = []
    for hour in range(profile.n_hours):
        multiplier = profile.diurnal[hour % 24]
        demand = np.zeros(mask.shape)
        for i in range(mask.shape[0]):
            dests = np.nonzero(~mask[i])[0]
            base = profile.base_flows.get(i, 0.0)
            if base <= 0 or dests.size == 0:
                continue
            noise = rng.lognormal(mean=-0.5 * sigma ** 2, sigma=sigma) if sigma > 0 else 1.0
            shares = rng.dirichlet(np.full(dests.size, profile.concentration))
            demand[i, dests] = base * multiplier * noise * shares
        if np.any(demand < 0):
            raise ConfigError(f"Час {hour}: профиль дал отрицательный спрос")
        ods.append(ODMatrix(demand=demand, mask=mask, hour_index=hour))
    return ods


def observations_from_od(net: RoadNetwork, od: ODMatrix) -> FlowObservation:
    """Потоки на въездах, выездах и уровнях парковок, которые порождает матрица od"""
    d = od.demand
    q: Dict[Tuple[int, str], float] = {}
    for i in net.zones_of("Z1", "Z3"):
        q[(i, TOTAL)] = float(d[i, :].sum())
    for j in net.zones_of("Z2", "Z4"):
        q[(j, TOTAL)] = float(d[:, j].sum())
    z1, z2, z3, z4 = (net.zones_of(c) for c in ("Z1", "Z2", "Z3", "Z4"))
    for p in net.zones_of("Z7"):
        q[(p, "in_ul")] = float(d[z1, p].sum())
        q[(p, "in_ll")] = float(d[z3, p].sum())
        q[(p, "out_ul")] = float(d[p, z2].sum())
        q[(p, "out_ll")] = float(d[p, z4].sum())
    return FlowObservation(q=q, hour_index=od.hour_index)


@safe_run(stage="Генерация наблюдений")
def generate_synthetic_observations(net: RoadNetwork, profile: SyntheticDemandProfile) -> List[FlowObservation]:
    """По одному наблюдению на час; детерминировано при фиксированном noise_seed"""
    return [observations_from_od(net, od) for od in generate_synthetic_demand(net, profile)]
