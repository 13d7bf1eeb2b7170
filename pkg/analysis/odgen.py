# -*- coding: utf-8 -*-
"""
analysis/odgen.py
Генерация допустимых OD-матриц: маска структурных нулей, система Ad = b по потокам
на въездах/выездах/парковках и неотрицательный МНК min ‖Ad − b‖², d ≥ 0.
"""

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from core.demand import FlowObservation, ODMatrix, TOTAL, free_pairs
from core.network import RoadNetwork, Zone
from infra.error_handler import AssemblyError, ConvergenceError, safe_run
from infra.logger import get_logger
from system import config


ENTRANCES = ("Z1", "Z3")
EXITS = ("Z2", "Z4")
INNER = ("Z5", "Z6", "Z7")

# (класс источника, класс стока): запреты на переходы между уровнями
_CROSS_LEVEL = {("Z1", "Z6"), ("Z3", "Z5"), ("Z5", "Z4"), ("Z6", "Z2")}


class RowTag(NamedTuple):
    kind: str         # entrance_total, exit_total, parking_{in,out}_{ul,ll}
    zone: int


@dataclass
class ConstraintSystem:
    A: np.ndarray
    b: np.ndarray
    row_tags: List[RowTag]
    pairs: List[Tuple[int, int]]   # столбец -> свободная пара (i, j)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape


@dataclass
class ODSolution:
    od: ODMatrix
    objective: float
    iterations: int
    lipschitz: float
    trace: List[float] = field(default_factory=list)


def _classes(zones: Sequence[Union[Zone, str]]) -> List[str]:
    return [z.zone_class if isinstance(z, Zone) else str(z) for z in zones]


# ---------- Маска ----------

def is_structural_zero(ci: str, cj: str, same_zone: bool = False) -> bool:
    """Структурный ноль для пары классов источника и стока"""
    if same_zone:
        return True
    if ci in EXITS:                      # из выездов спроса нет
        return True
    if cj in ENTRANCES:                  # во въезды спроса нет
        return True
    if ci in ENTRANCES and cj in EXITS:  # транзит въезд → выезд
        return True
    if ci in INNER and cj in INNER:      # парковки и бордюры между собой
        return True
    return (ci, cj) in _CROSS_LEVEL


def build_zero_mask(zones: Sequence[Union[Zone, str]]) -> np.ndarray:
    """mask[i, j] = True, если d_ij — структурный ноль"""
    classes = _classes(zones)
    z = len(classes)
    mask = np.zeros((z, z), dtype=bool)
    for i in range(z):
        for j in range(z):
            mask[i, j] = is_structural_zero(classes[i], classes[j], same_zone=(i == j))
    return mask


# ---------- Система ограничений ----------

def assemble_constraints(zones: Sequence[Zone], obs: FlowObservation, mask: np.ndarray) -> ConstraintSystem:
    """
    Строки: сумма по строке для каждого въезда, сумма по столбцу для каждого выезда,
    затем для каждой парковки въезд с верхнего/нижнего уровня и выезд на верхний/нижний.
    """
    classes = _classes(zones)
    pairs = free_pairs(mask)
    column = {pair: k for k, pair in enumerate(pairs)}
    by_class: Dict[str, List[int]] = {}
    for zid, cls in enumerate(classes):
        by_class.setdefault(cls, []).append(zid)

    def observed(zid: int, tag: str) -> float:
        value = obs.get(zid, tag)
        if value is None:
            raise AssemblyError(f"Час {obs.hour_index}: нет наблюдения для zone_id={zid} ({classes[zid]}, {tag})")
        return float(value)

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    tags: List[RowTag] = []

    def add_row(cells: List[Tuple[int, int]], value: float, tag: RowTag):
        row = np.zeros(len(pairs))
        for cell in cells:
            if cell in column:
                row[column[cell]] = 1.0
        if not row.any():
            raise AssemblyError(f"Ограничение {tag.kind} для zone_id={tag.zone}: нет свободных элементов")
        rows.append(row)
        rhs.append(value)
        tags.append(tag)

    z = len(classes)
    for i in sorted(by_class.get("Z1", []) + by_class.get("Z3", [])):
        add_row([(i, j) for j in range(z)], observed(i, TOTAL), RowTag("entrance_total", i))
    for j in sorted(by_class.get("Z2", []) + by_class.get("Z4", [])):
        add_row([(i, j) for i in range(z)], observed(j, TOTAL), RowTag("exit_total", j))
    for p in by_class.get("Z7", []):
        add_row([(i, p) for i in by_class.get("Z1", [])], observed(p, "in_ul"), RowTag("parking_in_ul", p))
        add_row([(i, p) for i in by_class.get("Z3", [])], observed(p, "in_ll"), RowTag("parking_in_ll", p))
        add_row([(p, j) for j in by_class.get("Z2", [])], observed(p, "out_ul"), RowTag("parking_out_ul", p))
        add_row([(p, j) for j in by_class.get("Z4", [])], observed(p, "out_ll"), RowTag("parking_out_ll", p))

    A = np.vstack(rows) if rows else np.zeros((0, len(pairs)))
    return ConstraintSystem(A=A, b=np.asarray(rhs, dtype=float), row_tags=tags, pairs=pairs)


# ---------- NNLS ----------

def estimate_lipschitz(A: np.ndarray, iters: int = 500) -> float:
    """λ_max(AᵀA) степенным методом из детерминированного старта"""
    n = A.shape[1]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        lam = norm
        v = w / norm
    return float(lam)


def solve_nnls(A: np.ndarray, b: np.ndarray, max_iter: int = 50000, rel_tol: float = 1e-9,
               power_iters: int = 500) -> Tuple[np.ndarray, float, int, float, List[float]]:
    """
    Проекционный градиент для min ‖Ax − b‖², x ≥ 0: шаг 1/L, L = λ_max(AᵀA), старт x = 0.
    Возвращает (x, цель, итерации, L, трасса цели).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.zeros(A.shape[1])
    residual = A @ x - b
    objective = float(residual @ residual)
    trace = [objective]

    lipschitz = estimate_lipschitz(A, power_iters)
    if lipschitz == 0.0:
        return x, objective, 0, lipschitz, trace
    # запас на недооценку степенным методом
    step = 1.0 / (lipschitz * (1.0 + 1e-6))
    floor = 1e-28 * max(float(b @ b), 1.0)

    iterations = 0
    while iterations < max_iter and objective > floor:
        iterations += 1
        x = np.maximum(x - step * (A.T @ residual), 0.0)
        residual = A @ x - b
        new_objective = float(residual @ residual)
        trace.append(new_objective)
        improvement = objective - new_objective
        objective = new_objective
        if improvement <= rel_tol * trace[-2]:
            break
    return x, objective, iterations, lipschitz, trace


def solve_feasible_od(system: ConstraintSystem, mask: np.ndarray, hour_index: int = 0,
                      settings: Optional[Dict] = None, expect_feasible: bool = False) -> ODSolution:
    """
    Решение задачи min ‖Ad − b‖², d ≥ 0 и раскладка в OD-матрицу по маске.
    expect_feasible=True — для данных, построенных из известного d* ≥ 0:
    цель выше feas_tol·‖b‖² даёт ConvergenceError.
    """
    settings = settings or config.ODGEN
    x, objective, iterations, lipschitz, trace = solve_nnls(
        system.A, system.b,
        max_iter=int(settings["max_iter"]),
        rel_tol=float(settings["rel_tol"]),
        power_iters=int(settings["power_iters"]),
    )
    if expect_feasible:
        tau = float(settings["feas_tol"]) * float(system.b @ system.b)
        if objective > tau:
            raise ConvergenceError(
                f"Час {hour_index}: невязка {objective:.3e} выше допуска {tau:.3e} за {iterations} итераций",
                residual=objective,
            )
    od = ODMatrix.from_vector(x, mask, hour_index=hour_index)
    return ODSolution(od=od, objective=objective, iterations=iterations, lipschitz=lipschitz, trace=trace)


class ODGenerator:
    """
    Генерация допустимой OD-матрицы на час:
    - маска по классам зон
    - система ограничений по наблюдениям
    - NNLS проекционным градиентом
    """

    def __init__(self, settings: Optional[Dict] = None):
        self.settings = settings or config.ODGEN
        self.logger = get_logger()

    @safe_run(stage="Генерация OD-матрицы")
    def generate(self, net: RoadNetwork, obs: FlowObservation, expect_feasible: bool = False) -> ODSolution:
        mask = build_zero_mask(net.zones)
        system = assemble_constraints(net.zones, obs, mask)
        solution = solve_feasible_od(system, mask, hour_index=obs.hour_index,
                                     settings=self.settings, expect_feasible=expect_feasible)
        self.logger.debug(f"Час {obs.hour_index}: строк {system.shape[0]}, свободных элементов {system.shape[1]}, "
                          f"цель {solution.objective:.3e}, итераций {solution.iterations}")
        return solution
